#include "ultdoa/tdoa.hpp"

#include <cmath>
#include <map>
#include <optional>

#include "ultdoa/error.hpp"

namespace ultdoa {

double tdoa_bound(AntennaId a, AntennaId ref, const DeploymentGeometry& g) {
  if (a == ref) throw Error(Errc::SameAntenna, "TDoA bound of an antenna against itself");
  return distance(g.antenna(a), g.antenna(ref)) / g.propagation_speed();
}

TdoaSet compute_tdoa(std::span<const ToaMeasurement> toas, const DeploymentGeometry& g, ReferencePolicy policy) {
  TdoaSet set;
  set.policy = policy;
  if (toas.empty()) return set;
  set.timestamp_index = toas.front().timestamp_index;

  std::map<AntennaId, const ToaMeasurement*> by_antenna;
  for (const auto& m : toas) {
    if (m.timestamp_index != set.timestamp_index) {
      throw Error(Errc::InvalidArgument, "ToAs from different timestamps");
    }
    if (!g.contains(m.antenna)) throw Error(Errc::InvalidArgument, "ToA from an unknown antenna");
    if (!by_antenna.emplace(m.antenna, &m).second) {
      throw Error(Errc::InvalidArgument, "duplicate ToA for one antenna");
    }
  }

  auto reference_for = [&](AntennaId id) {
    return policy.kind == ReferencePolicy::Kind::PerRu ? g.reference_of(id.ru) : policy.common_reference;
  };
  if (policy.kind == ReferencePolicy::Kind::Common && !g.contains(policy.common_reference)) {
    throw Error(Errc::InvalidArgument, "common reference is not part of the deployment");
  }

  for (const auto& [id, m] : by_antenna) {
    const AntennaId ref = reference_for(id);
    if (id == ref) continue;
    const auto it = by_antenna.find(ref);
    if (it == by_antenna.end()) {
      throw Error(Errc::MissingReference, "reference antenna (" + std::to_string(ref.ru) + ", " +
                                              std::to_string(ref.antenna) + ") has no ToA");
    }
    set.observations.push_back(
        {id, ref, set.timestamp_index, m->toa_seconds - it->second->toa_seconds, tdoa_bound(id, ref, g)});
  }
  return set;
}

TdoaFilterResult filter_tdoa(const TdoaSet& set, double slack_seconds) {
  TdoaFilterResult out;
  out.retained.timestamp_index = set.timestamp_index;
  out.retained.policy = set.policy;
  for (const auto& obs : set.observations) {
    const double limit = obs.bound + slack_seconds;
    if (std::abs(obs.value) <= limit) {
      out.retained.observations.push_back(obs);
    } else {
      out.rejected.push_back({obs, limit, "|tdoa| exceeds geometric bound"});
    }
  }
  return out;
}

}  // namespace ultdoa
