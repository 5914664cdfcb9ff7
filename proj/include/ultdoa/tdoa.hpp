#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ultdoa/geometry.hpp"
#include "ultdoa/toa.hpp"

namespace ultdoa {

struct ReferencePolicy {
  enum class Kind { PerRu, Common };

  Kind kind = Kind::PerRu;
  AntennaId common_reference{};

  static ReferencePolicy per_ru() { return {}; }
  static ReferencePolicy common(AntennaId ref) { return {Kind::Common, ref}; }
};

struct TdoaObservation {
  AntennaId antenna;
  AntennaId reference;
  std::int64_t timestamp_index = 0;
  double value = 0.0;  // tau_antenna - tau_reference, seconds
  double bound = 0.0;  // |antenna - reference| / speed, seconds
};

struct TdoaSet {
  std::int64_t timestamp_index = 0;
  std::vector<TdoaObservation> observations;
  ReferencePolicy policy;
};

/// Differences ToAs against the policy's reference antenna(s). All ToAs
/// must share one timestamp. Throws Error{MissingReference} when a
/// contributing RU (per-RU) or the common reference lacks its ToA.
TdoaSet compute_tdoa(std::span<const ToaMeasurement> toas, const DeploymentGeometry& g, ReferencePolicy policy);

/// |x_a - x_ref| / propagation speed. Throws Error{SameAntenna}.
double tdoa_bound(AntennaId a, AntennaId ref, const DeploymentGeometry& g);

struct RejectedTdoa {
  TdoaObservation observation;
  double violated_bound = 0.0;  // bound + slack that |value| exceeded
  std::string reason;
};

struct TdoaFilterResult {
  TdoaSet retained;
  std::vector<RejectedTdoa> rejected;
};

/// Keeps observations with |value| <= bound + slack (inclusive).
TdoaFilterResult filter_tdoa(const TdoaSet& set, double slack_seconds = 0.0);

}  // namespace ultdoa
