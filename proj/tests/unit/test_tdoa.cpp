#include <cmath>
#include <random>

#include "check.hpp"
#include "scenes.hpp"
#include "ultdoa/solver.hpp"
#include "ultdoa/tdoa.hpp"

using namespace ultdoa;

namespace {

constexpr double kTs = 1.0 / 122.88e6;

DeploymentGeometry two_by_two() {
  RadioUnit a{{{0, 0, 2}, {3, 0, 2}}, 0};
  RadioUnit b{{{10, 0, 2}, {10, 4, 2}}, 0};
  return DeploymentGeometry({a, b});
}

ToaMeasurement toa(AntennaId id, double seconds, std::int64_t t = 0) {
  ToaMeasurement m;
  m.antenna = id;
  m.timestamp_index = t;
  m.toa_seconds = seconds;
  m.peak_index = static_cast<int>(std::lround(seconds / kTs));
  return m;
}

TdoaObservation obs(double value, double bound) {
  TdoaObservation o;
  o.antenna = {0, 1};
  o.value = value;
  o.bound = bound;
  return o;
}

}  // namespace

TEST_CASE("compute_tdoa examples") {
  const auto g = two_by_two();
  const std::vector<ToaMeasurement> toas{toa({0, 0}, 1e-5), toa({0, 1}, 1.2e-5), toa({1, 0}, 2e-5),
                                         toa({1, 1}, 2.1e-5)};
  const auto per = compute_tdoa(toas, g, ReferencePolicy::per_ru());
  REQUIRE(per.observations.size() == 2);
  CHECK(per.observations[0].antenna == AntennaId{0, 1});
  CHECK(per.observations[0].reference == AntennaId{0, 0});
  CHECK(per.observations[0].value == doctest::Approx(0.2e-5));
  CHECK(per.observations[1].reference == AntennaId{1, 0});
  CHECK(per.observations[1].bound == doctest::Approx(4.0 / 3e8));

  const auto common = compute_tdoa(toas, g, ReferencePolicy::common({0, 0}));
  REQUIRE(common.observations.size() == 3);
  for (const auto& o : common.observations) CHECK(o.reference == AntennaId{0, 0});

  SUBCASE("constant RU offset cancels under per-RU references") {
    auto shifted = toas;
    shifted[2].toa_seconds += 40e-9;
    shifted[3].toa_seconds += 40e-9;
    const auto again = compute_tdoa(shifted, g, ReferencePolicy::per_ru());
    REQUIRE(again.observations.size() == 2);
    CHECK(again.observations[0].value == per.observations[0].value);
    CHECK(again.observations[1].value == doctest::Approx(per.observations[1].value).epsilon(1e-9));
  }
  SUBCASE("errors") {
    const std::vector<ToaMeasurement> no_ref{toa({0, 1}, 1e-5), toa({1, 0}, 1e-5), toa({1, 1}, 1e-5)};
    CHECK_ERRC(compute_tdoa(no_ref, g, ReferencePolicy::per_ru()), Errc::MissingReference);
    CHECK_ERRC(compute_tdoa(no_ref, g, ReferencePolicy::common({0, 0})), Errc::MissingReference);
    const std::vector<ToaMeasurement> mixed{toa({0, 0}, 1e-5, 0), toa({0, 1}, 1e-5, 1)};
    CHECK_ERRC(compute_tdoa(mixed, g, ReferencePolicy::per_ru()), Errc::InvalidArgument);
    const std::vector<ToaMeasurement> dup{toa({0, 0}, 1e-5), toa({0, 0}, 1e-5)};
    CHECK_ERRC(compute_tdoa(dup, g, ReferencePolicy::per_ru()), Errc::InvalidArgument);
  }
  SUBCASE("an RU without observations needs no reference") {
    const std::vector<ToaMeasurement> partial{toa({0, 0}, 1e-5), toa({0, 1}, 1.1e-5)};
    CHECK(compute_tdoa(partial, g, ReferencePolicy::per_ru()).observations.size() == 1);
  }
}

TEST_CASE("tdoa policy properties") {
  const auto g = scenes::two_ru_hall();
  Rng rng(30);
  std::uniform_real_distribution<double> offset(-1e-7, 1e-7);
  for (int i = 0; i < 200; ++i) {
    const auto ue = scenes::random_ue(rng);
    const auto toas = scenes::exact_toas(g, ue);
    const auto per = compute_tdoa(toas, g, ReferencePolicy::per_ru());
    const auto com = compute_tdoa(toas, g, ReferencePolicy::common({0, 0}));
    CHECK(per.observations.size() == 6);
    CHECK(com.observations.size() == 7);
    for (const auto& o : per.observations) CHECK(o.antenna.ru == o.reference.ru);

    const double delta = offset(rng);
    auto shifted = toas;
    for (auto& m : shifted) {
      if (m.antenna.ru == 1) m.toa_seconds += delta;
    }
    const auto per2 = compute_tdoa(shifted, g, ReferencePolicy::per_ru());
    const auto com2 = compute_tdoa(shifted, g, ReferencePolicy::common({0, 0}));
    for (std::size_t k = 0; k < per.observations.size(); ++k) {
      if (per.observations[k].antenna.ru == 0) {
        CHECK(per2.observations[k].value == per.observations[k].value);
      } else {
        CHECK(std::abs(per2.observations[k].value - per.observations[k].value) <= 1e-20);
      }
    }
    for (std::size_t k = 0; k < com.observations.size(); ++k) {
      const double expected = com.observations[k].antenna.ru == 1 ? delta : 0.0;
      CHECK(std::abs((com2.observations[k].value - com.observations[k].value) - expected) <= 1e-19);
    }
  }
}

TEST_CASE("per-RU observations are bit-identical under an RU shift") {
  // Exactly representable ToAs make the cancellation exact.
  const auto g = two_by_two();
  for (double delta : {0.5, 0.25, 1.0 / 64}) {
    const std::vector<ToaMeasurement> a{toa({0, 0}, 1.0), toa({0, 1}, 1.5), toa({1, 0}, 2.0), toa({1, 1}, 2.75)};
    auto b = a;
    b[2].toa_seconds += delta;
    b[3].toa_seconds += delta;
    const auto x = compute_tdoa(a, g, ReferencePolicy::per_ru());
    const auto y = compute_tdoa(b, g, ReferencePolicy::per_ru());
    for (std::size_t k = 0; k < x.observations.size(); ++k) CHECK(x.observations[k].value == y.observations[k].value);
  }
}

TEST_CASE("tdoa_bound examples") {
  RadioUnit ru{{{0, 0, 0}, {3, 0, 0}, {0, 0, 0}}, 0};
  const DeploymentGeometry g({ru}, 3e8);
  CHECK(tdoa_bound({0, 1}, {0, 0}, g) == doctest::Approx(1.0e-8));
  CHECK(tdoa_bound({0, 2}, {0, 0}, g) == 0.0);
  CHECK_ERRC(tdoa_bound({0, 0}, {0, 0}, g), Errc::SameAntenna);

  // UE at the reference antenna measures exactly +bound.
  const auto hall = scenes::two_ru_hall();
  const auto ue = hall.antenna({1, 0});
  const auto set = compute_tdoa(scenes::exact_toas(hall, ue), hall, ReferencePolicy::per_ru());
  for (const auto& o : set.observations) {
    if (o.antenna.ru != 1) continue;
    CHECK(o.value == doctest::Approx(o.bound).epsilon(1e-12));
    CHECK(o.value == doctest::Approx(distance(hall.antenna(o.antenna), ue) / 3e8).epsilon(1e-12));
  }
}

TEST_CASE("filter_tdoa examples") {
  TdoaSet set;
  set.observations = {obs(8e-9, 10e-9), obs(-12e-9, 10e-9), obs(10e-9, 10e-9), obs(-10e-9, 10e-9)};
  const auto r = filter_tdoa(set);
  REQUIRE(r.retained.observations.size() == 3);
  REQUIRE(r.rejected.size() == 1);
  CHECK(r.rejected[0].observation.value == -12e-9);
  CHECK(r.rejected[0].violated_bound == 10e-9);
  CHECK_FALSE(r.rejected[0].reason.empty());

  const auto slack = filter_tdoa(set, 2e-9);
  CHECK(slack.rejected.empty());
  CHECK(slack.retained.observations.size() == 4);
}

TEST_CASE("noise-free fractional TDoAs respect the bound") {
  const auto g = scenes::two_ru_hall();
  const auto area = scenes::test_area();
  for (double x = area.lo.x; x <= area.hi.x; x += 0.5) {
    for (double y = area.lo.y; y <= area.hi.y; y += 0.5) {
      const Position ue{x, y, scenes::kUeHeight};
      if (!inside_convex_hull_xy(g, ue)) continue;
      const auto set = compute_tdoa(scenes::exact_toas(g, ue), g, ReferencePolicy::per_ru());
      for (const auto& o : set.observations) REQUIRE(std::abs(o.value) <= o.bound + 1e-12);
    }
  }
}
