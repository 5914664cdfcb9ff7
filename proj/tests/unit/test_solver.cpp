#include <cmath>
#include <random>

#include "check.hpp"
#include "scenes.hpp"
#include "ultdoa/solver.hpp"

using namespace ultdoa;

namespace {

PsoConfig hall_pso(std::uint64_t seed = 1) {
  PsoConfig cfg;
  cfg.bounds = scenes::test_area();
  cfg.fixed_z = scenes::kUeHeight;
  cfg.seed = seed;
  return cfg;
}

TdoaSet exact_set(const DeploymentGeometry& g, const Position& ue) {
  return compute_tdoa(scenes::exact_toas(g, ue), g, ReferencePolicy::per_ru());
}

}  // namespace

TEST_CASE("expected_tdoa examples") {
  const auto g = scenes::two_ru_hall();
  TdoaObservation o;
  o.antenna = {0, 2};    // (25, 0)
  o.reference = {0, 0};  // (0, 0)
  CHECK(std::abs(expected_tdoa({12.5, 7, 2.2}, o, g)) < 1e-20);
  const double sep = distance(g.antenna(o.antenna), g.antenna(o.reference)) / g.propagation_speed();
  CHECK(expected_tdoa(g.antenna(o.reference), o, g) == doctest::Approx(sep).epsilon(1e-14));
  CHECK(expected_tdoa(g.antenna(o.antenna), o, g) == doctest::Approx(-sep).epsilon(1e-14));
}

TEST_CASE("loss examples") {
  const auto g = scenes::two_ru_hall();
  const Position ue{17.3, 6.1, scenes::kUeHeight};
  const auto set = exact_set(g, ue);
  CHECK(loss(ue, set, g) <= 1e-24);
  CHECK(TdoaLoss(set, g)(ue) <= 1e-24);

  SUBCASE("single observation on its hyperbola") {
    TdoaSet one;
    one.observations = {set.observations[0]};
    CHECK(loss(ue, one, g) <= 1e-30);
  }
  SUBCASE("loss grows away from truth") {
    const double base = loss(ue, set, g);
    for (int k = 0; k < 16; ++k) {
      const double a = k * std::numbers::pi / 8;
      const Position p = ue + Position{std::cos(a), std::sin(a), 0.0};
      CHECK(loss(p, set, g) > base);
      CHECK(TdoaLoss(set, g)(p) == doctest::Approx(loss(p, set, g)).epsilon(1e-9));
    }
  }
  CHECK_ERRC(loss(ue, TdoaSet{}, g), Errc::EmptyObservations);
  CHECK_ERRC(TdoaLoss(TdoaSet{}, g), Errc::EmptyObservations);
}

TEST_CASE("pso_estimate examples") {
  const auto g = scenes::two_ru_hall();
  SUBCASE("single particle, no iterations") {
    const Position ue{20, 5, 1.5};
    const auto set = exact_set(g, ue);
    auto cfg = hall_pso(9);
    cfg.particles = 1;
    cfg.iterations = 0;
    const auto e = pso_estimate(set, g, cfg);
    Rng rng(mix64(9));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double x = 0.0 + 50.0 * unit(rng);
    const double y = 0.0 + 10.0 * unit(rng);
    CHECK(e.position == Position{x, y, 1.5});
    CHECK(e.loss == loss(e.position, set, g));
    CHECK_FALSE(e.converged);
  }
  SUBCASE("noise-free scenes converge to truth") {
    Rng rng(100);
    int good = 0;
    for (int s = 0; s < 100; ++s) {
      const auto ue = scenes::random_ue(rng);
      const auto e = pso_estimate(exact_set(g, ue), g, hall_pso(s));
      good += horizontal_distance(e.position, ue) <= 0.05;
    }
    CHECK(good >= 95);
  }
  SUBCASE("too few observations") {
    auto set = exact_set(g, {10, 5, 1.5});
    set.observations.resize(2);
    CHECK_ERRC(pso_estimate(set, g, hall_pso()), Errc::Unsolvable);
  }
  SUBCASE("non-finite measurement") {
    auto set = exact_set(g, {10, 5, 1.5});
    set.observations[0].value = NAN;
    CHECK_ERRC(pso_estimate(set, g, hall_pso()), Errc::NonFiniteLoss);
  }
  SUBCASE("invalid config") {
    const auto set = exact_set(g, {10, 5, 1.5});
    auto cfg = hall_pso();
    cfg.particles = 0;
    CHECK_ERRC(pso_estimate(set, g, cfg), Errc::InvalidArgument);
    cfg = hall_pso();
    cfg.inertia = 0.0;
    CHECK_ERRC(pso_estimate(set, g, cfg), Errc::InvalidArgument);
    cfg = hall_pso();
    cfg.bounds.hi.y = cfg.bounds.lo.y;
    CHECK_ERRC(pso_estimate(set, g, cfg), Errc::InvalidArgument);
  }
}

TEST_CASE("pso invariants") {
  const auto g = scenes::two_ru_hall();
  Rng rng(55);
  std::normal_distribution<double> noise(0.0, 3e-9);
  for (int s = 0; s < 30; ++s) {
    const auto ue = scenes::random_ue(rng);
    auto set = exact_set(g, ue);
    for (auto& o : set.observations) o.value += noise(rng);
    auto cfg = hall_pso(s);
    cfg.particles = 40;
    cfg.iterations = 60;
    std::vector<double> history;
    const auto a = pso_estimate(set, g, cfg, &history);
    REQUIRE(history.size() == 61);
    for (std::size_t i = 1; i < history.size(); ++i) CHECK(history[i] <= history[i - 1]);
    CHECK(history.back() == a.loss);
    CHECK(cfg.bounds.contains_xy(a.position));
    CHECK(a.position.z == cfg.fixed_z);
    CHECK(a.loss >= 0.0);
    CHECK(a.n_observations_used == 6);

    const auto b = pso_estimate(set, g, cfg);
    CHECK(a.position == b.position);
    CHECK(a.loss == b.loss);
  }
}

TEST_CASE("pso stays inside tight bounds") {
  const auto g = scenes::two_ru_hall();
  // Truth outside the search box: the estimate is clamped to the box edge.
  const auto set = exact_set(g, {45, 5, 1.5});
  auto cfg = hall_pso(3);
  cfg.bounds = {{0, 0, 0}, {20, 10, 3}};
  const auto e = pso_estimate(set, g, cfg);
  CHECK(cfg.bounds.contains_xy(e.position));
  CHECK(e.position.x == doctest::Approx(20.0).epsilon(1e-3));
}

TEST_CASE("grid_oracle examples") {
  const auto g = scenes::two_ru_hall();
  SUBCASE("minimum on a node") {
    const Position ue{12.5, 4.0, 1.5};
    const auto o = grid_oracle(exact_set(g, ue), g, scenes::test_area(), 1.5, 0.5);
    CHECK(o.position.x == 12.5);
    CHECK(o.position.y == 4.0);
  }
  SUBCASE("resolution larger than the box") {
    const auto o = grid_oracle(exact_set(g, {12, 4, 1.5}), g, scenes::test_area(), 1.5, 100.0);
    CHECK(o.position == Position{0, 0, 1.5});
  }
  SUBCASE("ties go to the smallest x then y") {
    RadioUnit ru{{{0, 0, 0}, {2, 0, 0}, {0, 2, 0}, {2, 2, 0}}, 0};
    const DeploymentGeometry sym({ru});
    TdoaSet set;
    TdoaObservation o;
    o.antenna = {0, 1};
    o.reference = {0, 0};
    o.value = 0.0;  // every point on x = 1 has zero loss
    set.observations = {o};
    const auto r = grid_oracle(set, sym, {{0, 0, 0}, {2, 2, 0}}, 0.0, 0.5);
    CHECK(r.position == Position{1.0, 0.0, 0.0});
    CHECK(r.loss == 0.0);
  }
  SUBCASE("noise-free oracle beats the nearest node") {
    // The grid argmin never has a larger loss than the node closest to the
    // truth (up to rounding in how the two evaluate node coordinates).
    Rng rng(4);
    for (int i = 0; i < 10; ++i) {
      const auto ue = scenes::random_ue(rng);
      const auto set = exact_set(g, ue);
      const double res = 0.05;
      const auto o = grid_oracle(set, g, scenes::test_area(), 1.5, res);
      const Position nearest{std::round(ue.x / res) * res, std::round(ue.y / res) * res, 1.5};
      CHECK(o.loss <= loss(nearest, set, g) * (1 + 1e-9));
    }
    RadioUnit ru{{{0, 0, 2}, {10, 0, 2}, {0, 10, 2}, {10, 10, 2}}, 0};
    const DeploymentGeometry square({ru});
    const Position centre{5.0, 5.0, 1.5};
    // Truth on a node: the argmin is that node.
    const auto o = grid_oracle(exact_set(square, centre), square, {{0, 0, 0}, {10, 10, 3}}, 1.5, 0.05);
    CHECK(horizontal_distance(o.position, centre) < 1e-9);
    CHECK(o.loss < 1e-30);
  }
  CHECK_ERRC(grid_oracle(TdoaSet{}, g, scenes::test_area(), 1.5, 0.1), Errc::EmptyObservations);
  CHECK_ERRC(grid_oracle(exact_set(g, {1, 1, 1.5}), g, scenes::test_area(), 1.5, 0.0), Errc::InvalidArgument);
}

TEST_CASE("smoother examples") {
  SmootherState one(1);
  Rng rng(1);
  std::uniform_real_distribution<double> u(-5, 5);
  for (int i = 0; i < 20; ++i) {
    const Position p{u(rng), u(rng), 1.5};
    CHECK(one.push(p) == p);
  }
  SmootherState three(3);
  three.push({0, 0, 0});
  three.push({3, 0, 0});
  CHECK(three.push({6, 0, 0}) == Position{3, 0, 0});
  CHECK(three.size() == 3);
  CHECK(three.push({9, 0, 0}) == Position{6, 0, 0});
  CHECK(three.size() == 3);

  SmootherState constant(4);
  for (int i = 0; i < 10; ++i) CHECK(constant.push({2.5, -1.0, 1.5}) == Position{2.5, -1.0, 1.5});

  SmootherState via(2);
  PositionEstimate e;
  e.position = {1, 1, 0};
  CHECK(smooth(via, e) == Position{1, 1, 0});
  CHECK_ERRC(SmootherState(0), Errc::InvalidArgument);
}
