#include <cmath>
#include <numeric>

#include "check.hpp"
#include "scenes.hpp"
#include "ultdoa/channel_sim.hpp"
#include "ultdoa/toa.hpp"

using namespace ultdoa;

namespace {

constexpr double kTs = 1.0 / 122.88e6;

ScenarioConfig quiet(const DeploymentGeometry& g) {
  ScenarioConfig cfg(g);
  cfg.seed = 5;
  return cfg;
}

int argmax(const std::vector<Complex>& v) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(v.size()); ++i) {
    if (std::abs(v[i]) > std::abs(v[best])) best = i;
  }
  return best;
}

}  // namespace

TEST_CASE("synth_cir examples") {
  const auto g = scenes::two_ru_hall();
  Rng rng(1);

  SUBCASE("co-located UE peaks at the window center") {
    const Scenario s(quiet(g));
    const auto f = synth_cir(s, g.antenna({0, 0}), {0, 0}, 0, rng);
    CHECK(f.frame.n_fft() == 4096);
    CHECK(argmax(f.frame.samples) == 2048);
    int nonzero = 0;
    for (const auto& c : f.frame.samples) nonzero += std::abs(c) > 0.0;
    CHECK(nonzero == 1);
  }
  SUBCASE("3 m away lands one sample later") {
    const Scenario s(quiet(g));
    const Position ue = g.antenna({0, 0}) + Position{3, 0, 0};
    CHECK(argmax(synth_cir(s, ue, {0, 0}, 0, rng).frame.samples) == 2049);
  }
  SUBCASE("forced outlier") {
    auto cfg = quiet(g);
    cfg.outlier_probability = 1.0;
    cfg.outlier_offset_min = cfg.outlier_offset_max = 500 * kTs;
    const Scenario s(cfg);
    const auto f = synth_cir(s, g.antenna({0, 0}), {0, 0}, 0, rng);
    CHECK(argmax(f.frame.samples) == 2548);
    CHECK(f.truth.outlier);
  }
  SUBCASE("delay outside the window") {
    auto cfg = quiet(g);
    cfg.ru_clock_offsets = {3000 * kTs};
    const Scenario s(cfg);
    CHECK_ERRC(synth_cir(s, g.antenna({0, 0}), {0, 0}, 0, rng), Errc::DelayOutOfWindow);
  }
}

TEST_CASE("scenario validation") {
  const auto g = scenes::two_ru_hall();
  auto bad = [&](auto mutate) {
    auto cfg = quiet(g);
    mutate(cfg);
    CHECK_ERRC(Scenario{cfg}, Errc::InvalidArgument);
  };
  bad([](ScenarioConfig& c) { c.n_fft = 1000; });
  bad([](ScenarioConfig& c) { c.outlier_probability = 1.5; });
  bad([](ScenarioConfig& c) { c.frame_jitter_std = -1.0; });
  bad([](ScenarioConfig& c) { c.sample_period = 0.0; });
  bad([](ScenarioConfig& c) { c.ru_clock_offsets = {0, 0, 0}; });
  bad([](ScenarioConfig& c) { c.nlos.push_back({scenes::test_area(), {{4, 0}}, 0.1, 0.0}); });
}

TEST_CASE("sample-grid peaks follow range exactly") {
  const auto g = scenes::two_ru_hall();
  const Scenario s(quiet(g));
  Rng rng(2);
  for (int i = 0; i < 300; ++i) {
    const auto ue = scenes::random_ue(rng, 0.0);
    for (const auto& id : g.antenna_ids()) {
      const auto f = synth_cir(s, ue, id, i, rng);
      const double range = distance(ue, g.antenna(id));
      const int expected = 2048 + static_cast<int>(std::llround(range / (g.propagation_speed() * kTs)));
      REQUIRE(argmax(f.frame.samples) == expected);
      const double energy = std::norm(f.frame.samples[expected]);
      CHECK(std::abs(energy - 1.0) <= 1e-9);
    }
  }
}

TEST_CASE("fractional mode places a band-limited kernel") {
  const auto g = scenes::two_ru_hall();
  auto cfg = quiet(g);
  cfg.mode = DelayMode::Fractional;
  const Scenario s(cfg);
  Rng rng(3);
  const Position ue{12.3, 4.56, 1.5};
  const auto f = synth_cir(s, ue, {0, 1}, 0, rng);
  const double pos = 2048 + distance(ue, g.antenna({0, 1})) / (g.propagation_speed() * kTs);
  const int peak = argmax(f.frame.samples);
  CHECK(std::abs(peak - pos) <= 0.5 + 1e-9);
  // Parseval: the periodic kernel carries unit energy (gain 1 over N samples).
  double energy = 0.0;
  for (const auto& c : f.frame.samples) energy += std::norm(c);
  CHECK(std::abs(energy - 1.0) < 1e-9);
  CHECK(std::abs(f.truth.direct_delay - (pos - 2048) * kTs) < 1e-18);

  // An integer delay collapses to a single sample.
  MultipathProfile p{{{7 * kTs, Complex(0.5, 0.0), true}}};
  const auto h = render_cir(p, 64, kTs, DelayMode::Fractional);
  for (int i = 0; i < 64; ++i) CHECK(std::abs(h[i] - (i == 39 ? Complex(0.5, 0.0) : Complex{})) < 1e-12);
}

TEST_CASE("clock offsets shift a whole RU") {
  const auto g = scenes::two_ru_hall();
  auto base = quiet(g);
  auto shifted = base;
  shifted.ru_clock_offsets = {0.0, 40e-9};
  const Scenario a(base), b(shifted);
  Rng rng(4);
  for (int i = 0; i < 50; ++i) {
    const auto ue = scenes::random_ue(rng);
    Rng r1(i), r2(i);
    std::vector<int> pa, pb;
    for (int m = 0; m < 4; ++m) {
      pa.push_back(argmax(synth_cir(a, ue, {1, m}, i, r1).frame.samples));
      pb.push_back(argmax(synth_cir(b, ue, {1, m}, i, r2).frame.samples));
    }
    const double shift = 40e-9 / kTs;
    for (int m = 1; m < 4; ++m) {
      // Intra-RU differences move by at most the rounding of the common shift.
      CHECK(std::abs((pb[m] - pb[0]) - (pa[m] - pa[0])) <= 1);
    }
    CHECK(std::abs((pb[0] - pa[0]) - shift) <= 1.0);
  }
  // With a continuous delay the intra-RU difference is unaffected exactly.
  auto frac = shifted;
  frac.mode = DelayMode::Fractional;
  const Scenario c(frac);
  Rng r(9);
  const Position ue{20, 3, 1.5};
  const auto f0 = synth_cir(c, ue, {1, 0}, 0, r).truth;
  const auto f1 = synth_cir(c, ue, {1, 2}, 0, r).truth;
  CHECK(f0.clock_offset == 40e-9);
  CHECK(std::abs((f1.direct_delay - f0.direct_delay) - (f1.geometric_delay - f0.geometric_delay)) < 1e-20);
}

TEST_CASE("simulate cardinality and determinism") {
  const auto g = scenes::two_ru_hall();
  auto cfg = quiet(g);
  cfg.frame_jitter_std = 5e-9;
  cfg.noise_floor = 1e-3;
  cfg.multipath = {{20e-9, 0.5, 0.3}};
  cfg.outlier_probability = 0.2;
  cfg.outlier_offset_min = 10 * kTs;
  cfg.outlier_offset_max = 50 * kTs;
  const Scenario s(cfg);
  const auto traj = make_trajectory({{2, 2, 1.5}, {11, 2, 1.5}}, 1.0);
  REQUIRE(traj.size() == 10);
  const auto a = simulate(s, traj, 1);
  const auto b = simulate(s, traj, 1);
  const auto c = simulate(s, traj, 4);
  CHECK(a.size() == 80);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].frame.samples == b[i].frame.samples);
    CHECK(a[i].frame.samples == c[i].frame.samples);
    CHECK(a[i].frame.antenna == c[i].frame.antenna);
  }
  CHECK(a[0].frame.timestamp_index == 0);
  CHECK(a[8].frame.timestamp_index == 1);
  CHECK(a[9].frame.antenna == AntennaId{0, 1});
}

TEST_CASE("per-frame jitter magnitude") {
  const auto g = scenes::two_ru_hall();
  auto cfg = quiet(g);
  cfg.frame_jitter_std = 40e-9;
  const Scenario s(cfg);
  const Position ue{25, 5, 1.5};
  std::vector<double> deviation;
  Trajectory traj;
  for (int t = 0; t < 200; ++t) traj.push_back({t, ue});
  for (const auto& f : simulate(s, traj)) {
    const int expected = 2048 + static_cast<int>(std::llround(f.truth.geometric_delay / kTs));
    deviation.push_back(argmax(f.frame.samples) - expected);
  }
  REQUIRE(deviation.size() >= 1000);
  const double mean = std::accumulate(deviation.begin(), deviation.end(), 0.0) / deviation.size();
  double var = 0.0;
  for (double d : deviation) var += (d - mean) * (d - mean);
  const double std_samples = std::sqrt(var / deviation.size());
  const double target = 40e-9 / kTs;
  CHECK(std::abs(std_samples - target) <= 0.2 * target);
}

TEST_CASE("NLoS rule attenuates and delays the direct tap") {
  const auto g = scenes::two_ru_hall();
  auto cfg = quiet(g);
  cfg.nlos.push_back({{{20, 0, 0}, {30, 10, 3}}, {{0, 1}}, 0.1, 30e-9});
  const Scenario s(cfg);
  Rng rng(6);
  const auto in = synth_cir(s, {25, 5, 1.5}, {0, 1}, 0, rng);
  const auto other = synth_cir(s, {25, 5, 1.5}, {0, 2}, 0, rng);
  const auto out = synth_cir(s, {5, 5, 1.5}, {0, 1}, 0, rng);
  CHECK_FALSE(in.truth.los);
  CHECK(other.truth.los);
  CHECK(out.truth.los);
  CHECK(std::abs(in.frame.samples[argmax(in.frame.samples)]) == doctest::Approx(0.1));
  CHECK(in.truth.direct_delay == doctest::Approx(in.truth.geometric_delay + 30e-9));
}

TEST_CASE("make_trajectory examples") {
  const auto single = make_trajectory({{1, 2, 1.5}}, 0.5);
  REQUIRE(single.size() == 1);
  CHECK(single[0].position == Position{1, 2, 1.5});

  const auto line = make_trajectory({{0, 0, 1.5}, {10, 0, 1.5}}, 1.0, 7);
  REQUIRE(line.size() == 11);
  for (std::size_t i = 0; i < line.size(); ++i) {
    CHECK(line[i].timestamp_index == 7 + static_cast<std::int64_t>(i));
    CHECK(line[i].position.x == doctest::Approx(static_cast<double>(i)));
  }

  const auto loop = make_trajectory({{0, 0, 1.5}, {4, 0, 1.5}, {4, 3, 1.5}, {0, 3, 1.5}, {0, 0, 1.5}}, 0.7);
  CHECK(loop.front().position == loop.back().position);

  CHECK_ERRC(make_trajectory({}, 1.0), Errc::InvalidArgument);
  CHECK_ERRC(make_trajectory({{0, 0, 0}}, 0.0), Errc::InvalidArgument);
}
