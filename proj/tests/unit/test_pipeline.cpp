#include <cmath>

#include "check.hpp"
#include "scenes.hpp"
#include "ultdoa/pipeline.hpp"

using namespace ultdoa;

namespace {

PipelineOptions hall_options() {
  PipelineOptions o;
  o.pso.bounds = scenes::test_area();
  o.pso.fixed_z = scenes::kUeHeight;
  o.pso.particles = 100;
  o.pso.iterations = 60;
  return o;
}

std::vector<Position> line(int n) {
  std::vector<Position> pts;
  for (int i = 0; i < n; ++i) pts.push_back({3.0 + 2.0 * i, 4.0 + 0.1 * i, scenes::kUeHeight});
  return pts;
}

}  // namespace

TEST_CASE("pipeline on a noise-free fractional scene") {
  const auto g = scenes::two_ru_hall();
  ScenarioConfig cfg(g);
  cfg.mode = DelayMode::Fractional;
  const auto ds = scenes::simulate_dataset(cfg, line(12));
  auto opts = hall_options();
  opts.toa_source = ToaSource::Truth;
  const auto r = run_tdoa_pipeline(ds, g, opts);
  REQUIRE(r.report.has_value());
  CHECK(r.report->mae <= 0.05);
  CHECK(r.timestamps.size() == 12);
  CHECK(r.toa_total == 96);
  CHECK(r.tdoa_total == 72);
  CHECK(r.unsolvable == 0);

  SUBCASE("window 1 equals the raw estimate") {
    for (const auto& t : r.timestamps) CHECK(*t.smoothed == t.estimate->position);
  }
  SUBCASE("peak ToAs stay within sample quantization") {
    opts.toa_source = ToaSource::Peak;
    const auto q = run_tdoa_pipeline(ds, g, opts);
    CHECK(q.report->mae <= 2.5);
  }
  SUBCASE("missing truth delays") {
    auto stripped = ds;
    for (auto& rec : stripped.records) rec.true_delay.reset();
    CHECK_ERRC(run_tdoa_pipeline(stripped, g, opts), Errc::InvalidArgument);
  }
}

TEST_CASE("pipeline smoothing and gaps") {
  const auto g = scenes::two_ru_hall();
  ScenarioConfig cfg(g);
  auto ds = scenes::simulate_dataset(cfg, line(6));
  // Blank every RU-1 frame and two RU-0 frames at t = 2: one observation left.
  for (auto& rec : ds.records) {
    if (rec.timestamp_index == 2 && (rec.antenna.ru == 1 || rec.antenna.antenna >= 2)) {
      std::fill(rec.cir.begin(), rec.cir.end(), Complex{});
    }
  }
  auto opts = hall_options();
  opts.smooth_window = 2;
  const auto r = run_tdoa_pipeline(ds, g, opts);
  CHECK(r.no_peak == 6);
  CHECK(r.unsolvable == 1);
  REQUIRE(r.timestamps.size() == 6);
  const auto& gap = r.timestamps[2];
  CHECK_FALSE(gap.estimate.has_value());
  CHECK_FALSE(gap.smoothed.has_value());
  CHECK(gap.status.find("unsolvable") == 0);
  // The smoother skips the gap: t = 3 averages t = 1 and t = 3.
  const auto expect = (r.timestamps[1].estimate->position + r.timestamps[3].estimate->position) * 0.5;
  CHECK(distance(*r.timestamps[3].smoothed, expect) < 1e-12);
  CHECK(r.report->errors.size() == 5);
}

TEST_CASE("pipeline filters report their rejections") {
  const auto g = scenes::two_ru_hall();
  ScenarioConfig cfg(g);
  cfg.outlier_probability = 0.15;
  cfg.outlier_offset_min = 200 * cfg.sample_period;
  cfg.outlier_offset_max = 300 * cfg.sample_period;
  cfg.seed = 21;
  const auto ds = scenes::simulate_dataset(cfg, line(20));
  auto opts = hall_options();
  opts.toa_filter = true;
  opts.tdoa_filter = true;
  const auto r = run_tdoa_pipeline(ds, g, opts);
  CHECK(r.toa_rejected > 0);
  REQUIRE(r.toa_stats.has_value());
  std::size_t per_t = 0, orphaned = 0;
  for (const auto& t : r.timestamps) {
    per_t += t.toa_rejected;
    orphaned += t.orphaned;
  }
  CHECK(per_t == r.toa_rejected);
  CHECK(r.tdoa_total + r.toa_rejected + orphaned + 2 * r.timestamps.size() >= r.toa_total);

  opts.toa_filter = false;
  const auto unfiltered = run_tdoa_pipeline(ds, g, opts);
  CHECK(unfiltered.tdoa_rejected > 0);
  CHECK(unfiltered.toa_rejected == 0);
}

TEST_CASE("per-RU references survive a cross-RU offset") {
  const auto g = scenes::two_ru_hall();
  ScenarioConfig cfg(g);
  cfg.ru_clock_offsets = {0.0, 40e-9};
  cfg.mode = DelayMode::Fractional;
  const auto ds = scenes::simulate_dataset(cfg, line(8));
  auto opts = hall_options();
  opts.toa_source = ToaSource::Truth;
  const auto per = run_tdoa_pipeline(ds, g, opts);
  opts.policy = ReferencePolicy::common({0, 0});
  const auto common = run_tdoa_pipeline(ds, g, opts);
  CHECK(per.report->mae < 0.05);
  CHECK(per.report->mae < common.report->mae);
}

TEST_CASE("fingerprint run on identical train and test") {
  const auto g = scenes::two_ru_hall();
  ScenarioConfig cfg(g);
  cfg.mode = DelayMode::Fractional;
  std::vector<Position> grid;
  for (int x = 0; x <= 50; x += 5) {
    for (int y = 0; y <= 10; y += 5) grid.push_back({double(x), double(y), 1.5});
  }
  const auto ds = scenes::simulate_dataset(cfg, grid);
  const auto run = run_fingerprint(ds, ds, {});
  REQUIRE(run.report.has_value());
  CHECK(run.report->mae == 0.0);
  CHECK(run.train.size() == grid.size());
  CHECK(run.train.front().input.rows == 8);
  CHECK(run.train.front().input.cols == 100);

  FingerprintOptions all_masked;
  all_masked.gamma = 1.1;
  const auto masked = run_fingerprint(ds, ds, all_masked);
  CHECK(masked.all_masked == grid.size());

  const auto aligned = align_dataset(ds);
  CHECK(aligned.size() == grid.size());
  CHECK(aligned.front().per_ru.size() == 2);
  CHECK(aligned.front().label.has_value());
}
