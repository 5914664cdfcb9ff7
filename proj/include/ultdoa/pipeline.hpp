#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ultdoa/dataset.hpp"
#include "ultdoa/fingerprint.hpp"
#include "ultdoa/metrics.hpp"
#include "ultdoa/solver.hpp"
#include "ultdoa/tdoa.hpp"
#include "ultdoa/toa.hpp"

namespace ultdoa {

/// Where ToAs come from: CIR peak picking, or the simulator's continuous
/// direct-path delay stored in the dataset.
enum class ToaSource { Peak, Truth };

struct PipelineOptions {
  ToaSource toa_source = ToaSource::Peak;
  bool toa_filter = false;
  StatsMode stats_mode = StatsMode::Pooled;
  bool tdoa_filter = false;
  /// Additive slack on the TDoA bound; defaults to one sample period.
  std::optional<double> tdoa_slack;
  ReferencePolicy policy = ReferencePolicy::per_ru();
  PsoConfig pso;
  std::size_t smooth_window = 1;
};

struct TimestampResult {
  std::int64_t timestamp_index = 0;
  std::optional<PositionEstimate> estimate;
  std::optional<Position> smoothed;
  std::optional<Position> truth;
  std::optional<double> error;  // horizontal, smoothed vs truth
  std::size_t toas = 0;
  std::size_t toa_rejected = 0;
  std::size_t orphaned = 0;  // ToAs whose reference antenna had no ToA
  std::size_t tdoa_observations = 0;
  std::size_t tdoa_rejected = 0;
  std::string status = "ok";
};

struct PipelineResult {
  std::vector<TimestampResult> timestamps;
  std::size_t toa_total = 0;
  std::size_t toa_rejected = 0;
  std::size_t no_peak = 0;
  std::size_t tdoa_total = 0;
  std::size_t tdoa_rejected = 0;
  std::size_t unsolvable = 0;
  std::optional<PeakDelayStats> toa_stats;
  std::optional<ErrorReport> report;
};

/// ToA estimation, optional ToA filter, TDoA formation, optional bound
/// filter, PSO and moving-average smoothing, per timestamp. Timestamps with
/// fewer than three observations are reported as gaps; the smoother skips
/// them.
PipelineResult run_tdoa_pipeline(const Dataset& ds, const DeploymentGeometry& g, const PipelineOptions& options);

struct FingerprintOptions {
  std::size_t columns = 100;
  double gamma = 0.4;
  std::size_t k = 5;
};

struct FingerprintRun {
  NormalizationFactor alpha;
  std::vector<FingerprintSample> train;
  std::vector<FingerprintSample> test;
  std::vector<LosMask> test_masks;
  std::vector<Label2d> predictions;
  std::size_t all_masked = 0;
  std::optional<ErrorReport> report;
};

/// Aligned per-RU matrices for every complete timestamp of a dataset, keyed
/// by timestamp, with the truth label when present.
struct AlignedTimestamp {
  std::int64_t timestamp_index = 0;
  std::vector<CirMagnitudeMatrix> per_ru;
  std::optional<Label2d> label;
};
std::vector<AlignedTimestamp> align_dataset(const Dataset& ds);

/// Normalization from `train`, kNN fit on train, predictions for `test`.
FingerprintRun run_fingerprint(const Dataset& train, const Dataset& test, const FingerprintOptions& options);

}  // namespace ultdoa
