#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ultdoa/channel_sim.hpp"
#include "ultdoa/geometry.hpp"

namespace ultdoa {

/// Row-major real magnitude matrix. Rows are antennas in (ru, antenna) order.
struct CirMagnitudeMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;
  std::vector<AntennaId> row_ids;
  /// Per-RU left shift applied by align_ru, one entry per RU present.
  std::vector<int> alignment_offsets;

  double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  std::span<const double> row(std::size_t r) const { return {values.data() + r * cols, cols}; }
  double max() const noexcept;
};

struct NormalizationFactor {
  double alpha_norm = 1.0;
  std::string source;
};

struct LosMask {
  std::vector<std::uint8_t> mask;
  double threshold = 0.4;
};

struct Label2d {
  double x = 0.0;
  double y = 0.0;
};

struct FingerprintSample {
  CirMagnitudeMatrix input;
  Label2d label;
  std::int64_t timestamp_index = 0;
};

/// |h| of every frame of one RU at one timestamp, left-shifted by the
/// earliest peak index among the RU's antennas (tail zero-filled). Rows are
/// sorted by antenna index. Throws Error{NoPeak} on an all-zero frame.
CirMagnitudeMatrix align_ru(std::span<const CirFrame> frames);

/// Largest entry over all aligned training matrices. Throws
/// Error{EmptyTrainingSet} / Error{ZeroMax}.
NormalizationFactor compute_norm_factor(std::span<const CirMagnitudeMatrix> training, std::string source = {});

/// Zeroes rows whose maximum does not exceed `gamma`.
LosMask apply_mask(CirMagnitudeMatrix& m, double gamma);

struct FingerprintInput {
  CirMagnitudeMatrix matrix;  // M x C
  LosMask mask;
  bool all_masked = false;
};

/// Concatenates per-RU aligned matrices in (ru, antenna) order, keeps the
/// first `columns` columns, divides by alpha and masks rows whose
/// normalized peak is <= gamma. Values above 1 are passed through.
FingerprintInput build_input(std::span<const CirMagnitudeMatrix> per_ru, const NormalizationFactor& alpha,
                             std::size_t columns, double gamma);

/// Groups one timestamp's frames by RU and aligns each group.
std::vector<CirMagnitudeMatrix> align_timestamp(std::span<const CirFrame> frames);

class KnnModel {
 public:
  KnnModel() = default;
  KnnModel(std::vector<FingerprintSample> samples, std::size_t k);

  std::size_t k() const noexcept { return k_; }
  std::size_t size() const noexcept { return samples_.size(); }
  const std::vector<FingerprintSample>& samples() const noexcept { return samples_; }

 private:
  std::vector<FingerprintSample> samples_;
  std::size_t k_ = 5;
};

/// Throws Error{EmptyModel} for no samples and Error{InvalidArgument} for
/// fewer samples than k or mismatched shapes.
KnnModel knn_fit(std::vector<FingerprintSample> samples, std::size_t k = 5);

/// Inverse-distance-weighted mean label of the k nearest inputs (Euclidean
/// on flattened matrices). An exact match returns its label.
Label2d knn_predict(const KnnModel& model, const CirMagnitudeMatrix& input);

}  // namespace ultdoa
