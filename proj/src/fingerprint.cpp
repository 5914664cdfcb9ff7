#include "ultdoa/fingerprint.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "ultdoa/error.hpp"

namespace ultdoa {

double CirMagnitudeMatrix::max() const noexcept {
  return values.empty() ? 0.0 : *std::max_element(values.begin(), values.end());
}

CirMagnitudeMatrix align_ru(std::span<const CirFrame> frames) {
  if (frames.empty()) throw Error(Errc::InvalidArgument, "align_ru needs at least one frame");
  const std::size_t n = frames.front().samples.size();
  std::vector<const CirFrame*> order;
  for (const auto& f : frames) {
    if (f.samples.size() != n) throw Error(Errc::ShapeMismatch, "frames of one RU differ in length");
    if (f.antenna.ru != frames.front().antenna.ru) throw Error(Errc::InvalidArgument, "frames span several RUs");
    order.push_back(&f);
  }
  std::sort(order.begin(), order.end(),
            [](const CirFrame* a, const CirFrame* b) { return a->antenna < b->antenna; });

  CirMagnitudeMatrix out;
  out.rows = order.size();
  out.cols = n;
  out.values.assign(out.rows * n, 0.0);

  std::vector<double> mag(n);
  std::vector<std::vector<double>> rows;
  int offset = std::numeric_limits<int>::max();
  for (const auto* f : order) {
    double best = -1.0;
    int peak = 0;
    for (std::size_t j = 0; j < n; ++j) {
      mag[j] = std::abs(f->samples[j]);
      if (mag[j] > best) {
        best = mag[j];
        peak = static_cast<int>(j);
      }
    }
    if (!(best > 0.0)) throw Error(Errc::NoPeak, "all-zero CIR in fingerprint alignment");
    offset = std::min(offset, peak);
    rows.push_back(mag);
    out.row_ids.push_back(f->antenna);
  }
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::copy(rows[r].begin() + offset, rows[r].end(), out.values.begin() + static_cast<std::ptrdiff_t>(r * n));
  }
  out.alignment_offsets = {offset};
  return out;
}

std::vector<CirMagnitudeMatrix> align_timestamp(std::span<const CirFrame> frames) {
  std::map<int, std::vector<CirFrame>> by_ru;
  for (const auto& f : frames) by_ru[f.antenna.ru].push_back(f);
  std::vector<CirMagnitudeMatrix> out;
  out.reserve(by_ru.size());
  for (const auto& [ru, group] : by_ru) out.push_back(align_ru(group));
  return out;
}

NormalizationFactor compute_norm_factor(std::span<const CirMagnitudeMatrix> training, std::string source) {
  if (training.empty()) throw Error(Errc::EmptyTrainingSet, "normalization needs training data");
  double alpha = 0.0;
  for (const auto& m : training) alpha = std::max(alpha, m.max());
  if (!(alpha > 0.0)) throw Error(Errc::ZeroMax, "training set maximum is zero");
  return {alpha, std::move(source)};
}

LosMask apply_mask(CirMagnitudeMatrix& m, double gamma) {
  LosMask mask;
  mask.threshold = gamma;
  mask.mask.assign(m.rows, 0);
  for (std::size_t r = 0; r < m.rows; ++r) {
    const auto row = m.row(r);
    const double peak = row.empty() ? 0.0 : *std::max_element(row.begin(), row.end());
    if (peak > gamma) {
      mask.mask[r] = 1;
    } else {
      std::fill_n(m.values.begin() + static_cast<std::ptrdiff_t>(r * m.cols), m.cols, 0.0);
    }
  }
  return mask;
}

FingerprintInput build_input(std::span<const CirMagnitudeMatrix> per_ru, const NormalizationFactor& alpha,
                             std::size_t columns, double gamma) {
  if (!(alpha.alpha_norm > 0.0)) throw Error(Errc::InvalidArgument, "normalization factor must be positive");
  if (columns == 0) throw Error(Errc::InvalidArgument, "column count must be positive");

  std::vector<const CirMagnitudeMatrix*> order;
  for (const auto& m : per_ru) {
    if (m.rows == 0) continue;
    if (columns > m.cols) throw Error(Errc::ShapeMismatch, "truncation wider than the CIR");
    order.push_back(&m);
  }
  std::sort(order.begin(), order.end(), [](const auto* a, const auto* b) { return a->row_ids.front() < b->row_ids.front(); });

  FingerprintInput out;
  auto& mat = out.matrix;
  mat.cols = columns;
  for (const auto* m : order) {
    for (std::size_t r = 0; r < m->rows; ++r) {
      const auto row = m->row(r);
      for (std::size_t c = 0; c < columns; ++c) mat.values.push_back(row[c] / alpha.alpha_norm);
      mat.row_ids.push_back(m->row_ids[r]);
    }
    mat.alignment_offsets.insert(mat.alignment_offsets.end(), m->alignment_offsets.begin(),
                                 m->alignment_offsets.end());
  }
  mat.rows = mat.row_ids.size();
  out.mask = apply_mask(mat, gamma);
  out.all_masked = std::none_of(out.mask.mask.begin(), out.mask.mask.end(), [](auto b) { return b != 0; });
  return out;
}

KnnModel::KnnModel(std::vector<FingerprintSample> samples, std::size_t k) : samples_(std::move(samples)), k_(k) {}

KnnModel knn_fit(std::vector<FingerprintSample> samples, std::size_t k) {
  if (samples.empty()) throw Error(Errc::EmptyModel, "kNN fit on no samples");
  if (k == 0 || samples.size() < k) throw Error(Errc::InvalidArgument, "kNN needs at least k samples");
  const auto rows = samples.front().input.rows;
  const auto cols = samples.front().input.cols;
  for (const auto& s : samples) {
    if (s.input.rows != rows || s.input.cols != cols) throw Error(Errc::ShapeMismatch, "kNN samples differ in shape");
  }
  return KnnModel(std::move(samples), k);
}

Label2d knn_predict(const KnnModel& model, const CirMagnitudeMatrix& input) {
  if (model.size() == 0) throw Error(Errc::EmptyModel, "kNN model is empty");
  const auto& ref = model.samples().front().input;
  if (input.rows != ref.rows || input.cols != ref.cols) throw Error(Errc::ShapeMismatch, "query shape differs from the model");

  std::vector<std::pair<double, std::size_t>> dist;
  dist.reserve(model.size());
  for (std::size_t i = 0; i < model.size(); ++i) {
    const auto& v = model.samples()[i].input.values;
    double d2 = 0.0;
    for (std::size_t j = 0; j < v.size(); ++j) {
      const double d = v[j] - input.values[j];
      d2 += d * d;
    }
    dist.emplace_back(d2, i);
  }
  const std::size_t k = std::min(model.k(), dist.size());
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());

  if (dist.front().first == 0.0) return model.samples()[dist.front().second].label;
  double wsum = 0.0;
  Label2d out;
  for (std::size_t i = 0; i < k; ++i) {
    const double w = 1.0 / std::sqrt(dist[i].first);
    const auto& label = model.samples()[dist[i].second].label;
    out.x += w * label.x;
    out.y += w * label.y;
    wsum += w;
  }
  out.x /= wsum;
  out.y /= wsum;
  return out;
}

}  // namespace ultdoa
