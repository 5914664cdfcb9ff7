#include "ultdoa/toa.hpp"

#include <cmath>

#include "ultdoa/error.hpp"

namespace ultdoa {

ToaMeasurement estimate_toa(const CirFrame& frame) {
  if (frame.samples.empty()) throw Error(Errc::InvalidArgument, "empty CIR frame");
  std::size_t best = 0;
  double best_mag = -1.0;
  for (std::size_t n = 0; n < frame.samples.size(); ++n) {
    const double mag = std::abs(frame.samples[n]);
    if (mag > best_mag) {
      best_mag = mag;
      best = n;
    }
  }
  if (!(best_mag > 0.0)) throw Error(Errc::NoPeak, "CIR frame is all zero");
  ToaMeasurement m;
  m.antenna = frame.antenna;
  m.timestamp_index = frame.timestamp_index;
  m.peak_index = static_cast<int>(best);
  m.toa_seconds = frame.sample_period * static_cast<double>(best);
  m.peak_magnitude = best_mag;
  return m;
}

ToaMeasurement toa_from_delay(AntennaId antenna, std::int64_t t, double delay, int n_fft, double sample_period) {
  const double position = n_fft / 2 + delay / sample_period;
  ToaMeasurement m;
  m.antenna = antenna;
  m.timestamp_index = t;
  m.peak_index = static_cast<int>(std::lround(position));
  m.toa_seconds = sample_period * position;
  m.peak_magnitude = 1.0;
  return m;
}

namespace {

template <typename Range, typename Get>
PeakDelayStats two_pass(const Range& r, Get get) {
  if (r.size() < 2) throw Error(Errc::InsufficientData, "peak statistics need at least 2 measurements");
  double sum = 0.0;
  for (const auto& v : r) sum += get(v);
  const double mean = sum / static_cast<double>(r.size());
  double ss = 0.0;
  for (const auto& v : r) {
    const double d = get(v) - mean;
    ss += d * d;
  }
  return {mean, std::sqrt(ss / static_cast<double>(r.size())), r.size()};
}

}  // namespace

PeakDelayStats peak_delay_stats(std::span<const ToaMeasurement> measurements) {
  return two_pass(measurements, [](const ToaMeasurement& m) { return static_cast<double>(m.peak_index); });
}

PeakDelayStats peak_delay_stats(std::span<const int> peak_indices) {
  return two_pass(peak_indices, [](int v) { return static_cast<double>(v); });
}

ToaVerdict filter_toa(const ToaMeasurement& m, const PeakDelayStats& stats) {
  const double p = static_cast<double>(m.peak_index);
  return (p >= stats.mean - stats.std && p <= stats.mean + stats.std) ? ToaVerdict::Retain : ToaVerdict::Discard;
}

void ToaFilter::calibrate(std::span<const ToaMeasurement> measurements) {
  pooled_ = peak_delay_stats(measurements);
  per_antenna_.clear();
  if (mode_ != StatsMode::PerAntenna) return;
  std::map<AntennaId, std::vector<int>> groups;
  for (const auto& m : measurements) groups[m.antenna].push_back(m.peak_index);
  for (const auto& [id, peaks] : groups) {
    if (peaks.size() >= 2) per_antenna_[id] = peak_delay_stats(std::span<const int>(peaks));
  }
}

ToaVerdict ToaFilter::operator()(const ToaMeasurement& m) const {
  if (pooled_.count < 2) throw Error(Errc::InsufficientData, "ToA filter is not calibrated");
  if (mode_ == StatsMode::PerAntenna) {
    if (auto it = per_antenna_.find(m.antenna); it != per_antenna_.end()) return filter_toa(m, it->second);
  }
  return filter_toa(m, pooled_);
}

std::optional<PeakDelayStats> ToaFilter::stats_for(AntennaId id) const {
  if (mode_ == StatsMode::PerAntenna) {
    if (auto it = per_antenna_.find(id); it != per_antenna_.end()) return it->second;
  }
  if (pooled_.count >= 2) return pooled_;
  return std::nullopt;
}

RollingPeakStats::RollingPeakStats(std::size_t window) : capacity_(window) {
  if (window < 2) throw Error(Errc::InvalidArgument, "rolling window must hold at least 2 samples");
}

void RollingPeakStats::push(int peak_index) {
  window_.push_back(peak_index);
  if (window_.size() > capacity_) window_.pop_front();
}

PeakDelayStats RollingPeakStats::stats() const {
  if (!ready()) throw Error(Errc::InsufficientData, "rolling statistics need at least 2 samples");
  return two_pass(window_, [](int v) { return static_cast<double>(v); });
}

}  // namespace ultdoa
