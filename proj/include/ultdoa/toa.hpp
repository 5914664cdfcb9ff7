#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "ultdoa/channel_sim.hpp"
#include "ultdoa/geometry.hpp"

namespace ultdoa {

/// Strongest-path timing at one antenna. For ToAs estimated from a CIR,
/// toa_seconds == sample_period * peak_index exactly. ToAs built from
/// simulator truth (toa_from_delay) carry the continuous delay instead.
struct ToaMeasurement {
  AntennaId antenna;
  std::int64_t timestamp_index = 0;
  int peak_index = 0;
  double toa_seconds = 0.0;
  double peak_magnitude = 0.0;
};

struct PeakDelayStats {
  double mean = 0.0;  // samples
  double std = 0.0;   // samples, population
  std::size_t count = 0;
};

enum class ToaVerdict { Retain, Discard };

/// argmax |h[n]|, ties toward the lowest index. Throws Error{NoPeak} for an
/// all-zero frame.
ToaMeasurement estimate_toa(const CirFrame& frame);

/// Continuous-delay measurement (window-relative `delay` seconds from the
/// fft-shifted center), used to feed the solver exact timings.
ToaMeasurement toa_from_delay(AntennaId antenna, std::int64_t t, double delay, int n_fft, double sample_period);

/// Throws Error{InsufficientData} for fewer than two measurements.
PeakDelayStats peak_delay_stats(std::span<const ToaMeasurement> measurements);
PeakDelayStats peak_delay_stats(std::span<const int> peak_indices);

/// Retain iff mean - std <= peak <= mean + std.
ToaVerdict filter_toa(const ToaMeasurement& m, const PeakDelayStats& stats);

enum class StatsMode { Pooled, PerAntenna };

/// Batch ToA filter: calibrates on a measurement set, then judges
/// individual measurements.
class ToaFilter {
 public:
  explicit ToaFilter(StatsMode mode = StatsMode::Pooled) : mode_(mode) {}

  void calibrate(std::span<const ToaMeasurement> measurements);
  ToaVerdict operator()(const ToaMeasurement& m) const;

  StatsMode mode() const noexcept { return mode_; }
  const PeakDelayStats& pooled() const noexcept { return pooled_; }
  std::optional<PeakDelayStats> stats_for(AntennaId id) const;

 private:
  StatsMode mode_;
  PeakDelayStats pooled_;
  std::map<AntennaId, PeakDelayStats> per_antenna_;
};

/// Rolling-window peak statistics for streaming use. Single writer.
class RollingPeakStats {
 public:
  explicit RollingPeakStats(std::size_t window = 500);

  void push(int peak_index);
  std::size_t size() const noexcept { return window_.size(); }
  bool ready() const noexcept { return window_.size() >= 2; }
  /// Throws Error{InsufficientData} until two samples were pushed.
  PeakDelayStats stats() const;

 private:
  std::size_t capacity_;
  std::deque<int> window_;
};

}  // namespace ultdoa
