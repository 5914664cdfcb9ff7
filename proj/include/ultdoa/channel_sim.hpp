#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <vector>

#include "ultdoa/geometry.hpp"
#include "ultdoa/rng.hpp"

namespace ultdoa {

using Complex = std::complex<double>;

/// One antenna's channel impulse response at one timestamp. A zero
/// excess-delay direct path sits at index n_fft/2 (fft-shifted convention).
struct CirFrame {
  AntennaId antenna;
  std::int64_t timestamp_index = 0;
  std::vector<Complex> samples;
  double sample_period = 0.0;
  bool fft_shifted = true;

  std::size_t n_fft() const noexcept { return samples.size(); }
};

struct PathComponent {
  double delay = 0.0;  // seconds, relative to the fft-shifted window center
  Complex gain;
  bool direct = false;
};

struct MultipathProfile {
  std::vector<PathComponent> paths;
};

/// Reflection relative to the direct path.
struct MultipathTap {
  double excess_delay = 0.0;  // seconds, > 0
  double amplitude = 0.0;     // relative to the LoS direct amplitude
  double phase = 0.0;         // radians
};

/// While the UE is inside `region`, the listed antennas (all when empty)
/// see an attenuated, delayed direct path.
struct NlosRule {
  Box region;
  std::vector<AntennaId> antennas;
  double attenuation = 0.1;  // linear amplitude factor on the direct tap
  double extra_delay = 0.0;  // seconds
};

enum class DelayMode { SampleGrid, Fractional };

struct ScenarioConfig {
  explicit ScenarioConfig(DeploymentGeometry g) : geometry(std::move(g)) {}

  DeploymentGeometry geometry;
  int n_fft = 4096;
  double sample_period = 1.0 / 122.88e6;

  /// Per-RU constant clock offsets: explicit values (missing entries are 0)
  /// plus a draw from N(0, clock_offset_std) made once per scenario.
  std::vector<double> ru_clock_offsets;
  double clock_offset_std = 0.0;
  /// Independent zero-mean jitter on every frame.
  double frame_jitter_std = 0.0;

  double outlier_probability = 0.0;
  double outlier_offset_min = 0.0;  // seconds
  double outlier_offset_max = 0.0;  // seconds
  bool outlier_two_sided = false;

  double noise_floor = 0.0;  // complex noise power per sample
  double direct_amplitude = 1.0;
  double path_loss_exponent = 0.0;
  double reference_distance = 1.0;
  bool random_tap_phase = false;
  std::vector<MultipathTap> multipath;
  std::vector<NlosRule> nlos;

  DelayMode mode = DelayMode::SampleGrid;
  std::uint64_t seed = 0;

  /// Throws Error{InvalidArgument} on a violated invariant.
  void validate() const;
};

/// Ground truth the simulator knows about a frame.
struct FrameTruth {
  double direct_delay = 0.0;  // seconds from window center to the direct tap
  double geometric_delay = 0.0;
  double clock_offset = 0.0;  // RU constant offset
  bool los = true;
  bool outlier = false;
};

struct SimulatedFrame {
  CirFrame frame;
  FrameTruth truth;
  Position ue;
};

struct TrajectoryPoint {
  std::int64_t timestamp_index = 0;
  Position position;
};

using Trajectory = std::vector<TrajectoryPoint>;

/// Resolved scenario: validated config plus its per-RU clock offsets.
class Scenario {
 public:
  explicit Scenario(ScenarioConfig cfg);

  const ScenarioConfig& config() const noexcept { return cfg_; }
  const DeploymentGeometry& geometry() const noexcept { return cfg_.geometry; }
  double ru_clock_offset(int ru) const { return ru_offsets_.at(static_cast<std::size_t>(ru)); }

  MultipathProfile profile(const Position& ue, AntennaId antenna, Rng& rng, FrameTruth* truth = nullptr) const;

 private:
  ScenarioConfig cfg_;
  std::vector<double> ru_offsets_;
};

/// Renders taps into an fft-shifted frame. Throws Error{DelayOutOfWindow}.
std::vector<Complex> render_cir(const MultipathProfile& profile, int n_fft, double sample_period,
                                DelayMode mode);

SimulatedFrame synth_cir(const Scenario& scenario, const Position& ue, AntennaId antenna,
                         std::int64_t t, Rng& rng);

/// One frame per (timestamp, antenna), ordered by timestamp then (ru, antenna).
/// Each frame draws from its own stream derived from the seed, so results do
/// not depend on `threads`.
std::vector<SimulatedFrame> simulate(const Scenario& scenario, const Trajectory& trajectory,
                                     unsigned threads = 1);

Trajectory make_trajectory(const std::vector<Position>& waypoints, double step,
                           std::int64_t first_index = 0);

}  // namespace ultdoa
