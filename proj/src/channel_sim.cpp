#include "ultdoa/channel_sim.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>
#include <thread>

#include "ultdoa/error.hpp"

namespace ultdoa {

void ScenarioConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw Error(Errc::InvalidArgument, what);
  };
  require(n_fft >= 2 && std::has_single_bit(static_cast<unsigned>(n_fft)), "n_fft must be a power of two");
  require(sample_period > 0.0 && std::isfinite(sample_period), "sample_period must be positive");
  require(clock_offset_std >= 0.0 && frame_jitter_std >= 0.0, "standard deviations must be >= 0");
  require(outlier_probability >= 0.0 && outlier_probability <= 1.0, "outlier probability must be in [0,1]");
  require(outlier_offset_min <= outlier_offset_max, "outlier offset range is inverted");
  require(noise_floor >= 0.0, "noise floor must be >= 0");
  require(direct_amplitude > 0.0, "direct amplitude must be positive");
  require(reference_distance > 0.0, "reference distance must be positive");
  require(ru_clock_offsets.size() <= geometry.ru_count(), "more clock offsets than RUs");
  for (const auto& tap : multipath) {
    require(tap.excess_delay >= 0.0 && tap.amplitude >= 0.0, "multipath taps need non-negative delay and amplitude");
  }
  for (const auto& rule : nlos) {
    require(rule.attenuation >= 0.0 && rule.extra_delay >= 0.0, "NLoS rule needs attenuation >= 0 and extra delay >= 0");
    for (const auto& id : rule.antennas) require(geometry.contains(id), "NLoS rule names an unknown antenna");
  }
}

Scenario::Scenario(ScenarioConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  ru_offsets_.assign(cfg_.geometry.ru_count(), 0.0);
  std::copy(cfg_.ru_clock_offsets.begin(), cfg_.ru_clock_offsets.end(), ru_offsets_.begin());
  if (cfg_.clock_offset_std > 0.0) {
    auto rng = derive_rng(cfg_.seed, {0});
    std::normal_distribution<double> normal(0.0, cfg_.clock_offset_std);
    for (auto& o : ru_offsets_) o += normal(rng);
  }
}

MultipathProfile Scenario::profile(const Position& ue, AntennaId antenna, Rng& rng, FrameTruth* truth) const {
  const auto& g = cfg_.geometry;
  const double range = distance(ue, g.antenna(antenna));
  const double geometric = range / g.propagation_speed();
  const double clock = ru_clock_offset(antenna.ru);

  double jitter = 0.0;
  if (cfg_.frame_jitter_std > 0.0) jitter = std::normal_distribution<double>(0.0, cfg_.frame_jitter_std)(rng);

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double outlier = 0.0;
  bool is_outlier = false;
  if (cfg_.outlier_probability > 0.0 && unit(rng) < cfg_.outlier_probability) {
    is_outlier = true;
    outlier = cfg_.outlier_offset_min + (cfg_.outlier_offset_max - cfg_.outlier_offset_min) * unit(rng);
    if (cfg_.outlier_two_sided && unit(rng) < 0.5) outlier = -outlier;
  }

  double attenuation = 1.0;
  double extra = 0.0;
  bool los = true;
  for (const auto& rule : cfg_.nlos) {
    if (!rule.region.contains_xy(ue)) continue;
    if (!rule.antennas.empty() &&
        std::find(rule.antennas.begin(), rule.antennas.end(), antenna) == rule.antennas.end()) {
      continue;
    }
    attenuation *= rule.attenuation;
    extra += rule.extra_delay;
    los = false;
  }

  const double amplitude =
      cfg_.direct_amplitude *
      std::pow(cfg_.reference_distance / std::max(range, cfg_.reference_distance), cfg_.path_loss_exponent / 2.0);
  auto phase = [&](double fixed) {
    return cfg_.random_tap_phase ? unit(rng) * 2.0 * M_PI : fixed;
  };

  const double base = geometric + clock + jitter + outlier;
  MultipathProfile out;
  out.paths.push_back({base + extra, std::polar(amplitude * attenuation, phase(0.0)), true});
  for (const auto& tap : cfg_.multipath) {
    out.paths.push_back({base + tap.excess_delay, std::polar(amplitude * tap.amplitude, phase(tap.phase)), false});
  }

  if (truth) {
    *truth = FrameTruth{base + extra, geometric, clock, los, is_outlier};
  }
  return out;
}

namespace {

// Periodic band-limited impulse centered at `center`:
// h[n] = (1/N) * sum_{k=-N/2}^{N/2-1} exp(j 2 pi k (n - center) / N).
void add_bandlimited(std::vector<Complex>& out, double center, Complex gain) {
  const int n = static_cast<int>(out.size());
  const double nd = static_cast<double>(n);
  const double whole = std::floor(center);
  const double frac = center - whole;
  const double sin_frac = std::sin(M_PI * frac);
  for (int i = 0; i < n; ++i) {
    const double x = static_cast<double>(i) - center;
    if (std::abs(x) < 1e-12) {
      out[i] += gain;
      continue;
    }
    // sin(pi x) from the fractional part keeps full precision for large x.
    const long long m = static_cast<long long>(i) - static_cast<long long>(whole);
    const double sin_pix = (m % 2 == 0 ? -1.0 : 1.0) * sin_frac;
    const double value = sin_pix / (nd * std::sin(M_PI * x / nd));
    out[i] += gain * std::polar(value, -M_PI * x / nd);
  }
}

}  // namespace

std::vector<Complex> render_cir(const MultipathProfile& profile, int n_fft, double sample_period,
                                DelayMode mode) {
  std::vector<Complex> out(static_cast<std::size_t>(n_fft), Complex{});
  const double center = n_fft / 2;
  for (const auto& path : profile.paths) {
    const double pos = center + path.delay / sample_period;
    if (mode == DelayMode::SampleGrid) {
      const long long idx = std::llround(pos);
      if (!std::isfinite(pos) || idx < 0 || idx >= n_fft) {
        throw Error(Errc::DelayOutOfWindow, "tap index " + std::to_string(pos) + " outside [0, " +
                                                std::to_string(n_fft) + ")");
      }
      out[static_cast<std::size_t>(idx)] += path.gain;
    } else {
      if (!std::isfinite(pos) || pos < 0.0 || pos >= n_fft) {
        throw Error(Errc::DelayOutOfWindow, "tap position " + std::to_string(pos) + " outside [0, " +
                                                std::to_string(n_fft) + ")");
      }
      add_bandlimited(out, pos, path.gain);
    }
  }
  return out;
}

SimulatedFrame synth_cir(const Scenario& scenario, const Position& ue, AntennaId antenna,
                         std::int64_t t, Rng& rng) {
  const auto& cfg = scenario.config();
  SimulatedFrame out;
  out.ue = ue;
  const auto profile = scenario.profile(ue, antenna, rng, &out.truth);
  out.frame.antenna = antenna;
  out.frame.timestamp_index = t;
  out.frame.sample_period = cfg.sample_period;
  out.frame.fft_shifted = true;
  out.frame.samples = render_cir(profile, cfg.n_fft, cfg.sample_period, cfg.mode);
  if (cfg.noise_floor > 0.0) {
    std::normal_distribution<double> normal(0.0, std::sqrt(cfg.noise_floor / 2.0));
    for (auto& s : out.frame.samples) s += Complex(normal(rng), normal(rng));
  }
  return out;
}

std::vector<SimulatedFrame> simulate(const Scenario& scenario, const Trajectory& trajectory, unsigned threads) {
  const auto ids = scenario.geometry().antenna_ids();
  const std::size_t per_t = ids.size();
  const std::size_t total = per_t * trajectory.size();
  std::vector<SimulatedFrame> out(total);

  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto& point = trajectory[i / per_t];
      const auto id = ids[i % per_t];
      auto rng = derive_rng(scenario.config().seed,
                            {1, static_cast<std::uint64_t>(id.ru), static_cast<std::uint64_t>(id.antenna),
                             static_cast<std::uint64_t>(point.timestamp_index)});
      out[i] = synth_cir(scenario, point.position, id, point.timestamp_index, rng);
    }
  };

  threads = std::max(1u, threads);
  if (threads == 1 || total < 2) {
    work(0, total);
    return out;
  }
  std::vector<std::jthread> pool;
  const std::size_t chunk = (total + threads - 1) / threads;
  for (std::size_t begin = 0; begin < total; begin += chunk) {
    pool.emplace_back(work, begin, std::min(total, begin + chunk));
  }
  pool.clear();
  return out;
}

Trajectory make_trajectory(const std::vector<Position>& waypoints, double step, std::int64_t first_index) {
  if (waypoints.empty()) throw Error(Errc::InvalidArgument, "trajectory needs at least one waypoint");
  if (!(step > 0.0)) throw Error(Errc::InvalidArgument, "trajectory step must be positive");

  std::vector<Position> points;
  for (std::size_t i = 0; i + 1 < waypoints.size(); ++i) {
    const Position a = waypoints[i];
    const Position d = waypoints[i + 1] - a;
    const double length = d.norm();
    if (length == 0.0) continue;
    for (std::int64_t k = 0;; ++k) {
      const double s = static_cast<double>(k) * step;
      if (s >= length - 1e-9 * std::max(1.0, length)) break;
      points.push_back(a + d * (s / length));
    }
  }
  points.push_back(waypoints.back());

  Trajectory traj;
  traj.reserve(points.size());
  std::int64_t t = first_index;
  for (const auto& p : points) traj.push_back({t++, p});
  return traj;
}

}  // namespace ultdoa
