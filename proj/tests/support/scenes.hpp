#pragma once

// Shared synthetic deployments for unit and acceptance tests.

#include <random>
#include <vector>

#include "ultdoa/channel_sim.hpp"
#include "ultdoa/dataset.hpp"
#include "ultdoa/geometry.hpp"
#include "ultdoa/rng.hpp"
#include "ultdoa/tdoa.hpp"

namespace ultdoa::scenes {

inline constexpr double kAntennaHeight = 2.2;
inline constexpr double kUeHeight = 1.5;

inline Box test_area() { return {{0.0, 0.0, 0.0}, {50.0, 10.0, 3.0}}; }

/// Two RUs with four ceiling antennas each, spread over a 50 x 10 m hall.
inline DeploymentGeometry two_ru_hall() {
  const double z = kAntennaHeight;
  RadioUnit ru0{{{0, 0, z}, {15, 10, z}, {25, 0, z}, {5, 8, z}}, 0};
  RadioUnit ru1{{{50, 10, z}, {35, 0, z}, {25, 10, z}, {45, 2, z}}, 0};
  return DeploymentGeometry({ru0, ru1});
}

/// One RU with four antennas on the hall's long axis.
inline DeploymentGeometry collinear_rail() {
  const double z = kAntennaHeight;
  RadioUnit ru{{{5, 5, z}, {18, 5, z}, {32, 5, z}, {45, 5, z}}, 0};
  return DeploymentGeometry({ru});
}

inline Position random_ue(Rng& rng, double margin = 1.0) {
  const auto a = test_area();
  std::uniform_real_distribution<double> ux(a.lo.x + margin, a.hi.x - margin);
  std::uniform_real_distribution<double> uy(a.lo.y + margin, a.hi.y - margin);
  const double x = ux(rng);
  return {x, uy(rng), kUeHeight};
}

/// Noise-free ToAs straight from geometry (window-relative delays).
inline std::vector<ToaMeasurement> exact_toas(const DeploymentGeometry& g, const Position& ue, std::int64_t t = 0,
                                              int n_fft = 4096, double ts = 1.0 / 122.88e6) {
  std::vector<ToaMeasurement> out;
  for (const auto& id : g.antenna_ids()) {
    out.push_back(toa_from_delay(id, t, distance(ue, g.antenna(id)) / g.propagation_speed(), n_fft, ts));
  }
  return out;
}

inline Trajectory as_trajectory(const std::vector<Position>& points) {
  Trajectory traj;
  for (std::size_t i = 0; i < points.size(); ++i) traj.push_back({static_cast<std::int64_t>(i), points[i]});
  return traj;
}

inline Dataset simulate_dataset(const ScenarioConfig& cfg, const std::vector<Position>& points) {
  const Scenario scenario(cfg);
  const auto frames = simulate(scenario, as_trajectory(points));
  return dataset_from_simulation(frames, scenario);
}

}  // namespace ultdoa::scenes
