#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ultdoa/channel_sim.hpp"
#include "ultdoa/solver.hpp"

namespace ultdoa {

struct TrajectorySpec {
  std::vector<Position> waypoints;
  double step = 1.0;
};

/// Everything a scenario file describes. See configs/ for the schema.
struct ProjectConfig {
  std::string deployment_id;
  ScenarioConfig scenario;
  std::optional<TrajectorySpec> trajectory;
  PsoConfig pso;
  /// Expansion applied to the antenna bounding box when the file gives no
  /// explicit PSO bounds.
  double bounds_margin = 0.0;

  const DeploymentGeometry& geometry() const noexcept { return scenario.geometry; }
};

/// Throws Error{ConfigError} with "<source>:<line>: <message>".
ProjectConfig parse_config(const std::string& yaml_text, const std::string& source_name = "<config>");
ProjectConfig load_config(const std::filesystem::path& path);
TrajectorySpec load_trajectory(const std::filesystem::path& path);

}  // namespace ultdoa
