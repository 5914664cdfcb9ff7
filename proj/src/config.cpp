#include "ultdoa/config.hpp"

#include <fstream>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "ultdoa/error.hpp"

namespace ultdoa {

namespace {

class Parser {
 public:
  explicit Parser(std::string source) : source_(std::move(source)) {}

  [[noreturn]] void fail(const YAML::Node& node, const std::string& msg) const {
    const int line = node.IsDefined() ? node.Mark().line + 1 : 0;
    throw Error(Errc::ConfigError, source_ + ":" + std::to_string(line) + ": " + msg);
  }

  template <typename T>
  T get(const YAML::Node& node, const char* what) const {
    try {
      return node.as<T>();
    } catch (const YAML::Exception&) {
      fail(node, std::string("invalid value for '") + what + "'");
    }
  }

  template <typename T>
  T get_or(const YAML::Node& parent, const char* key, T fallback) const {
    const auto node = parent[key];
    return node ? get<T>(node, key) : fallback;
  }

  YAML::Node require(const YAML::Node& parent, const char* key) const {
    const auto node = parent[key];
    if (!node) fail(parent, std::string("missing key '") + key + "'");
    return node;
  }

  Position position(const YAML::Node& node, double default_z = 0.0) const {
    if (!node.IsSequence() || node.size() < 2 || node.size() > 3) fail(node, "expected [x, y] or [x, y, z]");
    return {get<double>(node[0], "x"), get<double>(node[1], "y"),
            node.size() == 3 ? get<double>(node[2], "z") : default_z};
  }

  Box box(const YAML::Node& node) const {
    if (!node.IsSequence() || node.size() != 2) fail(node, "expected [[xmin, ymin], [xmax, ymax]]");
    Box b{position(node[0], -1e9), position(node[1], 1e9)};
    if (b.lo.x > b.hi.x || b.lo.y > b.hi.y) fail(node, "box corners are inverted");
    return b;
  }

  AntennaId antenna(const YAML::Node& node) const {
    if (!node.IsSequence() || node.size() != 2) fail(node, "expected [ru, antenna]");
    return {get<int>(node[0], "ru"), get<int>(node[1], "antenna")};
  }

  DeploymentGeometry geometry(const YAML::Node& dep) const {
    const auto rus_node = require(dep, "rus");
    if (!rus_node.IsSequence()) fail(rus_node, "'rus' must be a list");
    std::vector<RadioUnit> rus;
    for (const auto& ru_node : rus_node) {
      RadioUnit ru;
      ru.reference = get_or<int>(ru_node, "reference", 0);
      const auto ants = require(ru_node, "antennas");
      if (!ants.IsSequence()) fail(ants, "'antennas' must be a list");
      for (const auto& a : ants) ru.antennas.push_back(position(a));
      rus.push_back(std::move(ru));
    }
    try {
      return DeploymentGeometry(std::move(rus), get_or<double>(dep, "propagation_speed", DeploymentGeometry::kDefaultSpeed));
    } catch (const Error& e) {
      fail(rus_node, e.what());
    }
  }

  void simulation(const YAML::Node& sim, ScenarioConfig& cfg) const {
    if (!sim) return;
    cfg.n_fft = get_or<int>(sim, "n_fft", cfg.n_fft);
    cfg.sample_period = get_or<double>(sim, "sample_period", cfg.sample_period);
    if (const auto mode = sim["mode"]) {
      const auto m = get<std::string>(mode, "mode");
      if (m == "sample-grid") cfg.mode = DelayMode::SampleGrid;
      else if (m == "fractional") cfg.mode = DelayMode::Fractional;
      else fail(mode, "mode must be 'sample-grid' or 'fractional'");
    }
    cfg.seed = get_or<std::uint64_t>(sim, "seed", cfg.seed);
    cfg.clock_offset_std = get_or<double>(sim, "clock_offset_std", cfg.clock_offset_std);
    if (const auto offs = sim["ru_clock_offsets"]) cfg.ru_clock_offsets = get<std::vector<double>>(offs, "ru_clock_offsets");
    cfg.frame_jitter_std = get_or<double>(sim, "frame_jitter_std", cfg.frame_jitter_std);
    if (const auto out = sim["outliers"]) {
      cfg.outlier_probability = get_or<double>(out, "probability", 0.0);
      cfg.outlier_offset_min = get_or<double>(out, "offset_min", 0.0);
      cfg.outlier_offset_max = get_or<double>(out, "offset_max", cfg.outlier_offset_min);
      cfg.outlier_two_sided = get_or<bool>(out, "two_sided", false);
    }
    cfg.noise_floor = get_or<double>(sim, "noise_floor", cfg.noise_floor);
    cfg.direct_amplitude = get_or<double>(sim, "direct_amplitude", cfg.direct_amplitude);
    cfg.path_loss_exponent = get_or<double>(sim, "path_loss_exponent", cfg.path_loss_exponent);
    cfg.reference_distance = get_or<double>(sim, "reference_distance", cfg.reference_distance);
    cfg.random_tap_phase = get_or<bool>(sim, "random_tap_phase", cfg.random_tap_phase);
    if (const auto mp = sim["multipath"]) {
      for (const auto& tap : mp) {
        cfg.multipath.push_back({get<double>(require(tap, "excess_delay"), "excess_delay"),
                                 get<double>(require(tap, "amplitude"), "amplitude"), get_or<double>(tap, "phase", 0.0)});
      }
    }
    if (const auto rules = sim["nlos"]) {
      for (const auto& r : rules) {
        NlosRule rule;
        rule.region = box(require(r, "region"));
        if (const auto ants = r["antennas"]) {
          for (const auto& a : ants) rule.antennas.push_back(antenna(a));
        }
        rule.attenuation = get_or<double>(r, "attenuation", rule.attenuation);
        rule.extra_delay = get_or<double>(r, "extra_delay", rule.extra_delay);
        cfg.nlos.push_back(std::move(rule));
      }
    }
    try {
      cfg.validate();
    } catch (const Error& e) {
      fail(sim, e.what());
    }
  }

  TrajectorySpec trajectory(const YAML::Node& node) const {
    TrajectorySpec spec;
    spec.step = get_or<double>(node, "step", spec.step);
    const double z = get_or<double>(node, "z", 0.0);
    const auto wps = require(node, "waypoints");
    if (!wps.IsSequence()) fail(wps, "'waypoints' must be a list");
    for (const auto& w : wps) spec.waypoints.push_back(position(w, z));
    if (spec.waypoints.empty()) fail(wps, "trajectory has no waypoints");
    if (!(spec.step > 0.0)) fail(node, "trajectory step must be positive");
    return spec;
  }

  void pso(const YAML::Node& node, ProjectConfig& out) const {
    auto& p = out.pso;
    p.bounds = bounding_region(out.geometry());
    if (!node) return;
    p.particles = get_or<int>(node, "particles", p.particles);
    p.iterations = get_or<int>(node, "iterations", p.iterations);
    p.inertia = get_or<double>(node, "inertia", p.inertia);
    p.cognitive = get_or<double>(node, "cognitive", p.cognitive);
    p.social = get_or<double>(node, "social", p.social);
    p.fixed_z = get_or<double>(node, "fixed_z", p.fixed_z);
    p.seed = get_or<std::uint64_t>(node, "seed", p.seed);
    out.bounds_margin = get_or<double>(node, "margin", 0.0);
    if (const auto b = node["bounds"]) {
      p.bounds = box(b);
    } else {
      p.bounds = bounding_region(out.geometry(), out.bounds_margin);
    }
    try {
      p.validate();
    } catch (const Error& e) {
      fail(node, e.what());
    }
  }

 private:
  std::string source_;
};

}  // namespace

ProjectConfig parse_config(const std::string& yaml_text, const std::string& source_name) {
  Parser parser(source_name);
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::ParserException& e) {
    throw Error(Errc::ConfigError, source_name + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  if (!root.IsMap()) throw Error(Errc::ConfigError, source_name + ":1: top level must be a mapping");
  const auto dep = parser.require(root, "deployment");
  ProjectConfig cfg{parser.get_or<std::string>(dep, "id", "deployment"), ScenarioConfig(parser.geometry(dep)),
                    std::nullopt, PsoConfig{}, 0.0};
  parser.simulation(root["simulation"], cfg.scenario);
  if (const auto traj = root["trajectory"]) cfg.trajectory = parser.trajectory(traj);
  parser.pso(root["pso"], cfg);
  return cfg;
}

namespace {
std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}
}  // namespace

ProjectConfig load_config(const std::filesystem::path& path) { return parse_config(slurp(path), path.string()); }

TrajectorySpec load_trajectory(const std::filesystem::path& path) {
  Parser parser(path.string());
  YAML::Node root;
  try {
    root = YAML::Load(slurp(path));
  } catch (const YAML::ParserException& e) {
    throw Error(Errc::ConfigError, path.string() + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  if (const auto t = root["trajectory"]) return parser.trajectory(t);
  return parser.trajectory(root);
}

}  // namespace ultdoa
