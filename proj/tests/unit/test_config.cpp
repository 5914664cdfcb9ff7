#include <string>

#include "check.hpp"
#include "ultdoa/config.hpp"

using namespace ultdoa;

namespace {

const char* kFull = R"(deployment:
  id: hall
  propagation_speed: 3.0e8
  rus:
    - reference: 0
      antennas: [[0, 0, 2.2], [15, 10, 2.2], [25, 0, 2.2], [5, 8, 2.2]]
    - reference: 1
      antennas: [[50, 10, 2.2], [35, 0, 2.2], [25, 10, 2.2], [45, 2, 2.2]]
simulation:
  mode: fractional
  seed: 99
  n_fft: 2048
  ru_clock_offsets: [0, 4.0e-8]
  frame_jitter_std: 1.0e-9
  outliers: {probability: 0.1, offset_min: 1.0e-6, offset_max: 2.0e-6, two_sided: true}
  noise_floor: 0.001
  path_loss_exponent: 2
  multipath:
    - {excess_delay: 2.0e-8, amplitude: 0.4, phase: 1.0}
  nlos:
    - region: [[20, 0], [30, 10]]
      antennas: [[0, 2]]
      attenuation: 0.2
      extra_delay: 1.0e-8
trajectory:
  step: 0.5
  z: 1.5
  waypoints: [[2, 2], [48, 2], [48, 8]]
pso:
  particles: 64
  iterations: 50
  fixed_z: 1.5
  seed: 3
  bounds: [[0, 0], [50, 10]]
)";

std::string error_of(const std::string& text) {
  try {
    parse_config(text, "cfg.yaml");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::ConfigError);
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("config parses every section") {
  const auto cfg = parse_config(kFull, "full.yaml");
  CHECK(cfg.deployment_id == "hall");
  CHECK(cfg.geometry().antenna_count() == 8);
  CHECK(cfg.geometry().reference_of(1) == AntennaId{1, 1});
  const auto& s = cfg.scenario;
  CHECK(s.mode == DelayMode::Fractional);
  CHECK(s.seed == 99);
  CHECK(s.n_fft == 2048);
  CHECK(s.ru_clock_offsets == std::vector<double>{0.0, 4.0e-8});
  CHECK(s.outlier_two_sided);
  CHECK(s.outlier_offset_max == 2.0e-6);
  CHECK(s.path_loss_exponent == 2.0);
  REQUIRE(s.multipath.size() == 1);
  CHECK(s.multipath[0].phase == 1.0);
  REQUIRE(s.nlos.size() == 1);
  CHECK(s.nlos[0].antennas == std::vector<AntennaId>{{0, 2}});
  CHECK(s.nlos[0].region.hi.x == 30.0);
  REQUIRE(cfg.trajectory.has_value());
  CHECK(cfg.trajectory->waypoints.size() == 3);
  CHECK(cfg.trajectory->waypoints[1] == Position{48, 2, 1.5});
  CHECK(cfg.pso.particles == 64);
  CHECK(cfg.pso.bounds.hi.x == 50.0);
  CHECK(cfg.pso.fixed_z == 1.5);
}

TEST_CASE("config defaults") {
  const auto cfg = parse_config(R"(deployment:
  rus:
    - antennas: [[0, 0, 2], [10, 0, 2]]
    - antennas: [[0, 10, 2], [10, 10, 2]]
pso:
  margin: 1.0
)");
  CHECK(cfg.scenario.mode == DelayMode::SampleGrid);
  CHECK(cfg.scenario.n_fft == 4096);
  CHECK(cfg.geometry().propagation_speed() == 3.0e8);
  CHECK(cfg.pso.particles == 200);
  CHECK(cfg.pso.inertia == 0.9);
  CHECK(cfg.pso.cognitive == 0.5);
  CHECK(cfg.pso.social == 0.9);
  CHECK(cfg.pso.bounds.lo.x == -1.0);
  CHECK(cfg.pso.bounds.hi.y == 11.0);
  CHECK_FALSE(cfg.trajectory.has_value());
}

TEST_CASE("config errors carry line numbers") {
  CHECK(error_of("deployment: [").find("cfg.yaml:1:") != std::string::npos);
  CHECK(error_of("simulation: {}\n").find("missing key 'deployment'") != std::string::npos);

  const auto bad_mode = error_of(R"(deployment:
  rus:
    - antennas: [[0, 0, 2], [10, 0, 2], [5, 5, 2]]
simulation:
  mode: continuous
)");
  CHECK(bad_mode.find("cfg.yaml:5:") != std::string::npos);

  const auto bad_number = error_of(R"(deployment:
  rus:
    - antennas: [[0, 0, 2], [10, zero, 2], [5, 5, 2]]
)");
  CHECK(bad_number.find("cfg.yaml:3:") != std::string::npos);

  const auto bad_geometry = error_of(R"(deployment:
  rus:
    - antennas: [[0, 0, 2]]
)");
  CHECK(bad_geometry.find("fewer than 2 antennas") != std::string::npos);

  const auto bad_probability = error_of(R"(deployment:
  rus:
    - antennas: [[0, 0, 2], [10, 0, 2], [5, 5, 2]]
simulation:
  outliers: {probability: 2}
)");
  CHECK(bad_probability.find("probability") != std::string::npos);

  const auto empty_traj = error_of(R"(deployment:
  rus:
    - antennas: [[0, 0, 2], [10, 0, 2], [5, 5, 2]]
trajectory:
  waypoints: []
)");
  CHECK(empty_traj.find("no waypoints") != std::string::npos);
}
