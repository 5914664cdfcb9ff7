#include "ultdoa/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "ultdoa/error.hpp"
#include "ultdoa/rng.hpp"

namespace ultdoa {

void PsoConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw Error(Errc::InvalidArgument, what);
  };
  require(particles >= 1, "PSO needs at least one particle");
  require(iterations >= 0, "PSO iterations must be >= 0");
  require(inertia > 0.0 && inertia <= 1.0, "PSO inertia must be in (0, 1]");
  require(cognitive >= 0.0 && social >= 0.0, "PSO acceleration coefficients must be >= 0");
  require(bounds.hi.x > bounds.lo.x && bounds.hi.y > bounds.lo.y, "PSO bounds are degenerate in x or y");
  require(std::isfinite(fixed_z), "PSO fixed z must be finite");
}

double expected_tdoa(const Position& candidate, const TdoaObservation& obs, const DeploymentGeometry& g) {
  return (distance(candidate, g.antenna(obs.antenna)) - distance(candidate, g.antenna(obs.reference))) /
         g.propagation_speed();
}

double loss(const Position& candidate, const TdoaSet& set, const DeploymentGeometry& g) {
  if (set.observations.empty()) throw Error(Errc::EmptyObservations, "loss of an empty TDoA set");
  double sum = 0.0;
  for (const auto& obs : set.observations) {
    const double r = obs.value - expected_tdoa(candidate, obs, g);
    sum += r * r;
  }
  return sum;
}

TdoaLoss::TdoaLoss(const TdoaSet& set, const DeploymentGeometry& g)
    : inv_speed_sq_(1.0 / (g.propagation_speed() * g.propagation_speed())) {
  if (set.observations.empty()) throw Error(Errc::EmptyObservations, "loss of an empty TDoA set");
  terms_.reserve(set.observations.size());
  for (const auto& obs : set.observations) {
    terms_.push_back({g.antenna(obs.antenna), g.antenna(obs.reference), obs.value * g.propagation_speed()});
  }
}

double TdoaLoss::operator()(const Position& c) const noexcept {
  // Residuals in meters, rescaled to seconds^2 once.
  double sum = 0.0;
  for (const auto& t : terms_) {
    const double r = t.measured_range_diff - (distance(c, t.antenna) - distance(c, t.reference));
    sum += r * r;
  }
  return sum * inv_speed_sq_;
}

PositionEstimate pso_estimate(const TdoaSet& set, const DeploymentGeometry& g, const PsoConfig& cfg,
                              std::vector<double>* gbest_history) {
  cfg.validate();
  if (set.observations.size() < kMinObservations) {
    throw Error(Errc::Unsolvable, std::to_string(set.observations.size()) + " observations, need " +
                                      std::to_string(kMinObservations));
  }
  const TdoaLoss objective(set, g);
  const std::size_t n = static_cast<std::size_t>(cfg.particles);
  const double lo[2] = {cfg.bounds.lo.x, cfg.bounds.lo.y};
  const double hi[2] = {cfg.bounds.hi.x, cfg.bounds.hi.y};
  const double vmax[2] = {hi[0] - lo[0], hi[1] - lo[1]};

  Rng rng(mix64(cfg.seed));
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  struct Particle {
    double pos[2];
    double vel[2];
    double best[2];
    double best_loss;
  };
  auto evaluate = [&](const double* p) {
    const double value = objective({p[0], p[1], cfg.fixed_z});
    if (!std::isfinite(value)) throw Error(Errc::NonFiniteLoss, "loss evaluated to a non-finite value");
    return value;
  };

  std::vector<Particle> swarm(n);
  std::size_t gbest_index = 0;
  for (std::size_t p = 0; p < n; ++p) {
    auto& s = swarm[p];
    for (int d = 0; d < 2; ++d) {
      s.pos[d] = lo[d] + (hi[d] - lo[d]) * unit(rng);
      s.vel[d] = 0.0;
      s.best[d] = s.pos[d];
    }
    s.best_loss = evaluate(s.pos);
    if (s.best_loss < swarm[gbest_index].best_loss) gbest_index = p;
  }
  double gbest[2] = {swarm[gbest_index].best[0], swarm[gbest_index].best[1]};
  double gbest_loss = swarm[gbest_index].best_loss;
  if (gbest_history) {
    gbest_history->clear();
    gbest_history->push_back(gbest_loss);
  }

  const int window = std::max(1, cfg.iterations / 10);
  std::deque<std::pair<double, double>> recent;
  recent.emplace_back(gbest[0], gbest[1]);

  for (int it = 0; it < cfg.iterations; ++it) {
    for (auto& s : swarm) {
      const double r1 = unit(rng);
      const double r2 = unit(rng);
      for (int d = 0; d < 2; ++d) {
        double v = cfg.inertia * s.vel[d] + cfg.cognitive * r1 * (s.best[d] - s.pos[d]) +
                   cfg.social * r2 * (gbest[d] - s.pos[d]);
        v = std::clamp(v, -vmax[d], vmax[d]);
        double x = s.pos[d] + v;
        if (x < lo[d] || x > hi[d]) {
          x = std::clamp(x, lo[d], hi[d]);
          v = 0.0;
        }
        s.pos[d] = x;
        s.vel[d] = v;
      }
      const double value = evaluate(s.pos);
      if (value < s.best_loss) {
        s.best_loss = value;
        s.best[0] = s.pos[0];
        s.best[1] = s.pos[1];
      }
    }
    // Synchronous update: the swarm sees one global best per iteration.
    for (const auto& s : swarm) {
      if (s.best_loss < gbest_loss) {
        gbest_loss = s.best_loss;
        gbest[0] = s.best[0];
        gbest[1] = s.best[1];
      }
    }
    if (gbest_history) gbest_history->push_back(gbest_loss);
    recent.emplace_back(gbest[0], gbest[1]);
    if (recent.size() > static_cast<std::size_t>(window) + 1) recent.pop_front();
  }

  PositionEstimate est;
  est.position = {gbest[0], gbest[1], cfg.fixed_z};
  est.loss = gbest_loss;
  est.timestamp_index = set.timestamp_index;
  est.n_observations_used = static_cast<int>(set.observations.size());
  const auto& oldest = recent.front();
  est.converged = cfg.iterations > 0 &&
                  std::hypot(gbest[0] - oldest.first, gbest[1] - oldest.second) < cfg.convergence_tol;
  return est;
}

PositionEstimate grid_oracle(const TdoaSet& set, const DeploymentGeometry& g, const Box& bounds, double fixed_z,
                             double resolution) {
  if (!(resolution > 0.0)) throw Error(Errc::InvalidArgument, "grid resolution must be positive");
  const TdoaLoss objective(set, g);
  auto steps = [resolution](double lo, double hi) {
    return static_cast<long long>(std::floor((hi - lo) / resolution + 1e-9));
  };
  const long long nx = std::max(0LL, steps(bounds.lo.x, bounds.hi.x));
  const long long ny = std::max(0LL, steps(bounds.lo.y, bounds.hi.y));

  PositionEstimate best;
  best.loss = std::numeric_limits<double>::infinity();
  for (long long i = 0; i <= nx; ++i) {
    const double x = bounds.lo.x + static_cast<double>(i) * resolution;
    for (long long j = 0; j <= ny; ++j) {
      const Position p{x, bounds.lo.y + static_cast<double>(j) * resolution, fixed_z};
      const double value = objective(p);
      if (value < best.loss) {
        best.loss = value;
        best.position = p;
      }
    }
  }
  best.timestamp_index = set.timestamp_index;
  best.n_observations_used = static_cast<int>(set.observations.size());
  best.converged = true;
  return best;
}

SmootherState::SmootherState(std::size_t window) : window_(window) {
  if (window_ < 1) throw Error(Errc::InvalidArgument, "smoothing window must be >= 1");
}

Position SmootherState::push(const Position& p) {
  buffer_.push_back(p);
  if (buffer_.size() > window_) buffer_.pop_front();
  Position sum;
  for (const auto& q : buffer_) sum += q;
  return sum * (1.0 / static_cast<double>(buffer_.size()));
}

}  // namespace ultdoa
