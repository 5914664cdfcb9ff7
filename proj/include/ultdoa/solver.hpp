#pragma once

#include <cstdint>
#include <deque>
#include <vector>

#include "ultdoa/geometry.hpp"
#include "ultdoa/tdoa.hpp"

namespace ultdoa {

struct PsoConfig {
  int particles = 200;
  int iterations = 100;
  double inertia = 0.9;
  double cognitive = 0.5;
  double social = 0.9;
  Box bounds;
  double fixed_z = 0.0;
  std::uint64_t seed = 0;
  /// Global best moving less than this over the last tenth of the
  /// iterations marks the estimate as converged.
  double convergence_tol = 1e-3;

  void validate() const;
};

struct PositionEstimate {
  Position position;
  double loss = 0.0;  // seconds^2
  std::int64_t timestamp_index = 0;
  int n_observations_used = 0;
  bool converged = false;
};

/// (|c - x_m| - |c - x_ref|) / speed.
double expected_tdoa(const Position& candidate, const TdoaObservation& obs, const DeploymentGeometry& g);

/// Sum of squared (measured - expected) TDoA residuals. Throws
/// Error{EmptyObservations}.
double loss(const Position& candidate, const TdoaSet& set, const DeploymentGeometry& g);

/// Precomputed loss over one TdoaSet, for repeated evaluation.
class TdoaLoss {
 public:
  TdoaLoss(const TdoaSet& set, const DeploymentGeometry& g);

  double operator()(const Position& candidate) const noexcept;
  std::size_t size() const noexcept { return terms_.size(); }

 private:
  struct Term {
    Position antenna;
    Position reference;
    double measured_range_diff;  // measured tdoa * speed
  };
  std::vector<Term> terms_;
  double inv_speed_sq_;
};

/// Minimal observation count for a 2D fix.
inline constexpr std::size_t kMinObservations = 3;

/// Particle swarm search over cfg.bounds at z = cfg.fixed_z. Throws
/// Error{Unsolvable} for fewer than three observations and
/// Error{NonFiniteLoss} if the loss turns NaN. When `gbest_history` is
/// given it receives the global-best loss after initialization and after
/// every iteration.
PositionEstimate pso_estimate(const TdoaSet& set, const DeploymentGeometry& g, const PsoConfig& cfg,
                              std::vector<double>* gbest_history = nullptr);

/// Exhaustive loss minimization on a regular grid anchored at the lower
/// corner of `bounds`; ties go to the smallest x, then y.
PositionEstimate grid_oracle(const TdoaSet& set, const DeploymentGeometry& g, const Box& bounds, double fixed_z,
                             double resolution);

/// Unweighted moving average of the last W positions.
class SmootherState {
 public:
  explicit SmootherState(std::size_t window = 1);

  Position push(const Position& p);
  std::size_t window() const noexcept { return window_; }
  std::size_t size() const noexcept { return buffer_.size(); }

 private:
  std::size_t window_;
  std::deque<Position> buffer_;
};

inline Position smooth(SmootherState& state, const PositionEstimate& estimate) {
  return state.push(estimate.position);
}

}  // namespace ultdoa
