#pragma once

#include <array>
#include <compare>
#include <cmath>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace ultdoa {

/// Point in the local Cartesian frame, meters.
struct Position {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  constexpr Position& operator+=(const Position& o) noexcept {
    x += o.x; y += o.y; z += o.z;
    return *this;
  }
  constexpr Position& operator-=(const Position& o) noexcept {
    x -= o.x; y -= o.y; z -= o.z;
    return *this;
  }
  constexpr Position& operator*=(double s) noexcept {
    x *= s; y *= s; z *= s;
    return *this;
  }
  friend constexpr Position operator+(Position a, const Position& b) noexcept { return a += b; }
  friend constexpr Position operator-(Position a, const Position& b) noexcept { return a -= b; }
  friend constexpr Position operator*(Position a, double s) noexcept { return a *= s; }
  friend constexpr Position operator*(double s, Position a) noexcept { return a *= s; }
  friend constexpr bool operator==(const Position&, const Position&) = default;

  double norm() const noexcept { return std::sqrt(x * x + y * y + z * z); }
  double horizontal_norm() const noexcept { return std::hypot(x, y); }
  bool finite() const noexcept { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }

  Eigen::Vector3d vec() const noexcept { return {x, y, z}; }
  static Position from(const Eigen::Vector3d& v) noexcept { return {v.x(), v.y(), v.z()}; }
};

inline double distance(const Position& a, const Position& b) noexcept { return (a - b).norm(); }
inline double horizontal_distance(const Position& a, const Position& b) noexcept {
  return (a - b).horizontal_norm();
}

struct AntennaId {
  int ru = 0;
  int antenna = 0;

  friend constexpr auto operator<=>(const AntennaId&, const AntennaId&) = default;
};

struct RadioUnit {
  std::vector<Position> antennas;
  int reference = 0;
};

/// Validated set of RUs and antenna coordinates. Immutable after construction.
class DeploymentGeometry {
 public:
  // Rounded speed of light used throughout the positioning literature.
  static constexpr double kDefaultSpeed = 3.0e8;

  /// Throws Error{InvalidArgument} when an RU has fewer than two antennas, a
  /// reference index is out of range, fewer than three antennas exist in
  /// total, a coordinate is non-finite or the speed is not positive.
  DeploymentGeometry(std::vector<RadioUnit> rus, double propagation_speed = kDefaultSpeed);

  const std::vector<RadioUnit>& rus() const noexcept { return rus_; }
  std::size_t ru_count() const noexcept { return rus_.size(); }
  std::size_t antenna_count() const noexcept { return antenna_count_; }
  double propagation_speed() const noexcept { return propagation_speed_; }

  bool contains(AntennaId id) const noexcept;
  const Position& antenna(AntennaId id) const;
  AntennaId reference_of(int ru) const;

  /// All antenna ids ordered by (ru, antenna).
  std::vector<AntennaId> antenna_ids() const;
  std::vector<Position> antenna_positions() const;
  /// Dense row index of an antenna in (ru, antenna) order.
  std::size_t flat_index(AntennaId id) const;

  /// FNV-1a over the coordinates, reference indices and speed.
  std::uint64_t hash() const noexcept;

 private:
  std::vector<RadioUnit> rus_;
  std::vector<std::size_t> offsets_;
  std::size_t antenna_count_ = 0;
  double propagation_speed_;
};

/// Axis-aligned box.
struct Box {
  Position lo;
  Position hi;

  bool contains(const Position& p, double tol = 0.0) const noexcept {
    return p.x >= lo.x - tol && p.x <= hi.x + tol && p.y >= lo.y - tol && p.y <= hi.y + tol &&
           p.z >= lo.z - tol && p.z <= hi.z + tol;
  }
  bool contains_xy(const Position& p, double tol = 0.0) const noexcept {
    return p.x >= lo.x - tol && p.x <= hi.x + tol && p.y >= lo.y - tol && p.y <= hi.y + tol;
  }
  Box expanded(double margin) const noexcept {
    return {lo - Position{margin, margin, margin}, hi + Position{margin, margin, margin}};
  }
  double width() const noexcept { return hi.x - lo.x; }
  double depth() const noexcept { return hi.y - lo.y; }
};

Box bounding_region(std::span<const Position> points, double margin = 0.0);
Box bounding_region(const DeploymentGeometry& g, double margin = 0.0);

/// Diagnostic: whether (p.x, p.y) lies inside the 2D convex hull of the
/// antennas (boundary counts as inside).
bool inside_convex_hull_xy(const DeploymentGeometry& g, const Position& p, double tol = 1e-9);
std::vector<Position> convex_hull_xy(std::span<const Position> points);

struct GeodeticFix {
  double latitude = 0.0;   // degrees
  double longitude = 0.0;  // degrees
  double altitude = 0.0;   // meters above the WGS-84 ellipsoid
};

namespace wgs84 {
inline constexpr double kSemiMajorAxis = 6378137.0;
inline constexpr double kFlattening = 1.0 / 298.257223563;
}  // namespace wgs84

Eigen::Vector3d geodetic_to_ecef(const GeodeticFix& fix);
/// East-North-Up coordinates of `fix` relative to `origin`.
Position geodetic_to_enu(const GeodeticFix& fix, const GeodeticFix& origin);

/// Rigid transform p -> R p + t.
struct AffineAlignment {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Position apply(const Position& p) const noexcept;
  AffineAlignment inverse() const;
  bool orthonormal(double tol = 1e-9) const noexcept;
};

/// Least-squares rigid fit (Kabsch, no scale) of enu -> local.
/// Throws Error{DegenerateGeometry} for fewer than three or collinear pairs.
AffineAlignment fit_alignment(std::span<const std::pair<Position, Position>> pairs);

inline Position apply_alignment(const AffineAlignment& a, const Position& p) { return a.apply(p); }

}  // namespace ultdoa
