#include "ultdoa/geometry.hpp"

#include <algorithm>
#include <bit>
#include <limits>
#include <string>

#include <Eigen/LU>
#include <Eigen/SVD>

#include "ultdoa/error.hpp"

namespace ultdoa {

DeploymentGeometry::DeploymentGeometry(std::vector<RadioUnit> rus, double propagation_speed)
    : rus_(std::move(rus)), propagation_speed_(propagation_speed) {
  if (!(propagation_speed_ > 0.0) || !std::isfinite(propagation_speed_)) {
    throw Error(Errc::InvalidArgument, "propagation speed must be positive");
  }
  offsets_.reserve(rus_.size());
  for (std::size_t k = 0; k < rus_.size(); ++k) {
    const auto& ru = rus_[k];
    if (ru.antennas.size() < 2) {
      throw Error(Errc::InvalidArgument, "RU " + std::to_string(k) + " has fewer than 2 antennas");
    }
    if (ru.reference < 0 || static_cast<std::size_t>(ru.reference) >= ru.antennas.size()) {
      throw Error(Errc::InvalidArgument, "RU " + std::to_string(k) + " reference index out of range");
    }
    for (const auto& p : ru.antennas) {
      if (!p.finite()) throw Error(Errc::InvalidArgument, "non-finite antenna coordinate");
    }
    offsets_.push_back(antenna_count_);
    antenna_count_ += ru.antennas.size();
  }
  if (antenna_count_ < 3) {
    throw Error(Errc::InvalidArgument, "at least 3 antennas are required for 2D solving");
  }
}

bool DeploymentGeometry::contains(AntennaId id) const noexcept {
  return id.ru >= 0 && static_cast<std::size_t>(id.ru) < rus_.size() && id.antenna >= 0 &&
         static_cast<std::size_t>(id.antenna) < rus_[id.ru].antennas.size();
}

const Position& DeploymentGeometry::antenna(AntennaId id) const {
  if (!contains(id)) {
    throw Error(Errc::InvalidArgument, "unknown antenna (" + std::to_string(id.ru) + ", " +
                                           std::to_string(id.antenna) + ")");
  }
  return rus_[id.ru].antennas[id.antenna];
}

AntennaId DeploymentGeometry::reference_of(int ru) const {
  if (ru < 0 || static_cast<std::size_t>(ru) >= rus_.size()) {
    throw Error(Errc::InvalidArgument, "unknown RU " + std::to_string(ru));
  }
  return {ru, rus_[ru].reference};
}

std::vector<AntennaId> DeploymentGeometry::antenna_ids() const {
  std::vector<AntennaId> ids;
  ids.reserve(antenna_count_);
  for (std::size_t k = 0; k < rus_.size(); ++k) {
    for (std::size_t m = 0; m < rus_[k].antennas.size(); ++m) {
      ids.push_back({static_cast<int>(k), static_cast<int>(m)});
    }
  }
  return ids;
}

std::vector<Position> DeploymentGeometry::antenna_positions() const {
  std::vector<Position> out;
  out.reserve(antenna_count_);
  for (const auto& ru : rus_) out.insert(out.end(), ru.antennas.begin(), ru.antennas.end());
  return out;
}

std::size_t DeploymentGeometry::flat_index(AntennaId id) const {
  if (!contains(id)) throw Error(Errc::InvalidArgument, "unknown antenna");
  return offsets_[id.ru] + static_cast<std::size_t>(id.antenna);
}

std::uint64_t DeploymentGeometry::hash() const noexcept {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xffU;
      h *= 1099511628211ULL;
    }
  };
  mix(std::bit_cast<std::uint64_t>(propagation_speed_));
  mix(rus_.size());
  for (const auto& ru : rus_) {
    mix(ru.antennas.size());
    mix(static_cast<std::uint64_t>(ru.reference));
    for (const auto& p : ru.antennas) {
      mix(std::bit_cast<std::uint64_t>(p.x));
      mix(std::bit_cast<std::uint64_t>(p.y));
      mix(std::bit_cast<std::uint64_t>(p.z));
    }
  }
  return h;
}

Box bounding_region(std::span<const Position> points, double margin) {
  if (points.empty()) throw Error(Errc::InvalidArgument, "bounding region of no points");
  Box box{points.front(), points.front()};
  for (const auto& p : points) {
    box.lo = {std::min(box.lo.x, p.x), std::min(box.lo.y, p.y), std::min(box.lo.z, p.z)};
    box.hi = {std::max(box.hi.x, p.x), std::max(box.hi.y, p.y), std::max(box.hi.z, p.z)};
  }
  return box.expanded(margin);
}

Box bounding_region(const DeploymentGeometry& g, double margin) {
  const auto pts = g.antenna_positions();
  return bounding_region(pts, margin);
}

namespace {
double cross(const Position& o, const Position& a, const Position& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}
}  // namespace

std::vector<Position> convex_hull_xy(std::span<const Position> points) {
  std::vector<Position> pts(points.begin(), points.end());
  std::sort(pts.begin(), pts.end(), [](const Position& a, const Position& b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const Position& a, const Position& b) { return a.x == b.x && a.y == b.y; }),
            pts.end());
  if (pts.size() < 3) return pts;

  // Andrew's monotone chain, counter-clockwise.
  std::vector<Position> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

bool inside_convex_hull_xy(const DeploymentGeometry& g, const Position& p, double tol) {
  const auto pts = g.antenna_positions();
  const auto hull = convex_hull_xy(pts);
  if (hull.size() < 3) return false;
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const auto& a = hull[i];
    const auto& b = hull[(i + 1) % hull.size()];
    const double edge = std::hypot(b.x - a.x, b.y - a.y);
    if (cross(a, b, p) < -tol * edge) return false;
  }
  return true;
}

Eigen::Vector3d geodetic_to_ecef(const GeodeticFix& fix) {
  if (!(std::abs(fix.latitude) <= 90.0) || !(std::abs(fix.longitude) <= 180.0) ||
      !std::isfinite(fix.altitude)) {
    throw Error(Errc::InvalidArgument, "geodetic fix out of range");
  }
  constexpr double a = wgs84::kSemiMajorAxis;
  constexpr double f = wgs84::kFlattening;
  constexpr double e2 = f * (2.0 - f);
  const double lat = fix.latitude * M_PI / 180.0;
  const double lon = fix.longitude * M_PI / 180.0;
  const double sin_lat = std::sin(lat);
  const double cos_lat = std::cos(lat);
  const double n = a / std::sqrt(1.0 - e2 * sin_lat * sin_lat);
  return {(n + fix.altitude) * cos_lat * std::cos(lon), (n + fix.altitude) * cos_lat * std::sin(lon),
          (n * (1.0 - e2) + fix.altitude) * sin_lat};
}

Position geodetic_to_enu(const GeodeticFix& fix, const GeodeticFix& origin) {
  const Eigen::Vector3d d = geodetic_to_ecef(fix) - geodetic_to_ecef(origin);
  const double lat = origin.latitude * M_PI / 180.0;
  const double lon = origin.longitude * M_PI / 180.0;
  const double sl = std::sin(lat), cl = std::cos(lat);
  const double so = std::sin(lon), co = std::cos(lon);
  const double east = -so * d.x() + co * d.y();
  const double north = -sl * co * d.x() - sl * so * d.y() + cl * d.z();
  const double up = cl * co * d.x() + cl * so * d.y() + sl * d.z();
  return {east, north, up};
}

Position AffineAlignment::apply(const Position& p) const noexcept {
  return Position::from(rotation * p.vec() + translation);
}

AffineAlignment AffineAlignment::inverse() const {
  AffineAlignment inv;
  inv.rotation = rotation.transpose();
  inv.translation = -(inv.rotation * translation);
  return inv;
}

bool AffineAlignment::orthonormal(double tol) const noexcept {
  return (rotation.transpose() * rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <= tol;
}

AffineAlignment fit_alignment(std::span<const std::pair<Position, Position>> pairs) {
  if (pairs.size() < 3) throw Error(Errc::DegenerateGeometry, "need at least 3 tie points");
  const double n = static_cast<double>(pairs.size());
  Eigen::Vector3d src_mean = Eigen::Vector3d::Zero();
  Eigen::Vector3d dst_mean = Eigen::Vector3d::Zero();
  for (const auto& [enu, local] : pairs) {
    src_mean += enu.vec();
    dst_mean += local.vec();
  }
  src_mean /= n;
  dst_mean /= n;

  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  Eigen::Matrix3d src_scatter = Eigen::Matrix3d::Zero();
  for (const auto& [enu, local] : pairs) {
    const Eigen::Vector3d s = enu.vec() - src_mean;
    cov += (local.vec() - dst_mean) * s.transpose();
    src_scatter += s * s.transpose();
  }

  // Collinear (or coincident) tie points leave a rotation about their line unresolved.
  const Eigen::JacobiSVD<Eigen::Matrix3d> scatter_svd(src_scatter);
  const auto sv = scatter_svd.singularValues();
  if (!(sv(0) > 0.0) || sv(1) <= 1e-12 * sv(0)) {
    throw Error(Errc::DegenerateGeometry, "tie points are collinear");
  }

  const Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) d(2, 2) = -1.0;

  AffineAlignment out;
  out.rotation = svd.matrixU() * d * svd.matrixV().transpose();
  out.translation = dst_mean - out.rotation * src_mean;
  return out;
}

}  // namespace ultdoa
