#include "ultdoa/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "ultdoa/error.hpp"

namespace ultdoa {

namespace {

void require_values(std::span<const double> values) {
  if (values.empty()) throw Error(Errc::EmptyErrors, "no errors to summarize");
}

// Errors are distances: finite and non-negative.
void require_errors(std::span<const double> errors) {
  require_values(errors);
  for (double e : errors) {
    if (!(e >= 0.0) || !std::isfinite(e)) throw Error(Errc::InvalidArgument, "error values must be finite and >= 0");
  }
}

double interpolate_sorted(std::span<const double> sorted, double q) {
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

double percentile(std::span<const double> values, double q) {
  require_values(values);
  if (!(q >= 0.0 && q <= 1.0)) throw Error(Errc::InvalidArgument, "percentile fraction outside [0, 1]");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  return interpolate_sorted(sorted, q);
}

double mae(std::span<const double> errors) {
  require_errors(errors);
  return std::accumulate(errors.begin(), errors.end(), 0.0) / static_cast<double>(errors.size());
}

double ce90(std::span<const double> errors) {
  require_errors(errors);
  return percentile(errors, 0.9);
}

std::vector<CdfPoint> error_cdf(std::span<const double> errors) {
  require_errors(errors);
  std::vector<double> sorted(errors.begin(), errors.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<CdfPoint> cdf;
  cdf.reserve(sorted.size());
  const double denom = sorted.size() > 1 ? static_cast<double>(sorted.size() - 1) : 1.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double fraction = sorted.size() > 1 ? static_cast<double>(i) / denom : 1.0;
    cdf.push_back({sorted[i], fraction});
  }
  return cdf;
}

double cdf_quantile(std::span<const CdfPoint> cdf, double q) {
  if (cdf.empty()) throw Error(Errc::EmptyErrors, "empty CDF");
  if (q <= cdf.front().fraction) return cdf.front().error;
  for (std::size_t i = 1; i < cdf.size(); ++i) {
    const auto& a = cdf[i - 1];
    const auto& b = cdf[i];
    if (q <= b.fraction) {
      const double span = b.fraction - a.fraction;
      return span > 0.0 ? a.error + (q - a.fraction) / span * (b.error - a.error) : b.error;
    }
  }
  return cdf.back().error;
}

std::string cdf_to_csv(std::span<const CdfPoint> cdf) {
  std::ostringstream os;
  os.precision(17);
  os << "error_m,fraction\n";
  for (const auto& p : cdf) os << p.error << ',' << p.fraction << '\n';
  return os.str();
}

ErrorReport make_report(std::vector<double> errors) {
  require_errors(errors);
  ErrorReport r;
  r.mae = mae(errors);
  r.ce90 = ce90(errors);
  r.median = percentile(errors, 0.5);
  r.cdf = error_cdf(errors);
  r.errors = std::move(errors);
  return r;
}

}  // namespace ultdoa
