#pragma once

#include <span>
#include <string>
#include <vector>

namespace ultdoa {

/// Linear interpolation between closest ranks: h = (n - 1) q over the
/// sorted errors (the numpy "linear" rule). q in [0, 1].
double percentile(std::span<const double> values, double q);

double mae(std::span<const double> errors);
/// 90th percentile of the horizontal error distribution.
double ce90(std::span<const double> errors);

struct CdfPoint {
  double error = 0.0;
  double fraction = 0.0;
};

/// Sorted errors with rank fractions i / (n - 1) (a single error maps to
/// 1.0), so that interpolating the table at q reproduces percentile(q).
std::vector<CdfPoint> error_cdf(std::span<const double> errors);
double cdf_quantile(std::span<const CdfPoint> cdf, double q);
std::string cdf_to_csv(std::span<const CdfPoint> cdf);

struct ErrorReport {
  std::vector<double> errors;
  double mae = 0.0;
  double ce90 = 0.0;
  double median = 0.0;
  std::vector<CdfPoint> cdf;
};

/// Throws Error{EmptyErrors}.
ErrorReport make_report(std::vector<double> errors);

}  // namespace ultdoa
