#pragma once

#include <span>
#include <utility>
#include <vector>

namespace cusp::stats {

/// Two-sample Kolmogorov-Smirnov statistic sup_x |F_a(x) - F_b(x)| by a
/// sorted merge. Throws DomainError if either sample is empty.
double ks_distance(std::span<const double> a, std::span<const double> b);

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
};

/// Least squares of ln(rmse) on ln(eps). Needs >= 3 pairs; throws
/// DomainError on non-positive values.
RateFit rate_regression(std::span<const std::pair<double, double>> eps_rmse);

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
  std::size_t n = 0;
};

MeanSe mean_se(std::span<const double> xs);

/// Unbiased sample variance.
double variance(std::span<const double> xs);

/// Linear-interpolation quantile (type 7), q in [0, 1].
double quantile(std::vector<double> xs, double q);

inline double median(std::vector<double> xs) { return quantile(std::move(xs), 0.5); }

/// Two-sample KS 95% critical value 1.358 sqrt((n + m) / (n m)).
double ks_critical_95(std::size_t n, std::size_t m);

}  // namespace cusp::stats
