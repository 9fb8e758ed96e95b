#include "cusp/stats.hpp"

#include <algorithm>
#include <cmath>

#include "cusp/error.hpp"

namespace cusp::stats {

double ks_distance(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw DomainError("ks_distance needs two non-empty samples");
  std::vector<double> x(a.begin(), a.end());
  std::vector<double> y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double nx = static_cast<double>(x.size());
  const double ny = static_cast<double>(y.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < x.size() && j < y.size()) {
    // Step past every copy of the smallest pending value in both samples
    // before comparing, so ties are handled exactly.
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    d = std::max(d, std::fabs(static_cast<double>(i) / nx - static_cast<double>(j) / ny));
  }
  return d;
}

RateFit rate_regression(std::span<const std::pair<double, double>> eps_rmse) {
  if (eps_rmse.size() < 3) throw DomainError("rate_regression needs at least 3 points");
  std::vector<double> lx;
  std::vector<double> ly;
  for (const auto& [eps, rmse] : eps_rmse) {
    if (!(eps > 0.0) || !(rmse > 0.0)) throw DomainError("rate_regression needs positive eps and rmse");
    lx.push_back(std::log(eps));
    ly.push_back(std::log(rmse));
  }
  const double n = static_cast<double>(lx.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t k = 0; k < lx.size(); ++k) {
    mx += lx[k];
    my += ly[k];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t k = 0; k < lx.size(); ++k) {
    sxx += (lx[k] - mx) * (lx[k] - mx);
    sxy += (lx[k] - mx) * (ly[k] - my);
  }
  RateFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double rss = 0.0;
  for (std::size_t k = 0; k < lx.size(); ++k) {
    const double r = ly[k] - fit.intercept - fit.slope * lx[k];
    rss += r * r;
  }
  fit.slope_se = std::sqrt(rss / (n - 2.0) / sxx);
  return fit;
}

MeanSe mean_se(std::span<const double> xs) {
  MeanSe out;
  out.n = xs.size();
  if (xs.empty()) return out;
  double sum = 0.0;
  for (double x : xs) sum += x;
  out.mean = sum / static_cast<double>(xs.size());
  out.se = xs.size() > 1 ? std::sqrt(variance(xs) / static_cast<double>(xs.size())) : 0.0;
  return out;
}

double variance(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  double sum = 0.0;
  for (double x : xs) sum += x;
  const double mean = sum / static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(xs.size() - 1);
}

double quantile(std::vector<double> xs, double q) {
  if (xs.empty()) throw DomainError("quantile of an empty sample");
  std::sort(xs.begin(), xs.end());
  const double pos = q * static_cast<double>(xs.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, xs.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return xs[lo] + frac * (xs[hi] - xs[lo]);
}

double ks_critical_95(std::size_t n, std::size_t m) {
  const double a = static_cast<double>(n);
  const double b = static_cast<double>(m);
  return 1.358 * std::sqrt((a + b) / (a * b));
}

}  // namespace cusp::stats
