#pragma once

// Reference computations written independently of the library, used as
// oracles by the unit tests.

#include <cmath>
#include <functional>
#include <vector>

namespace oracle {

/// Classic RK4 for x' = f(x) on [0, T], returning every node.
inline std::vector<double> rk4(const std::function<double(double)>& f, double x0, double T,
                               long n) {
  std::vector<double> xs(static_cast<std::size_t>(n) + 1);
  const double h = T / static_cast<double>(n);
  double x = x0;
  xs[0] = x;
  for (long k = 0; k < n; ++k) {
    const double k1 = f(x);
    const double k2 = f(x + 0.5 * h * k1);
    const double k3 = f(x + 0.5 * h * k2);
    const double k4 = f(x + h * k3);
    x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    xs[static_cast<std::size_t>(k) + 1] = x;
  }
  return xs;
}

/// Terminal value of RK4 with n and 2n steps combined by Richardson
/// extrapolation, assuming an error of order h^p.
inline double rk4_richardson(const std::function<double(double)>& f, double x0, double T, long n,
                             double p) {
  const double coarse = rk4(f, x0, T, n).back();
  const double fine = rk4(f, x0, T, 2 * n).back();
  const double r = std::pow(2.0, p);
  return (r * fine - coarse) / (r - 1.0);
}

/// J(κ) = ∫ (|s-1|^κ - |s|^κ)² ds in closed form:
/// 2 (1 - cos πκ) Γ(κ+1)² / (Γ(2κ+2) cos πκ).
inline double cusp_integral_closed_form(double kappa) {
  const double c = std::cos(M_PI * kappa);
  const double g = std::tgamma(kappa + 1.0);
  return 2.0 * (1.0 - c) * g * g / (std::tgamma(2.0 * kappa + 2.0) * c);
}

/// Midpoint Riemann sum of (|s-1|^κ - |s|^κ)² over [-M, M] with n cells.
inline double cusp_integral_riemann(double kappa, double M, long n) {
  const double h = 2.0 * M / static_cast<double>(n);
  long double sum = 0.0L;
  for (long i = 0; i < n; ++i) {
    const double s = -M + (static_cast<double>(i) + 0.5) * h;
    const double d = std::pow(std::fabs(s - 1.0), kappa) - std::pow(std::fabs(s), kappa);
    sum += static_cast<long double>(d * d);
  }
  return static_cast<double>(sum) * h;
}

/// Leading-order tails of the same integrand beyond ±M: the integrand
/// behaves like κ² |s|^{2κ-2}.
inline double cusp_integral_tail(double kappa, double M) {
  return 2.0 * kappa * kappa * std::pow(M, 2.0 * kappa - 1.0) / (1.0 - 2.0 * kappa);
}

}  // namespace oracle
