#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "cusp/noise.hpp"

namespace cusp {

/// Smooth, bounded, positive part of the drift.
///
/// Catalog members and their parameter vectors:
///   constant        {c}              h = c
///   logistic        {c, d}           h = c + d / (1 + x^2)
///   affine_clamped  {c, d, lo, hi}   h = m + r tanh((c + d x - m) / r),
///                                    m = (lo + hi) / 2, r = (hi - lo) / 2
/// Each member reports a lower bound b, an upper bound, and a bound H1 on
/// |h'| that hold on the whole real line.
class HFunction {
public:
  enum class Kind { constant, logistic, affine_clamped };

  HFunction() = default;

  static HFunction constant(double c);
  static HFunction logistic(double c, double d);
  static HFunction affine_clamped(double c, double d, double lo, double hi);
  /// Throws ConfigError on an unknown name or a wrong parameter count.
  static HFunction from_name(std::string_view name, const std::vector<double>& params);

  double operator()(double x) const;
  double derivative(double x) const;

  double lower_bound() const;
  double upper_bound() const;
  double derivative_bound() const;

  Kind kind() const { return kind_; }
  std::string name() const;
  const std::vector<double>& params() const { return params_; }

private:
  HFunction(Kind kind, std::vector<double> params) : kind_(kind), params_(std::move(params)) {}

  Kind kind_ = Kind::constant;
  std::vector<double> params_{1.0};
};

/// Problem instance: S(θ, x) = a |x - θ|^κ + h(x) observed on [0, T]
/// from x0, with θ ranging over (theta_lo, theta_hi).
struct CuspModel {
  double a = 1.0;
  double kappa = 0.25;
  HFunction h;
  double x0 = 0.0;
  double T = 1.0;
  double theta_lo = 0.0;
  double theta_hi = 1.0;

  double hurst() const { return kappa + 0.5; }
};

/// |r|^κ with a fast path for κ = 1/4 (two square roots).
///
/// All drift evaluations in the library go through this function so that
/// the likelihood kernels and the simulators agree bit for bit.
inline double cusp_power(double r, double kappa) {
  r = std::fabs(r);
  if (kappa == 0.25) return std::sqrt(std::sqrt(r));
  return std::pow(r, kappa);
}

/// S(θ, x) = a |x - θ|^κ + h(x); equals h(θ) at x = θ.
inline double drift(const CuspModel& model, double theta, double x) {
  return model.a * cusp_power(x - theta, model.kappa) + model.h(x);
}

enum class PathKind { observation, deterministic, wiener };

/// Trajectory on the uniform grid t_k = k T / N, k = 0..N.
struct Path {
  std::vector<double> times;
  std::vector<double> values;
  PathKind kind = PathKind::observation;

  std::size_t steps() const { return times.empty() ? 0 : times.size() - 1; }
  double horizon() const { return times.empty() ? 0.0 : times.back(); }
  double dt() const { return horizon() / static_cast<double>(steps()); }
};

std::vector<double> uniform_grid(double T, std::size_t n_steps);

/// Throws ShapeError unless both paths sit on the same time grid.
void require_same_grid(const Path& lhs, const Path& rhs);

/// Throws ShapeError unless `path` has a uniform grid starting at 0.
void require_uniform_grid(const Path& path);

/// CSV with header `t,value`, 17 significant digits.
void write_path_csv(const Path& path, std::ostream& out);
Path read_path_csv(std::istream& in, PathKind kind);

// ---------------------------------------------------------------------------
// Validation

struct ValidationOptions {
  /// Accept a = 0 (closed-form ODE oracles in tests only).
  bool allow_zero_amplitude = false;
  /// Check theta_hi < x_T(θ) on a dense θ grid instead of the two endpoints.
  bool dense_theta_check = false;
  std::size_t dense_theta_points = 64;
  std::size_t ode_steps = 20000;
  std::size_t range_samples = 4001;
};

struct ValidationReport {
  /// Violated clause names in the order they were checked.
  std::vector<std::string> violations;
  /// Smallest x_T(θ) over the checked θ values.
  double min_terminal_state = 0.0;
  /// L implied for |S(θ, x)| <= L (1 + |x|^κ).
  double growth_constant = 0.0;

  bool ok() const { return violations.empty(); }
};

/// Checks the model conditions with claimed bounds b and H1.
/// Throws InvalidFunctionError if h is not finite on the sampled range.
ValidationReport validate_model(const CuspModel& model, double b, double H1,
                                const ValidationOptions& options = {});

/// Uses the catalog bounds of model.h.
ValidationReport validate_model(const CuspModel& model, const ValidationOptions& options = {});

// ---------------------------------------------------------------------------
// Deterministic limit

/// x_t(θ) by fixed-step RK4, drift evaluated exactly at the cusp.
/// Throws NumericalError if the result is not strictly increasing.
Path solve_limit_ode(const CuspModel& model, double theta, std::size_t n_steps);

/// Explicit Euler variant on the same grid.
Path solve_limit_ode_euler(const CuspModel& model, double theta, std::size_t n_steps);

/// t(x) = ∫_{x0}^{x} dy / S(θ, y), split at y = θ.
/// Throws DomainError when x lies outside [x0, x_T(θ)].
double time_of_level(const CuspModel& model, double theta, double x);

// ---------------------------------------------------------------------------
// Stochastic paths

Path simulate_wiener(const NoiseStream& stream, std::size_t n_steps, double T);

/// Euler-Maruyama: X_{k+1} = X_k + S(θ, X_k) dt + ε ΔW_k.
Path simulate_sde(const CuspModel& model, double theta, double eps, const Path& wiener);

/// max_k |X_k - x_k|.
double sup_deviation(const Path& observed, const Path& deterministic);

/// max_k |W_k|.
double sup_abs(const Path& path);

/// Trapezoidal ∫_0^T g(X_t) dt.
double occupation_integral(const Path& observed, const std::function<double(double)>& g);

/// ∫ g(x) ℓ0(x) dx = ∫_{x0}^{x_T} g(x) / S(θ0, x) dx, with x_T from an
/// RK4 solve of `ode_steps` steps.
double occupation_limit(const CuspModel& model, double theta0,
                        const std::function<double(double)>& g, std::size_t ode_steps = 200000);

/// Steps for the noise-resolving rule dt <= ε², floored at dt = T / 1e6 and
/// never fewer than 100 steps.
std::size_t steps_for_eps(double T, double eps);

}  // namespace cusp
