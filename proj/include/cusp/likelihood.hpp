#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "cusp/model.hpp"

namespace cusp {

/// Γ² = a² J(κ) / h(θ0) and γ = Γ^{1/H}, which link Z_ε(u) to the
/// standardized limit Z(u) = exp(W^H(u) - |u|^{2H} / 2).
struct LimitConstants {
  double gamma_sq = 0.0;
  double gamma = 0.0;
  double H = 0.0;
};

/// J(κ) = ∫_R (|s-1|^κ - |s|^κ)² ds.
struct CuspIntegral {
  double value = 0.0;
  /// Cutoff M: quadrature on [-M, 1+M], analytic tail beyond.
  double cutoff = 0.0;
  double tail = 0.0;
  /// Magnitude of the first neglected tail term.
  double residual = 0.0;
};

/// Throws DomainError for κ outside (0, 1/2) (the integral diverges for κ >= 1/2).
CuspIntegral cusp_integral(double kappa);

LimitConstants limit_constants(const CuspModel& model, double theta0);

/// ln L(θ_num, X) - ln L(θ_den, X) with the Itô discretization.
double log_likelihood_ratio(const Path& observed, const CuspModel& model, double theta_num,
                            double theta_den, double eps);

enum class CurveScale { raw_theta, u_units };

/// u ↦ ln Z_ε(u) (or θ ↦ ln L(θ)/L(θ_ref)) on a grid.
struct LogLikelihoodCurve {
  double ref_theta = 0.0;
  double eps = 0.0;
  double H = 0.0;
  CurveScale scale = CurveScale::u_units;
  /// θ per unit of u: ε^{1/H}, or ε^{1/H} / γ when the φ_ε normalization is used.
  double theta_per_u = 1.0;
  bool uses_phi = false;
  std::vector<double> grid;
  std::vector<double> log_z;

  double theta_at(std::size_t i) const {
    return scale == CurveScale::u_units ? ref_theta + theta_per_u * grid[i] : grid[i];
  }
};

/// ln Z_ε(u_i) with θ(u) = θ0 + ε^{1/H} u, or θ0 + φ_ε u when use_phi is
/// set. Throws DomainError listing any abscissae mapped outside [θ_lo, θ_hi].
LogLikelihoodCurve normalized_curve(const Path& observed, const CuspModel& model, double theta0,
                                    double eps, std::span<const double> u_grid, bool use_phi);

/// Same curve in raw θ units.
LogLikelihoodCurve theta_curve(const Path& observed, const CuspModel& model, double ref_theta,
                               double eps, std::span<const double> thetas);

/// CSV `u,logZ` or `theta,logZ`, 17 significant digits.
void write_curve_csv(const LogLikelihoodCurve& curve, std::ostream& out);

/// JSON sidecar {ref_theta, eps, H, gamma_sq, scale}.
void write_curve_sidecar(const LogLikelihoodCurve& curve, double gamma_sq, std::ostream& out);

}  // namespace cusp
