#pragma once

#include <span>
#include <vector>

#include "cusp/model.hpp"

namespace cusp::kernels {

/// Per-path quantities shared by every likelihood-ratio evaluation against
/// one reference parameter. Built once per (path, reference θ, ε).
struct LikelihoodTerms {
  std::vector<double> x;      // X_k at left endpoints, k = 0..N-1
  std::vector<double> dx;     // X_{k+1} - X_k
  std::vector<double> h;      // h(X_k)
  std::vector<double> s_ref;  // S(θ_ref, X_k)
  double theta_ref = 0.0;
  double dt = 0.0;
  double inv_eps_sq = 0.0;
  double a = 0.0;
  double kappa = 0.0;
};

/// Throws ShapeError on a non-uniform grid, DomainError on eps <= 0.
LikelihoodTerms prepare_terms(const Path& observed, const CuspModel& model, double theta_ref,
                              double eps);

/// ln L(θ) - ln L(θ_ref), Itô sums with left-endpoint drift:
///   Σ (S_θ - S_ref) ΔX / ε² - dt / (2ε²) Σ (S_θ - S_ref)(S_θ + S_ref).
double llr_against_reference(const LikelihoodTerms& terms, double theta);

/// Reference implementation: one θ after another.
void llr_sweep_serial(const LikelihoodTerms& terms, std::span<const double> thetas,
                      std::span<double> out);

/// OpenMP over θ nodes. Each node's sum runs in the same order as the serial
/// kernel, so the output is bitwise identical for any thread count.
void llr_sweep_parallel(const LikelihoodTerms& terms, std::span<const double> thetas,
                        std::span<double> out);

/// Sweep dispatcher used by the estimators.
inline void llr_sweep(const LikelihoodTerms& terms, std::span<const double> thetas,
                      std::span<double> out) {
  llr_sweep_parallel(terms, thetas, out);
}

/// ∫_0^T (X_t - x_t)^2 dt by the trapezoid rule.
double squared_distance(std::span<const double> observed, std::span<const double> reference,
                        double dt);

}  // namespace cusp::kernels
