#include "cusp/kernels.hpp"

#include <cmath>
#include <cstddef>

#include "cusp/error.hpp"

namespace cusp::kernels {

namespace {

struct QuarterPower {
  double operator()(double r) const { return std::sqrt(std::sqrt(std::fabs(r))); }
};

struct GeneralPower {
  double kappa;
  double operator()(double r) const { return std::pow(std::fabs(r), kappa); }
};

template <class Power>
double llr_impl(const LikelihoodTerms& t, double theta, Power power) {
  const std::size_t n = t.x.size();
  const double* x = t.x.data();
  const double* dx = t.dx.data();
  const double* h = t.h.data();
  const double* s_ref = t.s_ref.data();
  double martingale = 0.0;
  double energy = 0.0;
  // The simd reduction fixes a lane-wise summation order at compile time, so
  // the result is still reproducible and identical across the sweep variants.
#pragma omp simd reduction(+ : martingale, energy)
  for (std::size_t k = 0; k < n; ++k) {
    const double s = t.a * power(x[k] - theta) + h[k];
    const double d = s - s_ref[k];
    martingale += d * dx[k];
    energy += d * (s + s_ref[k]);
  }
  return (martingale - 0.5 * t.dt * energy) * t.inv_eps_sq;
}

}  // namespace

LikelihoodTerms prepare_terms(const Path& observed, const CuspModel& model, double theta_ref,
                              double eps) {
  if (!(eps > 0.0)) throw DomainError("likelihood needs eps > 0");
  require_uniform_grid(observed);
  const std::size_t n = observed.steps();
  LikelihoodTerms t;
  t.x.resize(n);
  t.dx.resize(n);
  t.h.resize(n);
  t.s_ref.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double xk = observed.values[k];
    t.x[k] = xk;
    t.dx[k] = observed.values[k + 1] - xk;
    t.h[k] = model.h(xk);
    t.s_ref[k] = model.a * cusp_power(xk - theta_ref, model.kappa) + t.h[k];
  }
  t.theta_ref = theta_ref;
  t.dt = observed.dt();
  t.inv_eps_sq = 1.0 / (eps * eps);
  t.a = model.a;
  t.kappa = model.kappa;
  return t;
}

double llr_against_reference(const LikelihoodTerms& terms, double theta) {
  if (terms.kappa == 0.25) return llr_impl(terms, theta, QuarterPower{});
  return llr_impl(terms, theta, GeneralPower{terms.kappa});
}

void llr_sweep_serial(const LikelihoodTerms& terms, std::span<const double> thetas,
                      std::span<double> out) {
  if (out.size() != thetas.size()) throw ShapeError("llr sweep: output size mismatch");
  for (std::size_t i = 0; i < thetas.size(); ++i) out[i] = llr_against_reference(terms, thetas[i]);
}

void llr_sweep_parallel(const LikelihoodTerms& terms, std::span<const double> thetas,
                        std::span<double> out) {
  if (out.size() != thetas.size()) throw ShapeError("llr sweep: output size mismatch");
  const auto n = static_cast<std::ptrdiff_t>(thetas.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = llr_against_reference(terms, thetas[i]);
}

double squared_distance(std::span<const double> observed, std::span<const double> reference,
                        double dt) {
  if (observed.size() != reference.size()) throw ShapeError("squared_distance: size mismatch");
  const std::size_t n = observed.size();
  if (n < 2) return 0.0;
  double interior = 0.0;
  for (std::size_t k = 1; k + 1 < n; ++k) {
    const double d = observed[k] - reference[k];
    interior += d * d;
  }
  const double d0 = observed[0] - reference[0];
  const double dn = observed[n - 1] - reference[n - 1];
  return dt * (interior + 0.5 * (d0 * d0 + dn * dn));
}

}  // namespace cusp::kernels
