#include "cusp/likelihood.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include "json.hpp"

#include "cusp/error.hpp"
#include "cusp/kernels.hpp"

namespace cusp {

namespace {

/// |s-1|^κ - |s|^κ, written to avoid cancellation for large |s|.
double cusp_difference(double s, double kappa) {
  if (s > 2.0) return std::pow(s, kappa) * std::expm1(kappa * std::log1p(-1.0 / s));
  if (s < -1.0) {
    const double t = -s;
    return std::pow(t, kappa) * std::expm1(kappa * std::log1p(1.0 / t));
  }
  return std::pow(std::fabs(s - 1.0), kappa) - std::pow(std::fabs(s), kappa);
}

double integrate_piece(double kappa, double lo, double hi) {
  static thread_local boost::math::quadrature::tanh_sinh<double> rule;
  const auto f = [kappa](double s) {
    const double d = cusp_difference(s, kappa);
    return d * d;
  };
  return rule.integrate(f, lo, hi, 1e-14);
}

void check_inside(const CuspModel& model, std::span<const double> thetas,
                  std::span<const double> abscissae) {
  std::ostringstream bad;
  std::size_t n_bad = 0;
  for (std::size_t i = 0; i < thetas.size(); ++i) {
    if (!(thetas[i] >= model.theta_lo && thetas[i] <= model.theta_hi)) {
      if (n_bad++ < 16) bad << (n_bad > 1 ? ", " : "") << abscissae[i];
    }
  }
  if (n_bad > 0) {
    std::ostringstream msg;
    msg << n_bad << " abscissa(e) map outside Θ=[" << model.theta_lo << ", " << model.theta_hi
        << "]: " << bad.str() << (n_bad > 16 ? ", ..." : "");
    throw DomainError(msg.str());
  }
}

}  // namespace

CuspIntegral cusp_integral(double kappa) {
  if (!(kappa > 0.0 && kappa < 0.5)) {
    std::ostringstream msg;
    msg << "cusp integral diverges for kappa=" << kappa << " (needs 0 < kappa < 1/2)";
    throw DomainError(msg.str());
  }
  const double p = 1.0 - 2.0 * kappa;
  double M = std::pow(1e8 * kappa * kappa / p, 1.0 / p);
  M = std::min(std::max(M, 1e3), 1e6);

  double body = integrate_piece(kappa, 0.0, 1.0);
  // Geometric pieces away from the cusps at 0 and 1; the integrand is
  // symmetric under s -> 1 - s but both sides are integrated.
  for (double lo = 0.0, width = 1.0; lo < M; lo += width, width *= 2.0) {
    const double hi = std::min(lo + width, M);
    body += integrate_piece(kappa, -hi, -lo);
    body += integrate_piece(kappa, 1.0 + lo, 1.0 + hi);
  }

  // Integrand ~ κ² t^{2κ-2} (1 + (κ-1)/t + c2/t² + ...) in both tails.
  const double k2 = kappa * kappa;
  const double c2 = 0.25 * (kappa - 1.0) * (kappa - 1.0) + (kappa - 1.0) * (kappa - 2.0) / 3.0;
  const double tail = 2.0 * k2 * (std::pow(M, 2.0 * kappa - 1.0) / p - 0.5 * std::pow(M, 2.0 * kappa - 2.0));
  const double next = 2.0 * k2 * c2 * std::pow(M, 2.0 * kappa - 3.0) / (3.0 - 2.0 * kappa);

  CuspIntegral out;
  out.cutoff = M;
  out.tail = tail;
  out.residual = std::fabs(next);
  out.value = body + tail;
  return out;
}

LimitConstants limit_constants(const CuspModel& model, double theta0) {
  if (!(theta0 >= model.theta_lo && theta0 <= model.theta_hi))
    throw DomainError("limit_constants: theta0 outside Θ");
  const double J = cusp_integral(model.kappa).value;
  const double hval = model.h(theta0);
  if (!(hval > 0.0) || !std::isfinite(hval)) throw InvalidFunctionError("h(theta0) must be positive and finite");
  LimitConstants c;
  c.H = model.hurst();
  c.gamma_sq = model.a * model.a * J / hval;
  c.gamma = std::pow(c.gamma_sq, 1.0 / (2.0 * c.H));
  return c;
}

double log_likelihood_ratio(const Path& observed, const CuspModel& model, double theta_num,
                            double theta_den, double eps) {
  const auto terms = kernels::prepare_terms(observed, model, theta_den, eps);
  return kernels::llr_against_reference(terms, theta_num);
}

LogLikelihoodCurve normalized_curve(const Path& observed, const CuspModel& model, double theta0,
                                    double eps, std::span<const double> u_grid, bool use_phi) {
  LogLikelihoodCurve curve;
  curve.ref_theta = theta0;
  curve.eps = eps;
  curve.H = model.hurst();
  curve.scale = CurveScale::u_units;
  curve.uses_phi = use_phi;
  curve.theta_per_u = std::pow(eps, 1.0 / curve.H);
  if (use_phi) curve.theta_per_u /= limit_constants(model, theta0).gamma;
  curve.grid.assign(u_grid.begin(), u_grid.end());

  std::vector<double> thetas(u_grid.size());
  for (std::size_t i = 0; i < u_grid.size(); ++i) thetas[i] = curve.theta_at(i);
  check_inside(model, thetas, u_grid);

  const auto terms = kernels::prepare_terms(observed, model, theta0, eps);
  curve.log_z.resize(thetas.size());
  kernels::llr_sweep(terms, thetas, curve.log_z);
  return curve;
}

LogLikelihoodCurve theta_curve(const Path& observed, const CuspModel& model, double ref_theta,
                               double eps, std::span<const double> thetas) {
  check_inside(model, thetas, thetas);
  LogLikelihoodCurve curve;
  curve.ref_theta = ref_theta;
  curve.eps = eps;
  curve.H = model.hurst();
  curve.scale = CurveScale::raw_theta;
  curve.grid.assign(thetas.begin(), thetas.end());
  const auto terms = kernels::prepare_terms(observed, model, ref_theta, eps);
  curve.log_z.resize(thetas.size());
  kernels::llr_sweep(terms, thetas, curve.log_z);
  return curve;
}

void write_curve_csv(const LogLikelihoodCurve& curve, std::ostream& out) {
  out << (curve.scale == CurveScale::u_units ? "u,logZ\n" : "theta,logZ\n");
  char buf[64];
  for (std::size_t i = 0; i < curve.grid.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", curve.grid[i], curve.log_z[i]);
    out << buf;
  }
}

void write_curve_sidecar(const LogLikelihoodCurve& curve, double gamma_sq, std::ostream& out) {
  nlohmann::json j;
  j["ref_theta"] = curve.ref_theta;
  j["eps"] = curve.eps;
  j["H"] = curve.H;
  j["gamma_sq"] = gamma_sq;
  j["scale"] = curve.scale == CurveScale::u_units ? (curve.uses_phi ? "u_units_phi" : "u_units")
                                                  : "raw_theta";
  out << j.dump(2) << '\n';
}

}  // namespace cusp
