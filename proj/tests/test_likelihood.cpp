#include <cmath>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "oracles.hpp"

#include "cusp/error.hpp"
#include "cusp/likelihood.hpp"
#include "cusp/stats.hpp"

using namespace cusp;

namespace {

CuspModel reference_model() {
  CuspModel m;
  m.a = 1.0;
  m.kappa = 0.25;
  m.h = HFunction::constant(1.0);
  m.x0 = 0.0;
  m.T = 3.0;
  m.theta_lo = 0.5;
  m.theta_hi = 1.5;
  return m;
}

Path observe(const CuspModel& m, double eps, std::uint64_t rep, std::uint64_t seed = 2024) {
  const std::size_t n = steps_for_eps(m.T, eps);
  return simulate_sde(m, 1.0, eps, simulate_wiener(NoiseStream{seed, rep}, n, m.T));
}

}  // namespace

TEST_CASE("llr identities") {
  const auto m = reference_model();
  const auto x = observe(m, 0.05, 1);
  CHECK(log_likelihood_ratio(x, m, 1.1, 1.1, 0.05) == 0.0);
  for (auto [a, b] : {std::pair{0.9, 1.2}, std::pair{0.5, 1.5}, std::pair{1.0, 1.0001}}) {
    const double ab = log_likelihood_ratio(x, m, a, b, 0.05);
    const double ba = log_likelihood_ratio(x, m, b, a, 0.05);
    CHECK(ab == -ba);
  }
  // Telescoping holds up to rounding of three separately accumulated sums.
  const double l13 = log_likelihood_ratio(x, m, 0.8, 1.3, 0.05);
  const double l12 = log_likelihood_ratio(x, m, 0.8, 1.05, 0.05);
  const double l23 = log_likelihood_ratio(x, m, 1.05, 1.3, 0.05);
  CHECK(l13 == doctest::Approx(l12 + l23).epsilon(1e-10));
}

TEST_CASE("llr against a direct transcription of the Itô sums") {
  const auto m = reference_model();
  const double eps = 0.1;
  const auto x = observe(m, eps, 7);
  const double tn = 0.93, td = 1.21;
  long double a = 0.0L, b = 0.0L;
  const double dt = x.dt();
  for (std::size_t k = 0; k + 1 < x.values.size(); ++k) {
    const double sn = std::pow(std::fabs(x.values[k] - tn), 0.25) + 1.0;
    const double sd = std::pow(std::fabs(x.values[k] - td), 0.25) + 1.0;
    a += (sn - sd) * (x.values[k + 1] - x.values[k]);
    b += sn * sn - sd * sd;
  }
  const double expected = static_cast<double>((a - 0.5L * dt * b) / (eps * eps));
  CHECK(log_likelihood_ratio(x, m, tn, td, eps) == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("llr rejects a non-uniform grid") {
  const auto m = reference_model();
  auto x = observe(m, 0.1, 1);
  x.times[5] += 1e-3;
  CHECK_THROWS_AS(log_likelihood_ratio(x, m, 1.0, 1.1, 0.1), ShapeError);
}

TEST_CASE("true parameter dominates a shifted one") {
  const auto m = reference_model();
  int positive = 0;
  for (std::uint64_t r = 0; r < 500; ++r)
    positive += log_likelihood_ratio(observe(m, 0.01, r), m, 1.0, 1.1, 0.01) > 0.0 ? 1 : 0;
  CHECK(positive >= 495);
}

TEST_CASE("normalized curve anchor, grid map and rejection") {
  const auto m = reference_model();
  const double eps = 0.02;
  const auto x = observe(m, eps, 3);
  const std::vector<double> us{-2.0, -0.5, 0.0, 0.5, 2.0};
  const auto curve = normalized_curve(x, m, 1.0, eps, us, false);
  CHECK(curve.log_z[2] == 0.0);
  CHECK(curve.theta_at(4) == doctest::Approx(1.0 + 2.0 * std::pow(eps, 1.0 / 0.75)));
  for (double v : curve.log_z) CHECK(std::isfinite(v));

  const auto phi = normalized_curve(x, m, 1.0, eps, us, true);
  CHECK(phi.log_z[2] == 0.0);
  const double gamma = limit_constants(m, 1.0).gamma;
  CHECK(phi.theta_per_u == doctest::Approx(std::pow(eps, 1.0 / 0.75) / gamma));

  const std::vector<double> wide{-1.0, 0.0, 1e6};
  try {
    normalized_curve(x, m, 1.0, eps, wide, false);
    FAIL("expected a domain error");
  } catch (const DomainError& e) {
    CHECK(std::string(e.what()).find("1e+06") != std::string::npos);
  }
}

TEST_CASE("normalized likelihood has unit mean") {
  // E Z_ε(u) = 1 under θ0: the likelihood ratio is a mean-one martingale.
  const auto m = reference_model();
  const double eps = 0.02;
  const std::vector<double> us{-1.0, 1.0};
  std::vector<double> z_minus, z_plus;
  for (std::uint64_t r = 0; r < 1000; ++r) {
    const auto c = normalized_curve(observe(m, eps, r, 99), m, 1.0, eps, us, false);
    z_minus.push_back(std::exp(c.log_z[0]));
    z_plus.push_back(std::exp(c.log_z[1]));
  }
  for (const auto* z : {&z_minus, &z_plus}) {
    const auto ms = stats::mean_se(*z);
    CHECK(std::fabs(ms.mean - 1.0) < 4.0 * ms.se + 0.02);
  }
}

TEST_CASE("cusp integral against closed form and brute force") {
  for (double kappa : {0.1, 0.25, 0.4}) {
    const auto J = cusp_integral(kappa);
    CHECK(J.value == doctest::Approx(oracle::cusp_integral_closed_form(kappa)).epsilon(1e-9));
    CHECK(J.residual < 1e-8 * J.value);
  }
  CHECK(cusp_integral(0.25).value == doctest::Approx(0.511988584660498593).epsilon(1e-12));

  const double M = 1e4;
  const double brute = oracle::cusp_integral_riemann(0.25, M, 100'000'000) +
                       oracle::cusp_integral_tail(0.25, M);
  const auto c = limit_constants(reference_model(), 1.0);
  CHECK(std::fabs(c.gamma_sq - brute) / brute < 5e-5);
}

TEST_CASE("limit constants scaling and errors") {
  auto m = reference_model();
  const auto base = limit_constants(m, 1.0);
  CHECK(base.H == 0.75);
  CHECK(base.gamma == doctest::Approx(std::pow(base.gamma_sq, 1.0 / 1.5)).epsilon(1e-15));

  auto doubled_a = m;
  doubled_a.a = 2.0;
  CHECK(limit_constants(doubled_a, 1.0).gamma_sq == 4.0 * base.gamma_sq);

  auto doubled_h = m;
  doubled_h.h = HFunction::constant(2.0);
  CHECK(limit_constants(doubled_h, 1.0).gamma_sq == base.gamma_sq / 2.0);

  CHECK_THROWS_AS(cusp_integral(0.5), DomainError);
  CHECK_THROWS_AS(cusp_integral(0.7), DomainError);
  CHECK_THROWS_AS(limit_constants(m, 2.0), DomainError);
}

TEST_CASE("curve serialization") {
  const auto m = reference_model();
  const auto x = observe(m, 0.05, 2);
  const std::vector<double> us{-1.0, 0.0, 1.0};
  const auto curve = normalized_curve(x, m, 1.0, 0.05, us, false);
  std::ostringstream csv;
  write_curve_csv(curve, csv);
  CHECK(csv.str().rfind("u,logZ\n", 0) == 0);

  std::ostringstream side;
  write_curve_sidecar(curve, 0.5, side);
  const auto j = nlohmann::json::parse(side.str());
  CHECK(j.at("ref_theta").get<double>() == 1.0);
  CHECK(j.at("H").get<double>() == 0.75);
  CHECK(j.at("gamma_sq").get<double>() == 0.5);
  CHECK(j.at("scale").get<std::string>() == "u_units");

  const std::vector<double> thetas{0.9, 1.0, 1.1};
  std::ostringstream raw;
  write_curve_csv(theta_curve(x, m, 1.0, 0.05, thetas), raw);
  CHECK(raw.str().rfind("theta,logZ\n", 0) == 0);
}
