#include <algorithm>
#include <cmath>

#include "doctest.h"

#include "cusp/error.hpp"
#include "cusp/estimators.hpp"
#include "cusp/kernels.hpp"
#include "cusp/likelihood.hpp"

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

Path observe(const CuspModel& m, double eps, std::uint64_t rep, double theta = 1.0) {
  const std::size_t n = steps_for_eps(m.T, eps);
  return simulate_sde(m, theta, eps, simulate_wiener(NoiseStream{31, rep}, n, m.T));
}

}  // namespace

TEST_CASE("estimator names") {
  for (auto k : {EstimatorKind::mle, EstimatorKind::bayes, EstimatorKind::mde})
    CHECK(estimator_from_string(to_string(k)) == k);
  CHECK_THROWS_AS(estimator_from_string("median"), ConfigError);
}

TEST_CASE("grid search: ties, invariance and monotone refinement") {
  GridSearchOptions opt;
  opt.target_resolution = 1e-6;
  const BatchObjective flat = [](std::size_t, std::span<const double> t, std::span<double> out) {
    for (std::size_t i = 0; i < t.size(); ++i) out[i] = 3.0;
  };
  const auto tie = hierarchical_argmax(flat, 0.5, 1.5, opt);
  CHECK(tie.argmax == 0.5);
  CHECK(tie.tie);

  const auto peak = [](double t) { return -std::pow(std::fabs(t - 0.8123), 0.25); };
  const BatchObjective f = [&](std::size_t, std::span<const double> t, std::span<double> out) {
    for (std::size_t i = 0; i < t.size(); ++i) out[i] = peak(t[i]);
  };
  const BatchObjective shifted = [&](std::size_t, std::span<const double> t, std::span<double> out) {
    for (std::size_t i = 0; i < t.size(); ++i) out[i] = peak(t[i]) + 1234.5;
  };
  const auto a = hierarchical_argmax(f, 0.5, 1.5, opt);
  const auto b = hierarchical_argmax(shifted, 0.5, 1.5, opt);
  CHECK(a.argmax == b.argmax);
  CHECK(std::fabs(a.argmax - 0.8123) <= a.resolution);
  CHECK(a.levels >= 3);
  CHECK(a.resolution <= 1e-6);
  for (std::size_t i = 1; i < a.level_best.size(); ++i) CHECK(a.level_best[i] >= a.level_best[i - 1]);
}

TEST_CASE("MLE refinement never loses ground on real likelihoods") {
  const auto m = reference_model();
  for (std::uint64_t r = 0; r < 20; ++r) {
    const double eps = 0.05;
    const auto x = observe(m, eps, r);
    const auto terms = kernels::prepare_terms(x, m, 1.0, eps);
    const BatchObjective obj = [&](std::size_t, std::span<const double> t, std::span<double> out) {
      kernels::llr_sweep(terms, t, out);
    };
    GridSearchOptions opt;
    opt.target_resolution = std::pow(eps, 1.0 / 0.75) / 50.0;
    const auto s = hierarchical_argmax(obj, m.theta_lo, m.theta_hi, opt);
    for (std::size_t i = 1; i < s.level_best.size(); ++i) REQUIRE(s.level_best[i] >= s.level_best[i - 1]);
    CHECK(mle(x, m, eps).theta_hat == s.argmax);
  }
}

TEST_CASE("MLE recovers theta0 from noiseless data") {
  const auto m = reference_model();
  const auto x = simulate_sde(m, 1.0, 0.0, simulate_wiener(NoiseStream{1, 1}, 3000, m.T));
  const auto est = mle(x, m, 1e-4, 1.0);
  CHECK(std::fabs(est.theta_hat - 1.0) <= est.diagnostics.resolution);
  CHECK(est.diagnostics.levels >= 3);
  CHECK(est.diagnostics.resolution <= std::pow(1e-4, 1.0 / 0.75) / 50.0);
}

TEST_CASE("MLE diagnostics and range") {
  const auto m = reference_model();
  for (std::uint64_t r = 0; r < 10; ++r) {
    const double eps = 0.1;
    const auto est = mle(observe(m, eps, r), m, eps, 1.0);
    CHECK(est.theta_hat >= m.theta_lo);
    CHECK(est.theta_hat <= m.theta_hi);
    REQUIRE(est.normalized_error.has_value());
    CHECK(*est.normalized_error == doctest::Approx((est.theta_hat - 1.0) / std::pow(eps, 4.0 / 3.0)));
    CHECK(est.diagnostics.resolution <= std::pow(eps, 4.0 / 3.0) / 50.0);
  }
  CHECK(!mle(observe(m, 0.1, 0), m, 0.1).normalized_error.has_value());
}

TEST_CASE("Bayes with a flat likelihood returns the prior mean") {
  const auto m = reference_model();
  const auto x = observe(m, 0.05, 4);
  const auto est = bayes(x, m, 1e3, Prior::uniform(m.theta_lo, m.theta_hi));
  CHECK(est.theta_hat == doctest::Approx(1.0).epsilon(1e-6));

  const auto g = bayes(x, m, 1e3, Prior::truncated_gaussian(0.8, 0.2, m.theta_lo, m.theta_hi));
  // Mean of N(0.8, 0.2²) truncated to [0.5, 1.5].
  const auto pdf = [](double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI); };
  const auto cdf = [](double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); };
  const double al = (0.5 - 0.8) / 0.2, be = (1.5 - 0.8) / 0.2;
  const double mean = 0.8 + 0.2 * (pdf(al) - pdf(be)) / (cdf(be) - cdf(al));
  CHECK(g.theta_hat == doctest::Approx(mean).epsilon(1e-5));
}

TEST_CASE("Bayes matches a brute-force posterior mean") {
  const auto m = reference_model();
  for (std::uint64_t r = 0; r < 5; ++r) {
    const double eps = 0.05;
    const auto x = observe(m, eps, r);
    const auto est = bayes(x, m, eps, Prior::uniform(m.theta_lo, m.theta_hi));

    const int n = 200001;
    std::vector<double> th(n), lp(n);
    for (int i = 0; i < n; ++i) th[i] = m.theta_lo + (m.theta_hi - m.theta_lo) * i / (n - 1.0);
    const auto terms = kernels::prepare_terms(x, m, 1.0, eps);
    kernels::llr_sweep(terms, th, lp);
    const double peak = *std::max_element(lp.begin(), lp.end());
    double z = 0.0, first = 0.0;
    for (int i = 0; i < n; ++i) {
      const double w = std::exp(lp[i] - peak) * ((i == 0 || i == n - 1) ? 0.5 : 1.0);
      z += w;
      first += th[i] * w;
    }
    CHECK(std::fabs(est.theta_hat - first / z) < std::pow(eps, 4.0 / 3.0) / 20.0);
  }
}

TEST_CASE("Bayes is invariant to scaling an unnormalized prior") {
  const auto m = reference_model();
  const auto x = observe(m, 0.02, 8);
  const auto log_prior = [](double t) { return -2.0 * (t - 0.9) * (t - 0.9); };
  const auto doubled = [&](double t) { return log_prior(t) + std::log(2.0); };
  const auto a = bayes_with_log_prior(x, m, 0.02, log_prior);
  const auto b = bayes_with_log_prior(x, m, 0.02, doubled);
  CHECK(a.theta_hat == doctest::Approx(b.theta_hat).epsilon(1e-12));
}

TEST_CASE("prior catalog") {
  CHECK_NOTHROW(Prior::from_name("uniform", {}, 0.5, 1.5));
  CHECK_NOTHROW(Prior::from_name("truncated_gaussian", {1.0, 0.3}, 0.5, 1.5));
  CHECK_THROWS_AS(Prior::from_name("truncated_gaussian", {1.0}, 0.5, 1.5), ConfigError);
  CHECK_THROWS_AS(Prior::from_name("cauchy", {}, 0.5, 1.5), ConfigError);
  CHECK_THROWS_AS(Prior::from_name("truncated_gaussian", {1.0, -1.0}, 0.5, 1.5), ConfigError);
  const auto p = Prior::uniform(0.5, 1.5);
  CHECK(p.density(1.0) == doctest::Approx(1.0));
  CHECK(p.density(2.0) == 0.0);
}

TEST_CASE("MDE recovers theta0 from the limit path and agrees with and without the cache") {
  const auto m = reference_model();
  const std::size_t n = 3000;
  const Path exact = solve_limit_ode(m, 1.0, n);
  const auto est = mde(exact, m, 1e-3, nullptr, 1.0);
  CHECK(std::fabs(est.theta_hat - 1.0) <= est.diagnostics.resolution);
  CHECK(est.diagnostics.resolution <= 1e-3 / 50.0);

  const ReferencePathCache cache(m, n);
  CHECK(cache.find(m.theta_lo) != nullptr);
  CHECK(cache.find(m.theta_hi) != nullptr);
  CHECK(cache.find(1.0) == nullptr);
  for (std::uint64_t r = 0; r < 5; ++r) {
    const double eps = 0.1;
    const auto x = simulate_sde(m, 1.0, eps, simulate_wiener(NoiseStream{31, r}, n, m.T));
    const auto with = mde(x, m, eps, &cache, 1.0);
    const auto without = mde(x, m, eps, nullptr, 1.0);
    CHECK(with.theta_hat == without.theta_hat);
  }
  CHECK(cache.stored_zoom_paths() > 0);

  const ReferencePathCache other(m, 500);
  CHECK_THROWS_AS(mde(exact, m, 0.1, &other), ShapeError);
}

TEST_CASE("estimates stay inside the parameter interval") {
  const auto m = reference_model();
  const auto prior = Prior::uniform(m.theta_lo, m.theta_hi);
  for (std::uint64_t r = 0; r < 30; ++r) {
    const double eps = 0.05;
    const auto x = observe(m, eps, r);
    for (double t : {mle(x, m, eps).theta_hat, bayes(x, m, eps, prior).theta_hat,
                     mde(x, m, eps).theta_hat}) {
      CHECK(t >= m.theta_lo);
      CHECK(t <= m.theta_hi);
    }
  }
}
