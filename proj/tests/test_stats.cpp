#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"

#include "cusp/error.hpp"
#include "cusp/stats.hpp"

using namespace cusp;

TEST_CASE("KS distance examples") {
  const std::vector<double> a{0.3, 1.2, -0.5, 2.0};
  CHECK(stats::ks_distance(a, a) == 0.0);
  CHECK(stats::ks_distance(std::vector<double>{0, 0, 0}, std::vector<double>{1, 1, 1}) == 1.0);
  // Ties across samples: at 1 the ECDFs are 2/3 and 1/2, at 2 they are 1 and 1/2.
  CHECK(stats::ks_distance(std::vector<double>{1, 1, 2}, std::vector<double>{1, 3}) ==
        doctest::Approx(0.5));
  CHECK_THROWS_AS(stats::ks_distance(std::vector<double>{}, a), DomainError);
}

TEST_CASE("KS distance of same-law samples respects the classical band") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal;
  const double band = stats::ks_critical_95(2000, 2000);
  CHECK(band == doctest::Approx(1.3581 * std::sqrt(2.0 / 2000.0)).epsilon(1e-3));
  int inside = 0;
  const int trials = 200;
  for (int t = 0; t < trials; ++t) {
    std::vector<double> x(2000), y(2000);
    for (auto& v : x) v = normal(rng);
    for (auto& v : y) v = normal(rng);
    inside += stats::ks_distance(x, y) < band ? 1 : 0;
  }
  // 95% coverage; 200 trials give a binomial sd of about 1.5%.
  CHECK(inside >= 0.9 * trials);
}

TEST_CASE("rate regression examples") {
  std::vector<std::pair<double, double>> exact, linear;
  for (double e : {0.1, 0.05, 0.02, 0.01}) {
    exact.emplace_back(e, std::pow(e, 4.0 / 3.0));
    linear.emplace_back(e, 2.0 * e);
  }
  const auto a = stats::rate_regression(exact);
  CHECK(a.slope == doctest::Approx(4.0 / 3.0).epsilon(1e-12));
  CHECK(a.slope_se < 1e-12);
  const auto b = stats::rate_regression(linear);
  CHECK(b.slope == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(b.intercept == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  CHECK_THROWS_AS(stats::rate_regression(std::vector<std::pair<double, double>>{{0.1, 1}, {0.2, 2}}),
                  DomainError);
  CHECK_THROWS_AS(
      stats::rate_regression(std::vector<std::pair<double, double>>{{0.1, 1}, {0.2, 0}, {0.3, 1}}),
      DomainError);
}

TEST_CASE("summary statistics") {
  const std::vector<double> xs{1, 2, 3, 4};
  CHECK(stats::variance(xs) == doctest::Approx(5.0 / 3.0));
  const auto ms = stats::mean_se(xs);
  CHECK(ms.mean == 2.5);
  CHECK(ms.se == doctest::Approx(std::sqrt(5.0 / 12.0)));
  CHECK(stats::median({3, 1, 2}) == 2.0);
  CHECK(stats::quantile({1, 2, 3, 4, 5}, 0.25) == 2.0);
  CHECK(stats::quantile({0, 10}, 0.99) == doctest::Approx(9.9));
}
