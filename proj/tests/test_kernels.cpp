#include <cmath>
#include <vector>

#include "doctest.h"

#include "cusp/kernels.hpp"
#include "cusp/limit_law.hpp"
#include "cusp/likelihood.hpp"

using namespace cusp;

TEST_CASE("parallel likelihood sweep equals the serial reference bit for bit") {
  for (double kappa : {0.25, 0.3}) {
    CuspModel m;
    m.kappa = kappa;
    m.T = 3.0;
    m.theta_lo = 0.5;
    m.theta_hi = 1.5;
    const auto x = simulate_sde(m, 1.0, 0.02, simulate_wiener(NoiseStream{8, 8}, 7500, m.T));
    const auto terms = kernels::prepare_terms(x, m, 1.0, 0.02);
    std::vector<double> thetas;
    for (int i = 0; i < 333; ++i) thetas.push_back(0.5 + i / 332.0);
    std::vector<double> a(thetas.size()), b(thetas.size());
    kernels::llr_sweep_serial(terms, thetas, a);
    kernels::llr_sweep_parallel(terms, thetas, b);
    CHECK(a == b);
    for (std::size_t i = 0; i < thetas.size(); i += 50)
      CHECK(a[i] == doctest::Approx(log_likelihood_ratio(x, m, thetas[i], 1.0, 0.02)).epsilon(1e-12));
  }
}

TEST_CASE("parallel limit-law batch equals the serial reference") {
  const FbmSampler sampler(0.75, 15.0, 200);
  const StreamFamily family{5, 9};
  const auto a = sample_limit_batch_serial(sampler, family, 300);
  const auto b = sample_limit_batch_parallel(sampler, family, 300);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].u_hat == b[i].u_hat);
    CHECK(a[i].u_tilde == b[i].u_tilde);
    CHECK(a[i].edge_mass == b[i].edge_mass);
  }
}

TEST_CASE("squared distance by the trapezoid rule") {
  const std::vector<double> a{0.0, 1.0, 2.0, 3.0};
  const std::vector<double> b{1.0, 1.0, 1.0, 1.0};
  // (1 + 0 + 1 + 4) with halved end weights: 0.5 + 0 + 1 + 2 = 3.5
  CHECK(kernels::squared_distance(a, b, 1.0) == 3.5);
  CHECK(kernels::squared_distance(a, a, 0.1) == 0.0);
}
