#include <algorithm>
#include <cmath>
#include <sstream>

#include "doctest.h"

#include "cusp/error.hpp"
#include "cusp/harness.hpp"
#include "cusp/limit_law.hpp"
#include "cusp/stats.hpp"

using namespace cusp;

namespace {

double combined_se(const MomentEstimate& a, const MomentEstimate& b) {
  return std::sqrt(a.se * a.se + b.se * b.se);
}

}  // namespace

TEST_CASE("fBm sampler basics") {
  const FbmSampler sampler(0.75, 2.0, 8);
  const auto s = sampler.sample(NoiseStream{1, 2});
  CHECK(s.size() == 17);
  CHECK(s.values[8] == 0.0);
  CHECK(s.u(0) == -2.0);
  CHECK(s.u(16) == 2.0);
  CHECK(sampler.sample(NoiseStream{1, 2}).values == s.values);
  CHECK(sampler.jitter() <= 1e-10 * 4.0);

  CHECK_THROWS_AS(FbmSampler(1.0, 2.0, 8), DomainError);
  CHECK_THROWS_AS(FbmSampler(0.4, 2.0, 8), DomainError);
  CHECK_THROWS_AS(FbmSampler(0.75, 2.0, 7), DomainError);
  CHECK_THROWS_AS(FbmSampler(0.75, 2.0, 4096), DomainError);
}

TEST_CASE("fBm marginal variances and the Brownian reduction") {
  const std::size_t n = 10000;
  const FbmSampler sampler(0.75, 2.0, 8);
  const StreamFamily family{77, 1};
  std::vector<std::vector<double>> at(3);
  const std::size_t idx[3] = {10, 12, 16};  // u = 0.5, 1, 2
  for (std::size_t r = 0; r < n; ++r) {
    const auto s = sampler.sample(family.at(static_cast<std::uint32_t>(r)));
    CHECK(s.values[8] == 0.0);
    for (int k = 0; k < 3; ++k) at[k].push_back(s.values[idx[k]]);
  }
  for (int k = 0; k < 3; ++k) {
    const double u = sampler.sample(family.at(0)).u(idx[k]);
    std::vector<double> sq;
    for (double v : at[k]) sq.push_back(v * v);
    const auto ms = stats::mean_se(sq);
    CHECK(std::fabs(ms.mean - std::pow(u, 1.5)) < 3.0 * ms.se);
  }

  const FbmSampler brownian(0.5, 2.0, 8);
  std::vector<double> prod;
  for (std::size_t r = 0; r < n; ++r) {
    const auto s = brownian.sample(StreamFamily{77, 2}.at(static_cast<std::uint32_t>(r)));
    prod.push_back(s.values[12] * (s.values[16] - s.values[12]));
  }
  const auto ms = stats::mean_se(prod);
  CHECK(std::fabs(ms.mean) < 3.0 * ms.se);
}

TEST_CASE("fBm self-similarity") {
  const std::size_t n = 10000;
  const FbmSampler sampler(0.75, 4.0, 16);  // du = 0.25
  std::vector<double> w1, w2, w2s, w4s;
  const double c = std::pow(2.0, 0.75);
  for (std::size_t r = 0; r < n; ++r) {
    const auto s = sampler.sample(StreamFamily{3, 3}.at(static_cast<std::uint32_t>(r)));
    w1.push_back(s.values[16 + 4]);
    w2.push_back(s.values[16 + 8]);
    w2s.push_back(s.values[16 + 8] / c);
    w4s.push_back(s.values[16 + 16] / c);
  }
  CHECK(stats::ks_distance(w1, w2s) < 0.03);
  CHECK(stats::ks_distance(w2, w4s) < 0.03);
}

TEST_CASE("limit process transform") {
  FbmSample zero;
  zero.H = 0.75;
  zero.du = 0.5;
  zero.n_per_side = 20;
  zero.values.assign(41, 0.0);
  const auto lz = limit_z(zero);
  CHECK(lz[20] == 0.0);
  for (std::size_t i = 0; i < lz.size(); ++i)
    CHECK(lz[i] == doctest::Approx(-0.5 * std::pow(std::fabs(zero.u(i)), 1.5)));
  CHECK(std::max_element(lz.begin(), lz.end()) - lz.begin() == 20);
  const auto v = sample_limit_variables(zero);
  CHECK(v.u_hat == 0.0);
  CHECK(std::fabs(v.u_tilde) < 1e-12);
  CHECK(!v.tie);
}

TEST_CASE("limit process mean, symmetry and efficiency ordering") {
  const std::size_t n = 10000;
  const FbmSampler sampler(0.75, 15.0, 300);
  const StreamFamily family{11, 0};
  std::vector<double> lz1, positive, uh2, ut2;
  for (std::size_t r = 0; r < n; ++r) {
    const auto s = sampler.sample(family.at(static_cast<std::uint32_t>(r)));
    lz1.push_back(limit_z(s)[300 + 20]);  // u = 1
    const auto v = sample_limit_variables(s);
    CHECK(std::isfinite(v.u_hat));
    CHECK(std::fabs(v.u_tilde) <= 15.0);
    positive.push_back(v.u_hat > 0.0 ? 1.0 : 0.0);
    uh2.push_back(v.u_hat * v.u_hat);
    ut2.push_back(v.u_tilde * v.u_tilde);
  }
  const auto m = stats::mean_se(lz1);
  CHECK(std::fabs(m.mean + 0.5) < 3.0 * m.se);
  const auto p = stats::mean_se(positive);
  CHECK(std::fabs(p.mean - 0.5) < 3.0 * p.se);

  // Paired comparison of E ũ² and E û².
  std::vector<double> diff;
  for (std::size_t r = 0; r < n; ++r) diff.push_back(ut2[r] - uh2[r]);
  const auto d = stats::mean_se(diff);
  CHECK(d.mean < 0.0);
  CHECK(stats::mean_se(ut2).mean / stats::mean_se(uh2).mean < 1.0);
}

TEST_CASE("limit moments: small p, seed consistency, refinement and truncation") {
  const auto tiny = limit_moments(0.75, 0.01, 2000, 15.0, 300, StreamFamily{1, 1});
  CHECK(tiny.u_hat.mean > 0.9);
  CHECK(tiny.u_hat.mean < 1.1);

  const auto a = limit_moments(0.75, 2.0, 10000, 15.0, 750, StreamFamily{1, 2});
  const auto b = limit_moments(0.75, 2.0, 10000, 15.0, 750, StreamFamily{1, 3});
  CHECK(std::fabs(a.u_hat.mean - b.u_hat.mean) < 3.0 * combined_se(a.u_hat, b.u_hat));
  CHECK(std::fabs(a.u_tilde.mean - b.u_tilde.mean) < 3.0 * combined_se(a.u_tilde, b.u_tilde));

  const auto fine = limit_moments(0.75, 2.0, 10000, 15.0, 1500, StreamFamily{1, 4});
  CHECK(std::fabs(a.u_hat.mean - fine.u_hat.mean) < 2.0 * combined_se(a.u_hat, fine.u_hat));
  CHECK(std::fabs(a.u_tilde.mean - fine.u_tilde.mean) < 2.0 * combined_se(a.u_tilde, fine.u_tilde));

  const auto wide = limit_moments(0.75, 2.0, 10000, 30.0, 1500, StreamFamily{1, 5});
  CHECK(std::fabs(a.u_hat.mean - wide.u_hat.mean) < 2.0 * combined_se(a.u_hat, wide.u_hat));
  CHECK(wide.truncation_suspects == 0);

  CHECK_THROWS_AS(limit_moments(0.75, 2.0, 500, 1.0, 50, StreamFamily{1, 6}), GridTooSmallError);
  CHECK_THROWS_AS(limit_moments(0.75, 2.0, 50, 15.0, 300, StreamFamily{1, 6}), DomainError);
}

TEST_CASE("frozen second moments of the standardized limit law") {
  // Regression values for H = 3/4, U = 15, du = 0.01, 10⁴ samples from the
  // reference experiment's limit-law stream.
  const auto family = stream_family(20261018, StreamPurpose::limit_law, 0);
  const auto m = limit_moments(0.75, 2.0, 10000, 15.0, 1500, family);
  CHECK(m.u_hat.mean == doctest::Approx(2.95529165999998).epsilon(1e-12));
  CHECK(m.u_hat.se == doctest::Approx(0.06117459960109048).epsilon(1e-10));
  CHECK(m.u_tilde.mean == doctest::Approx(2.2952138757928098).epsilon(1e-12));
  CHECK(m.u_tilde.se == doctest::Approx(0.04207622371423069).epsilon(1e-10));

  // Doubling the window at the same spacing: each wide sample is also read on
  // its central half, so the difference isolates the truncation effect.
  const FbmSampler wide(0.75, 30.0, 3000);
  std::vector<double> d_hat, d_tilde;
  for (std::uint32_t r = 0; r < 2000; ++r) {
    const auto w = wide.sample(StreamFamily{20261018, 99}.at(r));
    FbmSample half = w;
    half.n_per_side = 1500;
    half.values.assign(w.values.begin() + 1500, w.values.begin() + 4501);
    const auto a = sample_limit_variables(w);
    const auto b = sample_limit_variables(half);
    d_hat.push_back(a.u_hat * a.u_hat - b.u_hat * b.u_hat);
    d_tilde.push_back(a.u_tilde * a.u_tilde - b.u_tilde * b.u_tilde);
  }
  CHECK(std::fabs(stats::mean_se(d_hat).mean) < 0.1 * m.u_hat.se);
  CHECK(std::fabs(stats::mean_se(d_tilde).mean) < 0.1 * m.u_tilde.se);
}

TEST_CASE("limit sample CSV round trip") {
  const FbmSampler sampler(0.75, 15.0, 100);
  const auto batch = sample_limit_batch_serial(sampler, StreamFamily{4, 4}, 50);
  std::stringstream io;
  write_limit_samples_csv(batch, io);
  const auto back = read_limit_samples_csv(io);
  REQUIRE(back.size() == batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    CHECK(back[i].u_hat == batch[i].u_hat);
    CHECK(back[i].u_tilde == batch[i].u_tilde);
    CHECK(back[i].truncation_suspect == batch[i].truncation_suspect);
  }
}

TEST_CASE("standardize") {
  LimitVariables v;
  v.u_hat = 1.0;
  v.u_tilde = -3.0;
  const auto id = standardize(v, LimitConstants{1.0, 1.0, 0.75});
  CHECK(id.first == 1.0);
  CHECK(id.second == -3.0);
  const auto half = standardize(v, LimitConstants{4.0, 2.0, 0.75});
  CHECK(half.first == 0.5);
  CHECK(half.second == -1.5);
}
