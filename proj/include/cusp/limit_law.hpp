#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cusp/likelihood.hpp"
#include "cusp/noise.hpp"

namespace cusp {

/// Two-sided fractional Brownian motion on u_j = j du, j = -n..n.
struct FbmSample {
  double H = 0.75;
  double du = 0.0;
  std::size_t n_per_side = 0;
  /// 2n + 1 values; values[n] (u = 0) is exactly 0.
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  double u(std::size_t i) const {
    return (static_cast<double>(i) - static_cast<double>(n_per_side)) * du;
  }
};

/// C(s, t) = (|s|^{2H} + |t|^{2H} - |s - t|^{2H}) / 2.
double fbm_covariance(double s, double t, double H);

/// Exact sampler: Cholesky factor of the covariance of the 2n non-zero
/// nodes, computed once and shared read-only between samples.
class FbmSampler {
public:
  /// Needs H in [1/2, 1), n_per_side >= 8 and 2n + 1 <= 8192. Throws
  /// NumericalError when the factorization fails even after jitter of
  /// 1e-10 times the largest diagonal entry.
  FbmSampler(double H, double U, std::size_t n_per_side);

  FbmSample sample(const NoiseStream& stream) const;

  double H() const { return H_; }
  double U() const { return U_; }
  std::size_t n_per_side() const { return n_; }
  /// Diagonal jitter added to make the factorization succeed (0 if none).
  double jitter() const { return jitter_; }

private:
  double H_, U_;
  std::size_t n_;
  double du_;
  double jitter_ = 0.0;
  Eigen::MatrixXd lower_;
};

FbmSample sample_fbm(double H, double U, std::size_t n_per_side, const NoiseStream& stream);

/// ln Z(u) = W^H(u) - |u|^{2H} / 2 at every node.
std::vector<double> limit_z(const FbmSample& sample);

struct LimitVariables {
  double u_hat = 0.0;
  double u_tilde = 0.0;
  /// Fraction of Z-mass on the outer 10% of the grid (|u| > 0.9 U).
  double edge_mass = 0.0;
  bool tie = false;
  bool truncation_suspect = false;
};

inline constexpr double kTruncationSuspectMass = 1e-3;

/// û = grid argmax of ln Z (smallest index on ties); ũ = trapezoid(u Z) /
/// trapezoid(Z), evaluated relative to max ln Z.
LimitVariables sample_limit_variables(const FbmSample& sample);

/// Reference implementation: samples i = 0..n-1 drawn from family.at(i).
std::vector<LimitVariables> sample_limit_batch_serial(const FbmSampler& sampler,
                                                      const StreamFamily& family, std::size_t n);

/// OpenMP over samples; identical output to the serial version.
std::vector<LimitVariables> sample_limit_batch_parallel(const FbmSampler& sampler,
                                                        const StreamFamily& family, std::size_t n);

struct MomentEstimate {
  double mean = 0.0;
  double se = 0.0;
};

struct LimitMoments {
  double H = 0.0;
  double U = 0.0;
  std::size_t n_per_side = 0;
  double p = 0.0;
  std::size_t n_samples = 0;
  MomentEstimate u_hat;
  MomentEstimate u_tilde;
  std::size_t truncation_suspects = 0;
  std::size_t ties = 0;
};

/// Monte Carlo E|û|^p and E|ũ|^p with standard errors. All samples enter
/// the means; truncation suspects are counted. Throws GridTooSmallError when
/// more than 5% of the samples are suspects.
LimitMoments limit_moments(double H, double p, std::size_t n_samples, double U,
                           std::size_t n_per_side, const StreamFamily& family);

/// Moments of an already drawn batch.
LimitMoments moments_of(const std::vector<LimitVariables>& batch, double p);

/// Throws GridTooSmallError if more than 5% of the batch is truncation-suspect.
void require_truncation_budget(const std::vector<LimitVariables>& batch, double U);

/// (û / γ, ũ / γ).
std::pair<double, double> standardize(const LimitVariables& v, const LimitConstants& constants);

/// CSV `sample,u_hat,u_tilde,edge_mass,flag`; flag is a bitmask
/// (1 = truncation suspect, 2 = argmax tie).
void write_limit_samples_csv(const std::vector<LimitVariables>& batch, std::ostream& out);
std::vector<LimitVariables> read_limit_samples_csv(std::istream& in);

}  // namespace cusp
