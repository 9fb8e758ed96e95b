#include "cusp/limit_law.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <string>

#include "cusp/error.hpp"

namespace cusp {

double fbm_covariance(double s, double t, double H) {
  const double e = 2.0 * H;
  return 0.5 * (std::pow(std::fabs(s), e) + std::pow(std::fabs(t), e) - std::pow(std::fabs(s - t), e));
}

FbmSampler::FbmSampler(double H, double U, std::size_t n_per_side)
    : H_(H), U_(U), n_(n_per_side), du_(U / static_cast<double>(n_per_side)) {
  if (!(H >= 0.5 && H < 1.0)) throw DomainError("fBm sampler needs H in [1/2, 1)");
  if (!(U > 0.0)) throw DomainError("fBm sampler needs U > 0");
  if (n_per_side < 8) throw DomainError("fBm sampler needs n_per_side >= 8");
  if (2 * n_per_side + 1 > 8192) throw DomainError("fBm grid exceeds 8192 nodes");

  // Non-zero nodes in ascending order: u = -n du .. -du, du .. n du.
  const auto m = static_cast<Eigen::Index>(2 * n_);
  std::vector<double> nodes(static_cast<std::size_t>(m));
  for (std::size_t j = 0; j < n_; ++j) {
    nodes[j] = -static_cast<double>(n_ - j) * du_;
    nodes[n_ + j] = static_cast<double>(j + 1) * du_;
  }
  Eigen::MatrixXd cov(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double c = fbm_covariance(nodes[static_cast<std::size_t>(i)], nodes[static_cast<std::size_t>(j)], H_);
      cov(i, j) = c;
      cov(j, i) = c;
    }

  const double max_diag = cov.diagonal().maxCoeff();
  for (double scale : {0.0, 1e-14, 1e-12, 1e-10}) {
    Eigen::MatrixXd trial = cov;
    trial.diagonal().array() += scale * max_diag;
    Eigen::LLT<Eigen::MatrixXd> llt(trial);
    if (llt.info() == Eigen::Success) {
      lower_ = llt.matrixL();
      jitter_ = scale * max_diag;
      return;
    }
  }
  std::ostringstream msg;
  msg << "fBm covariance factorization failed (H=" << H << ", n=" << n_per_side
      << ") after jitter " << 1e-10 * max_diag;
  throw NumericalError(msg.str());
}

FbmSample FbmSampler::sample(const NoiseStream& stream) const {
  auto engine = stream.engine();
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto m = lower_.rows();
  Eigen::VectorXd z(m);
  for (Eigen::Index i = 0; i < m; ++i) z(i) = normal(engine);
  const Eigen::VectorXd w = lower_.triangularView<Eigen::Lower>() * z;

  FbmSample s;
  s.H = H_;
  s.du = du_;
  s.n_per_side = n_;
  s.values.assign(2 * n_ + 1, 0.0);
  for (std::size_t j = 0; j < n_; ++j) {
    s.values[j] = w(static_cast<Eigen::Index>(j));
    s.values[n_ + 1 + j] = w(static_cast<Eigen::Index>(n_ + j));
  }
  return s;
}

FbmSample sample_fbm(double H, double U, std::size_t n_per_side, const NoiseStream& stream) {
  return FbmSampler(H, U, n_per_side).sample(stream);
}

std::vector<double> limit_z(const FbmSample& sample) {
  std::vector<double> log_z(sample.size());
  const double e = 2.0 * sample.H;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double u = sample.u(i);
    log_z[i] = sample.values[i] - 0.5 * std::pow(std::fabs(u), e);
  }
  return log_z;
}

LimitVariables sample_limit_variables(const FbmSample& sample) {
  const auto log_z = limit_z(sample);
  const std::size_t n = log_z.size();
  std::size_t best = 0;
  for (std::size_t i = 1; i < n; ++i)
    if (log_z[i] > log_z[best]) best = i;
  const double peak = log_z[best];

  const double U = static_cast<double>(sample.n_per_side) * sample.du;
  double mass = 0.0;
  double first = 0.0;
  double edge = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double weight = (i == 0 || i + 1 == n) ? 0.5 : 1.0;
    const double z = weight * std::exp(log_z[i] - peak);
    const double u = sample.u(i);
    mass += z;
    first += u * z;
    if (std::fabs(u) > 0.9 * U) edge += z;
  }

  LimitVariables v;
  v.u_hat = sample.u(best);
  v.u_tilde = first / mass;
  v.edge_mass = edge / mass;
  v.tie = std::count(log_z.begin(), log_z.end(), peak) > 1;
  v.truncation_suspect = v.edge_mass > kTruncationSuspectMass;
  return v;
}

std::vector<LimitVariables> sample_limit_batch_serial(const FbmSampler& sampler,
                                                      const StreamFamily& family, std::size_t n) {
  std::vector<LimitVariables> out(n);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = sample_limit_variables(sampler.sample(family.at(static_cast<std::uint32_t>(i))));
  return out;
}

std::vector<LimitVariables> sample_limit_batch_parallel(const FbmSampler& sampler,
                                                        const StreamFamily& family, std::size_t n) {
  std::vector<LimitVariables> out(n);
  const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t i = 0; i < count; ++i)
    out[static_cast<std::size_t>(i)] =
        sample_limit_variables(sampler.sample(family.at(static_cast<std::uint32_t>(i))));
  return out;
}

LimitMoments moments_of(const std::vector<LimitVariables>& batch, double p) {
  LimitMoments m;
  m.p = p;
  m.n_samples = batch.size();
  const double n = static_cast<double>(batch.size());
  const auto estimate = [&](auto pick) {
    double sum = 0.0;
    double sum_sq = 0.0;
    for (const auto& v : batch) {
      const double x = std::pow(std::fabs(pick(v)), p);
      sum += x;
      sum_sq += x * x;
    }
    MomentEstimate e;
    e.mean = sum / n;
    const double var = batch.size() > 1 ? std::max(0.0, (sum_sq - n * e.mean * e.mean) / (n - 1.0)) : 0.0;
    e.se = std::sqrt(var / n);
    return e;
  };
  m.u_hat = estimate([](const LimitVariables& v) { return v.u_hat; });
  m.u_tilde = estimate([](const LimitVariables& v) { return v.u_tilde; });
  for (const auto& v : batch) {
    m.truncation_suspects += v.truncation_suspect ? 1 : 0;
    m.ties += v.tie ? 1 : 0;
  }
  return m;
}

void require_truncation_budget(const std::vector<LimitVariables>& batch, double U) {
  const auto suspects = std::count_if(batch.begin(), batch.end(),
                                      [](const LimitVariables& v) { return v.truncation_suspect; });
  if (static_cast<double>(suspects) > 0.05 * static_cast<double>(batch.size())) {
    std::ostringstream msg;
    msg << suspects << " of " << batch.size() << " limit samples carry more than "
        << kTruncationSuspectMass << " of their Z-mass near the grid edge; increase U (now " << U
        << ")";
    throw GridTooSmallError(msg.str());
  }
}

LimitMoments limit_moments(double H, double p, std::size_t n_samples, double U,
                           std::size_t n_per_side, const StreamFamily& family) {
  if (n_samples < 100) throw DomainError("limit_moments needs n_samples >= 100");
  if (!(p > 0.0)) throw DomainError("limit_moments needs p > 0");
  const FbmSampler sampler(H, U, n_per_side);
  const auto batch = sample_limit_batch_parallel(sampler, family, n_samples);
  require_truncation_budget(batch, U);
  LimitMoments m = moments_of(batch, p);
  m.H = H;
  m.U = U;
  m.n_per_side = n_per_side;
  return m;
}

std::pair<double, double> standardize(const LimitVariables& v, const LimitConstants& constants) {
  return {v.u_hat / constants.gamma, v.u_tilde / constants.gamma};
}

void write_limit_samples_csv(const std::vector<LimitVariables>& batch, std::ostream& out) {
  out << "sample,u_hat,u_tilde,edge_mass,flag\n";
  char buf[128];
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& v = batch[i];
    const int flag = (v.truncation_suspect ? 1 : 0) | (v.tie ? 2 : 0);
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%d\n", i, v.u_hat, v.u_tilde, v.edge_mass,
                  flag);
    out << buf;
  }
}

std::vector<LimitVariables> read_limit_samples_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "sample,u_hat,u_tilde,edge_mass,flag")
    throw ShapeError("limit sample CSV: unexpected header");
  std::vector<LimitVariables> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    if (cells.size() != 5) throw ShapeError("limit sample CSV: malformed row '" + line + "'");
    LimitVariables v;
    v.u_hat = std::stod(cells[1]);
    v.u_tilde = std::stod(cells[2]);
    v.edge_mass = std::stod(cells[3]);
    const int flag = std::stoi(cells[4]);
    v.truncation_suspect = (flag & 1) != 0;
    v.tie = (flag & 2) != 0;
    out.push_back(v);
  }
  return out;
}

}  // namespace cusp
