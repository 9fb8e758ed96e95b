#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "cusp/error.hpp"
#include "cusp/harness.hpp"
#include "cusp/likelihood.hpp"
#include "cusp/limit_law.hpp"
#include "cusp/stats.hpp"

namespace cusp {

std::string to_string(PropertyStatus status) {
  switch (status) {
    case PropertyStatus::pass:
      return "PASS";
    case PropertyStatus::fail:
      return "FAIL";
    case PropertyStatus::skipped:
      return "SKIP";
  }
  return "SKIP";
}

namespace {

/// Runs fn(i) for i in [0, n) on the replicate pool. Every result lands in
/// its own slot; callers reduce in index order afterwards.
template <class Fn>
void for_each_replicate(const ExperimentConfig& config, std::size_t n, Fn fn) {
  const int threads = config.threads > 0 ? static_cast<int>(config.threads) : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) fn(static_cast<std::size_t>(i));
}

const std::vector<double>& property_eps(const ExperimentConfig& config) {
  return config.properties.eps_list.empty() ? config.eps_list : config.properties.eps_list;
}

Path observe(const ExperimentConfig& config, double eps, const NoiseStream& stream,
             Path* wiener_out = nullptr) {
  const std::size_t n = config.steps_for(eps);
  Path w = simulate_wiener(stream, n, config.model.T);
  Path x = simulate_sde(config.model, config.theta0, eps, w);
  if (wiener_out) *wiener_out = std::move(w);
  return x;
}

/// Slope of ln y on ln eps: two-point slope or least squares.
double log_slope(const std::vector<double>& eps, const std::vector<double>& y) {
  if (eps.size() == 2) return std::log(y[1] / y[0]) / std::log(eps[1] / eps[0]);
  std::vector<std::pair<double, double>> pairs;
  for (std::size_t i = 0; i < eps.size(); ++i) pairs.emplace_back(eps[i], y[i]);
  return stats::rate_regression(pairs).slope;
}

std::string key(const char* prefix, double eps) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s@%g", prefix, eps);
  return buf;
}

}  // namespace

PropertyResult check_deviation_scaling(const ExperimentConfig& config) {
  PropertyResult res;
  res.name = "deviation_scaling";
  const auto& eps_list = property_eps(config);
  if (eps_list.size() < 2) {
    res.detail = "needs at least 2 eps values";
    return res;
  }
  const double kappa = config.model.kappa;
  const std::size_t n = config.properties.deviation_replicates;
  std::vector<double> medians;
  std::vector<double> p99;
  for (std::size_t k = 0; k < eps_list.size(); ++k) {
    const double eps = eps_list[k];
    const auto family =
        stream_family(config.master_seed, StreamPurpose::deviation, static_cast<std::uint32_t>(k));
    const Path x = solve_limit_ode(config.model, config.theta0, config.steps_for(eps));
    std::vector<double> dev(n);
    std::vector<double> ratio(n);
    for_each_replicate(config, n, [&](std::size_t r) {
      Path w;
      const Path obs = observe(config, eps, family.at(static_cast<std::uint32_t>(r)), &w);
      const double what = sup_abs(w);
      dev[r] = sup_deviation(obs, x);
      ratio[r] = dev[r] / (std::pow(eps * what, kappa) + eps * what);
    });
    medians.push_back(stats::median(dev));
    p99.push_back(stats::quantile(ratio, 0.99));
    res.measured[key("median_sup_dev", eps)] = medians.back();
    res.measured[key("p99_ratio", eps)] = p99.back();
  }
  const double slope = log_slope(eps_list, medians);
  const double factor = std::max(p99.front(), p99.back()) / std::min(p99.front(), p99.back());
  res.measured["slope"] = slope;
  res.measured["p99_ratio_factor"] = factor;
  const bool slope_ok = std::fabs(slope - kappa) <= 0.05;
  const bool ratio_ok = factor < 2.0;
  res.status = slope_ok && ratio_ok ? PropertyStatus::pass : PropertyStatus::fail;
  std::ostringstream d;
  d << "slope " << slope << " vs kappa " << kappa << " +- 0.05 (" << (slope_ok ? "ok" : "off")
    << "); p99 ratio factor " << factor << " between eps " << eps_list.front() << " and "
    << eps_list.back() << " (" << (ratio_ok ? "ok" : "above 2") << ")";
  res.detail = d.str();
  return res;
}

PropertyResult check_holder(const ExperimentConfig& config) {
  PropertyResult res;
  res.name = "holder_bound";
  const double eps = config.properties.holder_eps;
  const double H = config.model.hurst();
  const std::size_t n = config.properties.holder_replicates;
  std::vector<double> us;
  for (int k = 0; k <= 8; ++k) us.push_back(-2.0 + 0.5 * k);
  const std::size_t m = us.size();
  const auto family = stream_family(config.master_seed, StreamPurpose::holder, 0);

  std::vector<std::vector<double>> root_z(n);
  for_each_replicate(config, n, [&](std::size_t r) {
    const Path obs = observe(config, eps, family.at(static_cast<std::uint32_t>(r)));
    const auto curve = normalized_curve(obs, config.model, config.theta0, eps, us, false);
    root_z[r].resize(m);
    for (std::size_t i = 0; i < m; ++i) root_z[r][i] = std::exp(0.5 * curve.log_z[i]);
  });

  const auto moment = [&](std::size_t i, std::size_t j) {
    double sum = 0.0;
    for (const auto& z : root_z) sum += (z[j] - z[i]) * (z[j] - z[i]);
    return sum / static_cast<double>(n);
  };
  const double widest = std::fabs(us[m - 1] - us[0]);
  const double C = moment(0, m - 1) / std::pow(widest, 2.0 * H);
  std::size_t violations = 0;
  double worst = 0.0;
  double worst_gap = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) {
      const double gap = us[j] - us[i];
      if (gap >= widest) continue;
      const double r = moment(i, j) / (C * std::pow(gap, 2.0 * H));
      if (r > 1.0) ++violations;
      if (r > worst) {
        worst = r;
        worst_gap = gap;
      }
    }
  res.measured["C"] = C;
  res.measured["worst_ratio"] = worst;
  res.measured["worst_gap"] = worst_gap;
  res.measured["violations"] = static_cast<double>(violations);
  res.status = violations == 0 ? PropertyStatus::pass : PropertyStatus::fail;
  std::ostringstream d;
  d << "C = " << C << " fitted at |du| = " << widest << "; " << violations
    << " narrower pairs exceed C|du|^{2H}, worst moment/bound " << worst << " at |du| = "
    << worst_gap;
  res.detail = d.str();
  return res;
}

PropertyResult check_occupation(const ExperimentConfig& config) {
  PropertyResult res;
  res.name = "occupation_convergence";
  const auto& eps_list = property_eps(config);
  if (eps_list.size() < 2) {
    res.detail = "needs at least 2 eps values";
    return res;
  }
  const double theta0 = config.theta0;
  const auto g = [theta0](double x) { return std::exp(-(x - theta0) * (x - theta0)); };
  const double limit = occupation_limit(config.model, theta0, g);
  const std::size_t n = config.properties.occupation_replicates;
  const bool sabotage = config.properties.grid_mismatch;

  std::vector<double> medians;
  double horizon = config.model.T;
  for (std::size_t k = 0; k < eps_list.size(); ++k) {
    const double eps = eps_list[k];
    const auto family =
        stream_family(config.master_seed, StreamPurpose::occupation, static_cast<std::uint32_t>(k));
    std::vector<double> err(n);
    std::vector<double> horizons(n);
    for_each_replicate(config, n, [&](std::size_t r) {
      Path obs = observe(config, eps, family.at(static_cast<std::uint32_t>(r)));
      if (sabotage) obs.times = uniform_grid(0.5 * config.model.T, obs.steps());
      horizons[r] = obs.horizon();
      err[r] = std::fabs(occupation_integral(obs, g) - limit) / limit;
    });
    horizon = horizons.front();
    medians.push_back(stats::median(err));
    res.measured[key("median_rel_error", eps)] = medians.back();
  }
  bool monotone = true;
  for (std::size_t k = 1; k < medians.size(); ++k) monotone = monotone && medians[k] < medians[k - 1];
  const bool small = medians.back() < config.properties.occupation_tolerance;
  res.measured["limit"] = limit;
  res.measured["integration_horizon"] = horizon;
  res.status = monotone && small ? PropertyStatus::pass : PropertyStatus::fail;
  std::ostringstream d;
  d << "median relative error vs limit " << limit << ":";
  for (std::size_t k = 0; k < medians.size(); ++k) d << ' ' << medians[k];
  d << (monotone ? " (decreasing)" : " (not decreasing)") << "; last "
    << (small ? "below" : "above") << " tolerance " << config.properties.occupation_tolerance;
  if (horizon != config.model.T) d << "; path integrated over [0, " << horizon << "] but T = " << config.model.T;
  res.detail = d.str();
  return res;
}

PropertyResult check_anchor(const ExperimentConfig& config) {
  PropertyResult res;
  res.name = "anchor_z0";
  const std::vector<double> us{-1.0, 0.0, 1.0};
  const std::size_t n = config.properties.anchor_replicates;
  std::size_t bad = 0;
  std::size_t curves = 0;
  for (std::size_t k = 0; k < config.eps_list.size(); ++k) {
    const double eps = config.eps_list[k];
    const auto family =
        stream_family(config.master_seed, StreamPurpose::anchor, static_cast<std::uint32_t>(k));
    std::vector<int> zero(n);
    for_each_replicate(config, n, [&](std::size_t r) {
      const Path obs = observe(config, eps, family.at(static_cast<std::uint32_t>(r)));
      for (bool phi : {false, true}) {
        const auto curve = normalized_curve(obs, config.model, config.theta0, eps, us, phi);
        zero[r] += curve.log_z[1] == 0.0 ? 1 : 0;
      }
    });
    for (int z : zero) bad += static_cast<std::size_t>(2 - z);
    curves += 2 * n;
  }
  res.measured["curves"] = static_cast<double>(curves);
  res.measured["nonzero_anchor"] = static_cast<double>(bad);
  res.status = bad == 0 ? PropertyStatus::pass : PropertyStatus::fail;
  res.detail = std::to_string(bad) + " of " + std::to_string(curves) + " curves have logZ(0) != 0";
  return res;
}

namespace {

struct CovarianceCheck {
  std::size_t entries = 0;
  std::size_t outside = 0;
  double worst_z = 0.0;
};

/// Entrywise empirical E[W(s)W(t)] against C(s, t), in standard errors.
CovarianceCheck covariance_within(const FbmSampler& sampler, const StreamFamily& family,
                                  std::size_t n, const std::vector<double>& points, double k_se,
                                  const ExperimentConfig& config) {
  std::vector<std::vector<double>> values(n);
  std::vector<std::size_t> idx;
  const double du = sampler.U() / static_cast<double>(sampler.n_per_side());
  for (double p : points)
    idx.push_back(static_cast<std::size_t>(std::llround(p / du + static_cast<double>(sampler.n_per_side()))));
  for_each_replicate(config, n, [&](std::size_t r) {
    const auto s = sampler.sample(family.at(static_cast<std::uint32_t>(r)));
    for (auto i : idx) values[r].push_back(s.values[i]);
  });
  CovarianceCheck out;
  for (std::size_t a = 0; a < points.size(); ++a)
    for (std::size_t b = a; b < points.size(); ++b) {
      std::vector<double> prod(n);
      for (std::size_t r = 0; r < n; ++r) prod[r] = values[r][a] * values[r][b];
      const auto ms = stats::mean_se(prod);
      const double z = std::fabs(ms.mean - fbm_covariance(points[a], points[b], sampler.H())) / ms.se;
      ++out.entries;
      if (z > k_se) ++out.outside;
      out.worst_z = std::max(out.worst_z, z);
    }
  return out;
}

}  // namespace

PropertyResult check_fbm_covariance(const ExperimentConfig& config) {
  PropertyResult res;
  res.name = "fbm_covariance";
  const std::size_t n = config.properties.fbm_samples;
  const FbmSampler sampler(config.model.hurst(), 2.0, 8);
  const std::vector<double> points{-2.0, -1.0, 0.5, 1.0, 2.0};
  const auto cov = covariance_within(sampler, stream_family(config.master_seed, StreamPurpose::fbm_check, 0),
                                     n, points, 4.0, config);

  // H = 1/2: W(1) and W(2) - W(1) must be uncorrelated.
  const FbmSampler brownian(0.5, 2.0, 8);
  const auto family = stream_family(config.master_seed, StreamPurpose::fbm_check, 1);
  std::vector<double> prod(n);
  for_each_replicate(config, n, [&](std::size_t r) {
    const auto s = brownian.sample(family.at(static_cast<std::uint32_t>(r)));
    const double w1 = s.values[8 + 4];
    const double w2 = s.values[8 + 8];
    prod[r] = w1 * (w2 - w1);
  });
  const auto inc = stats::mean_se(prod);
  const double inc_z = std::fabs(inc.mean) / inc.se;

  res.measured["entries_outside_4se"] = static_cast<double>(cov.outside);
  res.measured["worst_entry_z"] = cov.worst_z;
  res.measured["brownian_increment_cov"] = inc.mean;
  res.measured["brownian_increment_z"] = inc_z;
  res.status = cov.outside == 0 && inc_z <= 3.0 ? PropertyStatus::pass : PropertyStatus::fail;
  std::ostringstream d;
  d << cov.outside << " of " << cov.entries << " covariance entries outside 4 SE (worst "
    << cov.worst_z << " SE); H=1/2 increment covariance " << inc.mean << " (" << inc_z << " SE)";
  res.detail = d.str();
  return res;
}

PropertyResult check_z_moments(const ExperimentConfig& config, double eps, std::size_t replicates,
                               const std::vector<double>& us) {
  PropertyResult res;
  res.name = "z_moments";
  const auto constants = limit_constants(config.model, config.theta0);
  const double H = constants.H;
  const auto family = stream_family(config.master_seed, StreamPurpose::z_moments, 0);
  std::vector<std::vector<double>> log_z(replicates);
  for_each_replicate(config, replicates, [&](std::size_t r) {
    const Path obs = observe(config, eps, family.at(static_cast<std::uint32_t>(r)));
    log_z[r] = normalized_curve(obs, config.model, config.theta0, eps, us, false).log_z;
  });

  bool ok = true;
  std::ostringstream d;
  for (std::size_t i = 0; i < us.size(); ++i) {
    std::vector<double> xs(replicates);
    for (std::size_t r = 0; r < replicates; ++r) xs[r] = log_z[r][i];
    const auto ms = stats::mean_se(xs);
    const double var = stats::variance(xs);
    double m4 = 0.0;
    for (double x : xs) m4 += std::pow(x - ms.mean, 4);
    m4 /= static_cast<double>(replicates);
    const double var_se = std::sqrt(std::max(0.0, m4 - var * var) / static_cast<double>(replicates));

    const double scale = constants.gamma_sq * std::pow(std::fabs(us[i]), 2.0 * H);
    const double mean_target = -0.5 * scale;
    const double var_target = scale;
    const bool mean_ok = std::fabs(ms.mean - mean_target) <= 0.05 * std::fabs(mean_target) + 3.0 * ms.se;
    const bool var_ok = std::fabs(var - var_target) <= 0.05 * var_target + 3.0 * var_se;
    ok = ok && mean_ok && var_ok;

    char buf[64];
    std::snprintf(buf, sizeof buf, "u=%g", us[i]);
    const std::string tag = buf;
    res.measured["mean " + tag] = ms.mean;
    res.measured["mean_se " + tag] = ms.se;
    res.measured["var " + tag] = var;
    res.measured["var_se " + tag] = var_se;
    d << tag << ": mean " << ms.mean << " (target " << mean_target << ", se " << ms.se << ", "
      << (mean_ok ? "ok" : "off") << ") var " << var << " (target " << var_target << ", se "
      << var_se << ", " << (var_ok ? "ok" : "off") << "); ";
  }
  res.status = ok ? PropertyStatus::pass : PropertyStatus::fail;
  res.detail = d.str();
  return res;
}

std::vector<PropertyResult> property_suite(const ExperimentConfig& config) {
  std::vector<PropertyResult> out;
  out.push_back(check_deviation_scaling(config));
  out.push_back(check_holder(config));
  out.push_back(check_occupation(config));
  out.push_back(check_anchor(config));
  out.push_back(check_fbm_covariance(config));
  return out;
}

std::string format_property(const PropertyResult& result) {
  std::ostringstream out;
  out << to_string(result.status) << ' ' << result.name;
  if (!result.detail.empty()) out << ": " << result.detail;
  return out.str();
}

}  // namespace cusp
