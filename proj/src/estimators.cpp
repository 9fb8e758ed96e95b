#include "cusp/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include "cusp/error.hpp"
#include "cusp/kernels.hpp"

namespace cusp {

std::string to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::mle:
      return "mle";
    case EstimatorKind::bayes:
      return "bayes";
    case EstimatorKind::mde:
      return "mde";
  }
  return "mle";
}

EstimatorKind estimator_from_string(const std::string& name) {
  if (name == "mle") return EstimatorKind::mle;
  if (name == "bayes") return EstimatorKind::bayes;
  if (name == "mde") return EstimatorKind::mde;
  throw ConfigError("unknown estimator '" + name + "'");
}

double normalized_error(double theta_hat, double theta0, double eps, double H) {
  return (theta_hat - theta0) / std::pow(eps, 1.0 / H);
}

// ---------------------------------------------------------------------------
// Grid search

namespace {

double level0_node(double lo, double hi, std::size_t i, std::size_t n) {
  if (i + 1 == n) return hi;
  return lo + static_cast<double>(i) * ((hi - lo) / static_cast<double>(n - 1));
}

/// Index of the first maximum; thetas are ascending so this is the smallest
/// maximizing θ.
std::size_t first_argmax(std::span<const double> values, bool& tie) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  tie = std::count(values.begin(), values.end(), values[best]) > 1;
  return best;
}

}  // namespace

GridSearchResult hierarchical_argmax(const BatchObjective& objective, double lo, double hi,
                                     const GridSearchOptions& options) {
  if (!(hi > lo)) throw DomainError("grid search needs lo < hi");
  const std::size_t n0 = std::max<std::size_t>(options.level0_nodes, 2);

  GridSearchResult result;
  std::vector<double> thetas(n0);
  std::vector<double> values(n0);
  for (std::size_t i = 0; i < n0; ++i) thetas[i] = level0_node(lo, hi, i, n0);
  objective(0, thetas, values);
  result.evaluations += n0;

  bool tie = false;
  std::size_t best = first_argmax(values, tie);
  double incumbent = thetas[best];
  double incumbent_value = values[best];
  double spacing = (hi - lo) / static_cast<double>(n0 - 1);
  result.level_best.push_back(incumbent_value);

  const auto half_width = static_cast<long>(std::lround(static_cast<double>(options.window_cells) * options.zoom));
  std::size_t level = 0;
  while (level < options.max_levels &&
         (level < options.min_levels || spacing > options.target_resolution)) {
    const double fine = spacing / options.zoom;
    thetas.clear();
    for (long j = -half_width; j <= half_width; ++j) {
      const double t = j == 0 ? incumbent : incumbent + static_cast<double>(j) * fine;
      if (t < lo || t > hi) continue;
      thetas.push_back(t);
    }
    values.resize(thetas.size());
    objective(level + 1, thetas, values);
    result.evaluations += thetas.size();
    best = first_argmax(values, tie);
    incumbent = thetas[best];
    incumbent_value = values[best];
    spacing = fine;
    ++level;
    result.level_best.push_back(incumbent_value);
  }

  result.argmax = incumbent;
  result.value = incumbent_value;
  result.levels = level;
  result.resolution = spacing;
  result.tie = tie;
  return result;
}

// ---------------------------------------------------------------------------
// Priors

Prior::Prior(std::string name, std::vector<double> params, double lo, double hi)
    : name_(std::move(name)), params_(std::move(params)), lo_(lo), hi_(hi) {
  if (!(hi > lo)) throw ConfigError("prior support needs lo < hi");
  if (name_ == "uniform") {
    log_norm_ = -std::log(hi - lo);
  } else {
    const double mu = params_[0];
    const double sigma = params_[1];
    if (!(sigma > 0.0)) throw ConfigError("truncated_gaussian prior needs sigma > 0");
    const auto cdf = [](double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); };
    const double mass = cdf((hi - mu) / sigma) - cdf((lo - mu) / sigma);
    if (!(mass > 0.0)) throw ConfigError("truncated_gaussian prior has no mass on Θ");
    log_norm_ = -std::log(sigma * std::sqrt(2.0 * M_PI) * mass);
  }
  check_normalization();
}

Prior Prior::uniform(double lo, double hi) { return Prior("uniform", {}, lo, hi); }

Prior Prior::truncated_gaussian(double mu, double sigma, double lo, double hi) {
  return Prior("truncated_gaussian", {mu, sigma}, lo, hi);
}

Prior Prior::from_name(const std::string& name, const std::vector<double>& params, double lo,
                       double hi) {
  if (name == "uniform") {
    if (!params.empty()) throw ConfigError("uniform prior takes no parameters");
    return uniform(lo, hi);
  }
  if (name == "truncated_gaussian") {
    if (params.size() != 2) throw ConfigError("truncated_gaussian prior takes {mu, sigma}");
    return truncated_gaussian(params[0], params[1], lo, hi);
  }
  throw ConfigError("unknown prior '" + name + "'");
}

double Prior::log_density(double theta) const {
  if (theta < lo_ || theta > hi_) return -std::numeric_limits<double>::infinity();
  if (name_ == "uniform") return log_norm_;
  const double z = (theta - params_[0]) / params_[1];
  return log_norm_ - 0.5 * z * z;
}

double Prior::density(double theta) const { return std::exp(log_density(theta)); }

void Prior::check_normalization() const {
  boost::math::quadrature::tanh_sinh<double> rule;
  const double total = rule.integrate([this](double t) { return density(t); }, lo_, hi_, 1e-12);
  if (std::fabs(total - 1.0) > 1e-6) {
    std::ostringstream msg;
    msg << "prior '" << name_ << "' integrates to " << total << " over Θ";
    throw NumericalError(msg.str());
  }
}

// ---------------------------------------------------------------------------
// MLE

EstimateResult mle(const Path& observed, const CuspModel& model, double eps,
                   std::optional<double> theta0) {
  const double H = model.hurst();
  const auto terms =
      kernels::prepare_terms(observed, model, 0.5 * (model.theta_lo + model.theta_hi), eps);
  const BatchObjective objective = [&](std::size_t, std::span<const double> thetas,
                                       std::span<double> out) {
    kernels::llr_sweep(terms, thetas, out);
  };
  GridSearchOptions options;
  options.target_resolution = std::pow(eps, 1.0 / H) / 50.0;
  const auto search = hierarchical_argmax(objective, model.theta_lo, model.theta_hi, options);

  EstimateResult result;
  result.estimator = EstimatorKind::mle;
  result.theta_hat = search.argmax;
  if (theta0) result.normalized_error = normalized_error(search.argmax, *theta0, eps, H);
  result.diagnostics.levels = search.levels;
  result.diagnostics.resolution = search.resolution;
  result.diagnostics.evaluations = search.evaluations;
  result.diagnostics.multiple_maximizers = search.tie;
  return result;
}

// ---------------------------------------------------------------------------
// Bayes

namespace {

struct PosteriorSummary {
  double mean = 0.0;
  double outside_mass = 0.0;
  double edge_mass = 0.0;
};

/// Trapezoid posterior mean on ascending nodes, computed relative to the
/// largest log value.
PosteriorSummary posterior_mean(std::span<const double> thetas, std::span<const double> log_post,
                                double window_lo, double window_hi, double edge_lo,
                                double edge_hi) {
  const double peak = *std::max_element(log_post.begin(), log_post.end());
  double mass = 0.0;
  double first = 0.0;
  double outside = 0.0;
  double edge = 0.0;
  double prev_w = std::exp(log_post[0] - peak);
  for (std::size_t k = 0; k + 1 < thetas.size(); ++k) {
    const double w = std::exp(log_post[k + 1] - peak);
    const double width = thetas[k + 1] - thetas[k];
    const double piece = 0.5 * width * (prev_w + w);
    mass += piece;
    first += 0.5 * width * (thetas[k] * prev_w + thetas[k + 1] * w);
    const double centre = 0.5 * (thetas[k] + thetas[k + 1]);
    if (centre < window_lo || centre > window_hi) outside += piece;
    if (centre < edge_lo || centre > edge_hi) edge += piece;
    prev_w = w;
  }
  return {first / mass, outside / mass, edge / mass};
}

}  // namespace

EstimateResult bayes_with_log_prior(const Path& observed, const CuspModel& model, double eps,
                                    const std::function<double(double)>& log_prior,
                                    std::optional<double> theta0, const BayesOptions& options) {
  const double lo = model.theta_lo;
  const double hi = model.theta_hi;
  const double H = model.hurst();
  const double scale = std::pow(eps, 1.0 / H);
  const auto terms = kernels::prepare_terms(observed, model, 0.5 * (lo + hi), eps);
  std::size_t evaluations = 0;
  const auto log_post = [&](std::span<const double> thetas, std::span<double> out) {
    kernels::llr_sweep(terms, thetas, out);
    for (std::size_t i = 0; i < thetas.size(); ++i) out[i] += log_prior(thetas[i]);
    evaluations += thetas.size();
  };

  const std::size_t n0 = std::max<std::size_t>(options.level0_nodes, 2);
  const double s0 = (hi - lo) / static_cast<double>(n0 - 1);
  std::vector<double> coarse(n0);
  std::vector<double> coarse_lp(n0);
  for (std::size_t i = 0; i < n0; ++i) coarse[i] = level0_node(lo, hi, i, n0);
  log_post(coarse, coarse_lp);

  const double peak = *std::max_element(coarse_lp.begin(), coarse_lp.end());
  std::size_t first = n0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < n0; ++i) {
    if (coarse_lp[i] >= peak - options.log_drop) {
      first = std::min(first, i);
      last = i;
    }
  }
  const std::size_t i_lo = first > 0 ? first - 1 : 0;
  const std::size_t i_hi = last + 1 < n0 ? last + 1 : n0 - 1;
  const double window_lo = coarse[i_lo];
  const double window_hi = coarse[i_hi];

  double step = std::min(s0 / 4.0, scale / 2.0);
  auto n_cells = static_cast<std::size_t>(std::ceil((window_hi - window_lo) / step));
  n_cells = std::max<std::size_t>(n_cells, 1);
  std::vector<double> fine(n_cells + 1);
  for (std::size_t j = 0; j <= n_cells; ++j)
    fine[j] = j == n_cells ? window_hi
                           : window_lo + static_cast<double>(j) * ((window_hi - window_lo) /
                                                                   static_cast<double>(n_cells));
  std::vector<double> fine_lp(fine.size());
  log_post(fine, fine_lp);

  std::vector<double> nodes;
  std::vector<double> values;
  const auto assemble = [&] {
    nodes.clear();
    values.clear();
    for (std::size_t i = 0; i < i_lo; ++i) {
      nodes.push_back(coarse[i]);
      values.push_back(coarse_lp[i]);
    }
    nodes.insert(nodes.end(), fine.begin(), fine.end());
    values.insert(values.end(), fine_lp.begin(), fine_lp.end());
    for (std::size_t i = i_hi + 1; i < n0; ++i) {
      nodes.push_back(coarse[i]);
      values.push_back(coarse_lp[i]);
    }
  };
  const double edge_lo = lo + 2.0 * s0;
  const double edge_hi = hi - 2.0 * s0;

  assemble();
  PosteriorSummary summary = posterior_mean(nodes, values, window_lo, window_hi, edge_lo, edge_hi);
  std::size_t halvings = 0;
  while (halvings < options.max_halvings) {
    std::vector<double> mids(fine.size() - 1);
    for (std::size_t j = 0; j + 1 < fine.size(); ++j) mids[j] = 0.5 * (fine[j] + fine[j + 1]);
    std::vector<double> mids_lp(mids.size());
    log_post(mids, mids_lp);
    std::vector<double> merged(fine.size() + mids.size());
    std::vector<double> merged_lp(merged.size());
    for (std::size_t j = 0; j < fine.size(); ++j) {
      merged[2 * j] = fine[j];
      merged_lp[2 * j] = fine_lp[j];
      if (j < mids.size()) {
        merged[2 * j + 1] = mids[j];
        merged_lp[2 * j + 1] = mids_lp[j];
      }
    }
    fine = std::move(merged);
    fine_lp = std::move(merged_lp);
    step *= 0.5;
    ++halvings;

    assemble();
    const auto next = posterior_mean(nodes, values, window_lo, window_hi, edge_lo, edge_hi);
    const double moved = std::fabs(next.mean - summary.mean);
    summary = next;
    if (moved < scale / 100.0) break;
  }

  EstimateResult result;
  result.estimator = EstimatorKind::bayes;
  result.theta_hat = std::clamp(summary.mean, lo, hi);
  if (theta0) result.normalized_error = normalized_error(result.theta_hat, *theta0, eps, H);
  result.diagnostics.levels = halvings;
  result.diagnostics.resolution = (window_hi - window_lo) / static_cast<double>(fine.size() - 1);
  result.diagnostics.evaluations = evaluations;
  result.diagnostics.outside_mass = summary.outside_mass;
  result.diagnostics.boundary_warning = summary.edge_mass > 0.5;
  return result;
}

EstimateResult bayes(const Path& observed, const CuspModel& model, double eps, const Prior& prior,
                     std::optional<double> theta0) {
  return bayes_with_log_prior(
      observed, model, eps, [&prior](double t) { return prior.log_density(t); }, theta0);
}

// ---------------------------------------------------------------------------
// MDE

ReferencePathCache::ReferencePathCache(const CuspModel& model, std::size_t n_steps,
                                       std::size_t level0_nodes, std::size_t budget_bytes)
    : model_(model),
      lo_(model.theta_lo),
      hi_(model.theta_hi),
      spacing_((model.theta_hi - model.theta_lo) / static_cast<double>(level0_nodes - 1)),
      n_steps_(n_steps),
      max_zoom_paths_(budget_bytes / ((n_steps + 1) * sizeof(double))) {
  paths_.resize(level0_nodes);
  const auto n = static_cast<std::ptrdiff_t>(level0_nodes);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const double theta = level0_node(lo_, hi_, static_cast<std::size_t>(i), level0_nodes);
    paths_[static_cast<std::size_t>(i)] = solve_limit_ode(model, theta, n_steps).values;
  }
}

const std::vector<double>* ReferencePathCache::find(double theta) const {
  if (theta < lo_ || theta > hi_) return nullptr;
  const auto i = static_cast<std::size_t>(std::llround((theta - lo_) / spacing_));
  if (i >= paths_.size()) return nullptr;
  if (level0_node(lo_, hi_, i, paths_.size()) != theta) return nullptr;
  return &paths_[i];
}

ReferencePathCache::PathValues ReferencePathCache::get(double theta, std::size_t level) const {
  if (level == 0) {
    if (const auto* p = find(theta)) return PathValues(PathValues{}, p);
  }
  if (level == 1) {
    std::shared_lock lock(mutex_);
    const auto it = zoom_paths_.find(theta);
    if (it != zoom_paths_.end()) return it->second;
  }
  auto solved = std::make_shared<const std::vector<double>>(
      solve_limit_ode(model_, theta, n_steps_).values);
  if (level == 1) {
    std::unique_lock lock(mutex_);
    if (zoom_paths_.size() < max_zoom_paths_) zoom_paths_.emplace(theta, solved);
  }
  return solved;
}

std::size_t ReferencePathCache::stored_zoom_paths() const {
  std::shared_lock lock(mutex_);
  return zoom_paths_.size();
}

EstimateResult mde(const Path& observed, const CuspModel& model, double eps,
                   const ReferencePathCache* cache, std::optional<double> theta0) {
  require_uniform_grid(observed);
  const std::size_t n_steps = observed.steps();
  if (cache && cache->n_steps() != n_steps)
    throw ShapeError("MDE reference cache was built for a different grid");
  const double dt = observed.dt();

  const BatchObjective objective = [&](std::size_t level, std::span<const double> thetas,
                                       std::span<double> out) {
    for (std::size_t i = 0; i < thetas.size(); ++i) {
      if (cache) {
        out[i] = -kernels::squared_distance(observed.values, *cache->get(thetas[i], level), dt);
      } else {
        const auto ref = solve_limit_ode(model, thetas[i], n_steps).values;
        out[i] = -kernels::squared_distance(observed.values, ref, dt);
      }
    }
  };
  // The distance is smooth in θ, so the minimizer lies within one cell of the
  // previous level's incumbent.
  GridSearchOptions options;
  options.window_cells = 1;
  options.min_levels = 1;
  options.target_resolution = eps / 50.0;
  const auto search = hierarchical_argmax(objective, model.theta_lo, model.theta_hi, options);

  EstimateResult result;
  result.estimator = EstimatorKind::mde;
  result.theta_hat = search.argmax;
  if (theta0 && eps > 0.0)
    result.normalized_error = normalized_error(search.argmax, *theta0, eps, model.hurst());
  result.diagnostics.levels = search.levels;
  result.diagnostics.resolution = search.resolution;
  result.diagnostics.evaluations = search.evaluations;
  result.diagnostics.multiple_maximizers = search.tie;
  return result;
}

}  // namespace cusp
