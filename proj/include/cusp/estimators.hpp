#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include "cusp/model.hpp"

namespace cusp {

enum class EstimatorKind { mle, bayes, mde };

std::string to_string(EstimatorKind kind);
/// Throws ConfigError on an unknown name.
EstimatorKind estimator_from_string(const std::string& name);

struct EstimateDiagnostics {
  /// Zoom levels after the level-0 grid (grid estimators) or halvings of the
  /// posterior grid (bayes).
  std::size_t levels = 0;
  double resolution = 0.0;
  std::size_t evaluations = 0;
  /// More than one node attains the maximum at the final level.
  bool multiple_maximizers = false;
  /// Posterior mass carried by coarse nodes outside the refined window.
  double outside_mass = 0.0;
  bool boundary_warning = false;
};

struct EstimateResult {
  EstimatorKind estimator = EstimatorKind::mle;
  double theta_hat = 0.0;
  /// (θ̂ - θ0) / ε^{1/H}, present when θ0 was supplied.
  std::optional<double> normalized_error;
  EstimateDiagnostics diagnostics;
};

// ---------------------------------------------------------------------------
// Hierarchical grid search

struct GridSearchOptions {
  std::size_t level0_nodes = 200;
  double zoom = 10.0;
  /// Half-width of each zoom window, in cells of the previous level.
  std::size_t window_cells = 5;
  std::size_t min_levels = 3;
  std::size_t max_levels = 8;
  /// Stop zooming once the spacing is at or below this (after min_levels).
  double target_resolution = 0.0;
};

struct GridSearchResult {
  double argmax = 0.0;
  double value = 0.0;
  std::size_t levels = 0;
  double resolution = 0.0;
  bool tie = false;
  std::size_t evaluations = 0;
  /// Incumbent objective after each level; non-decreasing.
  std::vector<double> level_best;
};

/// Evaluates the objective at every θ of the batch; the first argument is the
/// zoom level the batch belongs to (0 for the coarse grid).
using BatchObjective =
    std::function<void(std::size_t, std::span<const double>, std::span<double>)>;

/// Level 0: `level0_nodes` equispaced nodes on [lo, hi]. Each further level
/// refines around the incumbent with spacing divided by `zoom`. The
/// incumbent is always re-evaluated, so the best value never decreases.
/// Ties go to the smallest θ.
GridSearchResult hierarchical_argmax(const BatchObjective& objective, double lo, double hi,
                                     const GridSearchOptions& options);

// ---------------------------------------------------------------------------
// Priors

/// Positive continuous prior density on Θ, normalized to 1 (checked to 1e-6
/// by quadrature at construction).
class Prior {
public:
  static Prior uniform(double lo, double hi);
  static Prior truncated_gaussian(double mu, double sigma, double lo, double hi);
  /// "uniform" {} or "truncated_gaussian" {mu, sigma}.
  static Prior from_name(const std::string& name, const std::vector<double>& params, double lo,
                         double hi);

  double log_density(double theta) const;
  double density(double theta) const;
  std::string name() const { return name_; }

private:
  Prior(std::string name, std::vector<double> params, double lo, double hi);
  void check_normalization() const;

  std::string name_;
  std::vector<double> params_;
  double lo_ = 0.0;
  double hi_ = 1.0;
  double log_norm_ = 0.0;
};

// ---------------------------------------------------------------------------
// Estimators

/// Maximum-likelihood estimate by hierarchical grid search over Θ; final
/// spacing at most ε^{1/H}/50 and at least three zoom levels.
EstimateResult mle(const Path& observed, const CuspModel& model, double eps,
                   std::optional<double> theta0 = std::nullopt);

struct BayesOptions {
  std::size_t level0_nodes = 200;
  /// Coarse nodes whose log posterior is within this of the maximum span
  /// the refined window.
  double log_drop = 30.0;
  std::size_t max_halvings = 14;
};

/// Posterior mean under quadratic loss.
EstimateResult bayes(const Path& observed, const CuspModel& model, double eps, const Prior& prior,
                     std::optional<double> theta0 = std::nullopt);

/// Posterior mean for an arbitrary (possibly unnormalized) log prior density.
EstimateResult bayes_with_log_prior(const Path& observed, const CuspModel& model, double eps,
                                    const std::function<double(double)>& log_prior,
                                    std::optional<double> theta0 = std::nullopt,
                                    const BayesOptions& options = {});

/// Limit paths x_t(θ) for the MDE grid search, shared across replicates of
/// one (model, n_steps). Level-0 nodes are solved up front. Nodes of the
/// first zoom level depend only on the level-0 incumbent, so replicates hit
/// the same θ values; those are solved on first use and kept while the
/// memory budget allows. Safe to use from several threads.
class ReferencePathCache {
public:
  using PathValues = std::shared_ptr<const std::vector<double>>;

  ReferencePathCache(const CuspModel& model, std::size_t n_steps,
                     std::size_t level0_nodes = GridSearchOptions{}.level0_nodes,
                     std::size_t budget_bytes = std::size_t{1} << 30);

  /// Cached level-0 path for θ, or nullptr when θ is not a level-0 node.
  const std::vector<double>* find(double theta) const;
  /// Path for θ at the given zoom level; solved and possibly stored on a miss.
  PathValues get(double theta, std::size_t level) const;
  std::size_t n_steps() const { return n_steps_; }
  std::size_t stored_zoom_paths() const;

private:
  CuspModel model_;
  double lo_, hi_, spacing_;
  std::size_t n_steps_;
  std::size_t max_zoom_paths_;
  std::vector<std::vector<double>> paths_;
  mutable std::shared_mutex mutex_;
  mutable std::map<double, PathValues> zoom_paths_;
};

/// Minimum-distance estimate: argmin_θ ∫ (X_t - x_t(θ))² dt with final
/// spacing at most ε/50. `cache` must match (model, observed.steps()).
EstimateResult mde(const Path& observed, const CuspModel& model, double eps,
                   const ReferencePathCache* cache = nullptr,
                   std::optional<double> theta0 = std::nullopt);

/// (θ̂ - θ0) / ε^{1/H}.
double normalized_error(double theta_hat, double theta0, double eps, double H);

}  // namespace cusp
