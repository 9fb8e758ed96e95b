#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "cusp/estimators.hpp"
#include "cusp/limit_law.hpp"
#include "cusp/model.hpp"
#include "cusp/noise.hpp"

namespace cusp {

struct LimitSpec {
  double U = 15.0;
  std::size_t n_per_side = 1500;
  std::size_t n_samples = 10000;
};

/// Sizes of the property checks. Empty eps_list means "use the experiment's".
struct PropertySpec {
  std::vector<double> eps_list;
  std::size_t deviation_replicates = 1000;
  std::size_t occupation_replicates = 200;
  double occupation_tolerance = 0.05;
  double holder_eps = 0.02;
  std::size_t holder_replicates = 2000;
  std::size_t anchor_replicates = 20;
  std::size_t fbm_samples = 10000;
  /// Sabotage switch for the occupation check: integrate the path on a grid
  /// with half its real step.
  bool grid_mismatch = false;
};

struct ExperimentConfig {
  CuspModel model;
  double theta0 = 1.0;
  std::vector<double> eps_list;
  std::size_t n_replicates = 1;
  /// Fixed step count; unset means the dt <= ε² rule.
  std::optional<std::size_t> n_steps;
  std::vector<EstimatorKind> estimators;
  std::string prior_name = "uniform";
  std::vector<double> prior_params;
  LimitSpec limit;
  std::uint64_t master_seed = 0;
  std::string out_dir = "out";
  PropertySpec properties;
  /// Worker threads for replicates; 0 uses the OpenMP default.
  std::size_t threads = 0;
  /// Stop after this many noise levels, as if interrupted.
  std::optional<std::size_t> stop_after_eps;

  std::size_t steps_for(double eps) const;
  Prior prior() const;
};

/// Parses and checks a config: theta0 in Θ, eps_list positive and strictly
/// decreasing, n_replicates >= 1, known estimators and prior. Throws
/// ConfigError. Does not run validate_model.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical JSON of everything that affects results (not out_dir, threads
/// or stop_after_eps).
nlohmann::json canonical_json(const ExperimentConfig& config);
std::string fingerprint(const ExperimentConfig& config);

/// Throws ConfigError listing the violated model conditions.
void require_valid_model(const ExperimentConfig& config);

/// Stream groups: every random quantity of an experiment draws from its own
/// group so that no two uses can share a stream.
enum class StreamPurpose : std::uint32_t {
  replicate = 1,
  limit_law = 2,
  deviation = 3,
  occupation = 4,
  holder = 5,
  anchor = 6,
  fbm_check = 7,
  z_moments = 8,
};

StreamFamily stream_family(std::uint64_t master_seed, StreamPurpose purpose,
                           std::uint32_t index);

// ---------------------------------------------------------------------------
// Replicates

struct EstimateRow {
  std::size_t replicate = 0;
  EstimatorKind estimator = EstimatorKind::mle;
  double theta_hat = 0.0;
  double normalized_error = 0.0;
  int multiplicity = 0;
  double eps = 0.0;
  double kappa = 0.0;
  std::uint64_t seed = 0;
};

struct FailureRow {
  std::size_t replicate = 0;
  EstimatorKind estimator = EstimatorKind::mle;
  double eps = 0.0;
  std::uint64_t seed = 0;
  std::string message;
};

/// Header `replicate,estimator,theta_hat,normalized_error,multiplicity,eps,kappa,seed`.
void write_estimates_csv(const std::vector<EstimateRow>& rows, std::ostream& out);
std::vector<EstimateRow> read_estimates_csv(std::istream& in);
void write_failures_csv(const std::vector<FailureRow>& rows, std::ostream& out);
std::vector<FailureRow> read_failures_csv(std::istream& in);

struct EpsRun {
  std::vector<EstimateRow> rows;
  std::vector<FailureRow> failures;
};

/// All replicates of one noise level, estimators in config order, rows in
/// replicate order. Throws ExperimentAborted past the 1% failure budget.
EpsRun run_eps(const ExperimentConfig& config, std::size_t eps_index);

// ---------------------------------------------------------------------------
// Report

struct RiskRow {
  double eps = 0.0;
  EstimatorKind estimator = EstimatorKind::mle;
  std::size_t n = 0;
  std::size_t failures = 0;
  double rmse = 0.0;
  /// ε^{-2/H} mean (θ̂ - θ0)² and its standard error.
  double risk = 0.0;
  double risk_se = 0.0;
  std::optional<double> ks;
  bool ks_insufficient = false;
};

struct RateRow {
  EstimatorKind estimator = EstimatorKind::mle;
  std::size_t points = 0;
  double slope = 0.0;
  double slope_se = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
};

struct ExperimentReport {
  nlohmann::json config;
  double H = 0.0;
  double gamma_sq = 0.0;
  double gamma = 0.0;
  std::vector<RiskRow> risks;
  std::vector<RateRow> rates;
  /// E(û/γ)², E(ũ/γ)² from the limit samples.
  double target_u_hat = 0.0;
  double target_u_hat_se = 0.0;
  double target_u_tilde = 0.0;
  double target_u_tilde_se = 0.0;
  std::size_t limit_samples = 0;
  std::size_t limit_suspects = 0;
  /// Noise levels where Bayes risk exceeds MLE risk by more than 2 combined SE.
  std::vector<double> bayes_flags;
  double ks_threshold = 0.08;

  const RiskRow* find(double eps, EstimatorKind estimator) const;
  const RateRow* rate(EstimatorKind estimator) const;
};

inline constexpr std::size_t kMinKsSample = 100;

/// Recomputes every aggregate from the files in `dir`.
ExperimentReport build_report(const std::filesystem::path& dir);
nlohmann::json to_json(const ExperimentReport& report);
std::string to_text(const ExperimentReport& report);

/// Writes report.json, report.txt, rate_points.csv and ecdf_*.csv.
void write_report(const ExperimentReport& report, const std::filesystem::path& dir);

/// Runs (or resumes) the experiment into config.out_dir and writes the report.
/// Returns std::nullopt when stopped early by stop_after_eps.
std::optional<ExperimentReport> run_experiment(const ExperimentConfig& config);

/// Draws (or reuses) limit_samples.csv and the golden moment files.
std::vector<LimitVariables> run_limit_law(const ExperimentConfig& config);

/// Writes `contents` to `path` through a temporary file and a rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

// ---------------------------------------------------------------------------
// Properties

enum class PropertyStatus { pass, fail, skipped };

std::string to_string(PropertyStatus status);

struct PropertyResult {
  std::string name;
  PropertyStatus status = PropertyStatus::skipped;
  std::map<std::string, double> measured;
  std::string detail;
};

PropertyResult check_deviation_scaling(const ExperimentConfig& config);
PropertyResult check_holder(const ExperimentConfig& config);
PropertyResult check_occupation(const ExperimentConfig& config);
PropertyResult check_anchor(const ExperimentConfig& config);
PropertyResult check_fbm_covariance(const ExperimentConfig& config);

/// Mean and variance of ln Z_ε(u) against -Γ²|u|^{2H}/2 and Γ²|u|^{2H}, each
/// within 5% + 3 SE.
PropertyResult check_z_moments(const ExperimentConfig& config, double eps,
                               std::size_t replicates, const std::vector<double>& us);

std::vector<PropertyResult> property_suite(const ExperimentConfig& config);
std::string format_property(const PropertyResult& result);

}  // namespace cusp
