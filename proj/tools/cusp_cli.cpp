#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "cusp/error.hpp"
#include "cusp/harness.hpp"
#include "cusp/likelihood.hpp"
#include "cusp/limit_law.hpp"

namespace fs = std::filesystem;

namespace {

enum ExitCode { kOk = 0, kConfigInvalid = 1, kCheckFailed = 2, kRuntimeError = 3 };

int cmd_validate(const std::string& path) {
  const auto config = cusp::load_config(path);
  const auto report = cusp::validate_model(config.model);
  const auto constants = cusp::limit_constants(config.model, config.theta0);
  std::printf("min x_T over Theta endpoints: %.10g\n", report.min_terminal_state);
  std::printf("growth constant L: %.6g\n", report.growth_constant);
  std::printf("H = %.6g  Gamma^2 = %.10g  gamma = %.10g\n", constants.H, constants.gamma_sq,
              constants.gamma);
  for (double eps : config.eps_list)
    std::printf("eps %g: %zu steps\n", eps, config.steps_for(eps));
  if (!report.ok()) {
    for (const auto& v : report.violations) std::printf("violation: %s\n", v.c_str());
    return kConfigInvalid;
  }
  std::printf("ok\n");
  return kOk;
}

int cmd_simulate(const std::string& path, std::size_t replicates) {
  const auto config = cusp::load_config(path);
  cusp::require_valid_model(config);
  const fs::path dir = fs::path(config.out_dir) / "paths";
  fs::create_directories(dir);
  for (std::size_t i = 0; i < config.eps_list.size(); ++i) {
    const double eps = config.eps_list[i];
    const std::size_t n = config.steps_for(eps);
    {
      std::ofstream out(dir / ("limit_e" + std::to_string(i) + ".csv"));
      cusp::write_path_csv(cusp::solve_limit_ode(config.model, config.theta0, n), out);
    }
    const auto family = cusp::stream_family(config.master_seed, cusp::StreamPurpose::replicate,
                                            static_cast<std::uint32_t>(i));
    for (std::size_t r = 0; r < replicates; ++r) {
      const auto w = cusp::simulate_wiener(family.at(static_cast<std::uint32_t>(r)), n, config.model.T);
      const auto x = cusp::simulate_sde(config.model, config.theta0, eps, w);
      std::ofstream out(dir / ("path_e" + std::to_string(i) + "_r" + std::to_string(r) + ".csv"));
      cusp::write_path_csv(x, out);
    }
  }
  std::printf("wrote paths to %s\n", dir.c_str());
  return kOk;
}

int cmd_estimate(const std::string& path) {
  const auto config = cusp::load_config(path);
  const auto report = cusp::run_experiment(config);
  if (!report) {
    std::printf("stopped after %zu noise levels; rerun to resume\n", *config.stop_after_eps);
    return kOk;
  }
  std::cout << cusp::to_text(*report);
  return kOk;
}

int cmd_limit_law(const std::string& path) {
  const auto config = cusp::load_config(path);
  const auto batch = cusp::run_limit_law(config);
  auto m = cusp::moments_of(batch, 2.0);
  std::printf("H = %.4g  U = %g  n_per_side = %zu  samples = %zu\n", config.model.hurst(),
              config.limit.U, config.limit.n_per_side, batch.size());
  std::printf("E u_hat^2   = %.6g +- %.3g\n", m.u_hat.mean, m.u_hat.se);
  std::printf("E u_tilde^2 = %.6g +- %.3g\n", m.u_tilde.mean, m.u_tilde.se);
  std::printf("truncation suspects: %zu  ties: %zu\n", m.truncation_suspects, m.ties);
  return kOk;
}

int cmd_report(const std::string& dir) {
  const auto report = cusp::build_report(dir);
  cusp::write_report(report, dir);
  std::cout << cusp::to_text(report);
  return kOk;
}

int cmd_properties(const std::string& path) {
  const auto config = cusp::load_config(path);
  cusp::require_valid_model(config);
  bool failed = false;
  for (const auto& result : cusp::property_suite(config)) {
    std::printf("%s\n", cusp::format_property(result).c_str());
    failed = failed || result.status == cusp::PropertyStatus::fail;
  }
  return failed ? kCheckFailed : kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cusp-location estimation for small-noise diffusions"};
  app.require_subcommand(1);

  std::string config;
  std::string dir;
  std::size_t replicates = 5;

  auto* validate = app.add_subcommand("validate", "Check a config and its model conditions");
  validate->add_option("config", config)->required();
  auto* simulate = app.add_subcommand("simulate", "Write sample paths and limit paths as CSV");
  simulate->add_option("config", config)->required();
  simulate->add_option("-r,--replicates", replicates, "Paths per noise level");
  auto* estimate = app.add_subcommand("estimate", "Run the Monte Carlo experiment and its report");
  estimate->add_option("config", config)->required();
  auto* limit = app.add_subcommand("limit-law", "Sample the limit variables and their moments");
  limit->add_option("config", config)->required();
  auto* report = app.add_subcommand("report", "Recompute the report from an output directory");
  report->add_option("dir", dir)->required();
  auto* properties = app.add_subcommand("properties", "Run the property checks");
  properties->add_option("config", config)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kConfigInvalid;
  }

  try {
    if (*validate) return cmd_validate(config);
    if (*simulate) return cmd_simulate(config, replicates);
    if (*estimate) return cmd_estimate(config);
    if (*limit) return cmd_limit_law(config);
    if (*report) return cmd_report(dir);
    if (*properties) return cmd_properties(config);
  } catch (const cusp::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigInvalid;
  } catch (const cusp::InvalidFunctionError& e) {
    std::fprintf(stderr, "invalid model function: %s\n", e.what());
    return kConfigInvalid;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kRuntimeError;
  }
  return kOk;
}
