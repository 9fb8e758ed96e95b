#include "cusp/model.hpp"

#include <algorithm>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include "cusp/error.hpp"

namespace cusp {

namespace {

double integrate(const std::function<double(double)>& f, double lo, double hi) {
  if (hi <= lo) return 0.0;
  static thread_local boost::math::quadrature::tanh_sinh<double> rule;
  return rule.integrate(f, lo, hi, 1e-13);
}

/// ∫_lo^hi f, split at `split` when it falls strictly inside.
double integrate_split(const std::function<double(double)>& f, double lo, double hi, double split) {
  if (split > lo && split < hi) return integrate(f, lo, split) + integrate(f, split, hi);
  return integrate(f, lo, hi);
}

void require_increasing(const Path& path, const char* what) {
  for (std::size_t k = 1; k < path.values.size(); ++k) {
    if (!(path.values[k] > path.values[k - 1])) {
      std::ostringstream msg;
      msg << what << ": limit path not strictly increasing at step " << k
          << " (drift must stay positive)";
      throw NumericalError(msg.str());
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// HFunction

HFunction HFunction::constant(double c) { return HFunction(Kind::constant, {c}); }

HFunction HFunction::logistic(double c, double d) { return HFunction(Kind::logistic, {c, d}); }

HFunction HFunction::affine_clamped(double c, double d, double lo, double hi) {
  if (!(hi > lo)) throw ConfigError("affine_clamped h needs lo < hi");
  return HFunction(Kind::affine_clamped, {c, d, lo, hi});
}

HFunction HFunction::from_name(std::string_view name, const std::vector<double>& params) {
  auto need = [&](std::size_t n) {
    if (params.size() != n) {
      std::ostringstream msg;
      msg << "h '" << name << "' takes " << n << " parameter(s), got " << params.size();
      throw ConfigError(msg.str());
    }
  };
  if (name == "constant") {
    need(1);
    return constant(params[0]);
  }
  if (name == "logistic") {
    need(2);
    return logistic(params[0], params[1]);
  }
  if (name == "affine_clamped") {
    need(4);
    return affine_clamped(params[0], params[1], params[2], params[3]);
  }
  throw ConfigError("unknown h function '" + std::string(name) + "'");
}

double HFunction::operator()(double x) const {
  switch (kind_) {
    case Kind::constant:
      return params_[0];
    case Kind::logistic:
      return params_[0] + params_[1] / (1.0 + x * x);
    case Kind::affine_clamped: {
      const double mid = 0.5 * (params_[2] + params_[3]);
      const double half = 0.5 * (params_[3] - params_[2]);
      return mid + half * std::tanh((params_[0] + params_[1] * x - mid) / half);
    }
  }
  return params_[0];
}

double HFunction::derivative(double x) const {
  switch (kind_) {
    case Kind::constant:
      return 0.0;
    case Kind::logistic: {
      const double q = 1.0 + x * x;
      return -2.0 * params_[1] * x / (q * q);
    }
    case Kind::affine_clamped: {
      const double mid = 0.5 * (params_[2] + params_[3]);
      const double half = 0.5 * (params_[3] - params_[2]);
      const double th = std::tanh((params_[0] + params_[1] * x - mid) / half);
      return params_[1] * (1.0 - th * th);
    }
  }
  return 0.0;
}

double HFunction::lower_bound() const {
  switch (kind_) {
    case Kind::constant:
      return params_[0];
    case Kind::logistic:
      return params_[0] + std::min(params_[1], 0.0);
    case Kind::affine_clamped:
      return params_[1] == 0.0 ? (*this)(0.0) : params_[2];
  }
  return params_[0];
}

double HFunction::upper_bound() const {
  switch (kind_) {
    case Kind::constant:
      return params_[0];
    case Kind::logistic:
      return params_[0] + std::max(params_[1], 0.0);
    case Kind::affine_clamped:
      return params_[1] == 0.0 ? (*this)(0.0) : params_[3];
  }
  return params_[0];
}

double HFunction::derivative_bound() const {
  switch (kind_) {
    case Kind::constant:
      return 0.0;
    case Kind::logistic:
      // max of 2|x|/(1+x^2)^2 is 3√3/8 at x = 1/√3
      return std::fabs(params_[1]) * 3.0 * std::sqrt(3.0) / 8.0;
    case Kind::affine_clamped:
      return std::fabs(params_[1]);
  }
  return 0.0;
}

std::string HFunction::name() const {
  switch (kind_) {
    case Kind::constant:
      return "constant";
    case Kind::logistic:
      return "logistic";
    case Kind::affine_clamped:
      return "affine_clamped";
  }
  return "constant";
}

// ---------------------------------------------------------------------------
// Paths

std::vector<double> uniform_grid(double T, std::size_t n_steps) {
  if (n_steps == 0) throw DomainError("time grid needs at least one step");
  std::vector<double> times(n_steps + 1);
  const double dt = T / static_cast<double>(n_steps);
  for (std::size_t k = 0; k < n_steps; ++k) times[k] = static_cast<double>(k) * dt;
  times[n_steps] = T;
  return times;
}

void require_same_grid(const Path& lhs, const Path& rhs) {
  if (lhs.times.size() != rhs.times.size()) {
    std::ostringstream msg;
    msg << "grid mismatch: " << lhs.times.size() << " vs " << rhs.times.size() << " nodes";
    throw ShapeError(msg.str());
  }
  if (lhs.values.size() != lhs.times.size() || rhs.values.size() != rhs.times.size())
    throw ShapeError("path values do not match its time grid");
  const double tol = 1e-12 * std::max(1.0, std::fabs(lhs.horizon()));
  for (std::size_t k = 0; k < lhs.times.size(); ++k) {
    if (std::fabs(lhs.times[k] - rhs.times[k]) > tol) {
      std::ostringstream msg;
      msg << "grid mismatch at node " << k << ": t=" << lhs.times[k] << " vs " << rhs.times[k];
      throw ShapeError(msg.str());
    }
  }
}

void require_uniform_grid(const Path& path) {
  if (path.times.size() < 2 || path.values.size() != path.times.size())
    throw ShapeError("path needs at least two nodes and one value per node");
  if (path.times.front() != 0.0) throw ShapeError("path grid must start at t = 0");
  const double dt = path.dt();
  const double tol = 1e-9 * dt;
  for (std::size_t k = 1; k < path.times.size(); ++k) {
    if (std::fabs((path.times[k] - path.times[k - 1]) - dt) > tol)
      throw ShapeError("path grid is not uniform");
  }
}

void write_path_csv(const Path& path, std::ostream& out) {
  out << "t,value\n";
  char buf[64];
  for (std::size_t k = 0; k < path.times.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", path.times[k], path.values[k]);
    out << buf;
  }
}

Path read_path_csv(std::istream& in, PathKind kind) {
  std::string line;
  if (!std::getline(in, line) || line != "t,value") throw ShapeError("path CSV: missing `t,value` header");
  Path path;
  path.kind = kind;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw ShapeError("path CSV: malformed row '" + line + "'");
    path.times.push_back(std::stod(line.substr(0, comma)));
    path.values.push_back(std::stod(line.substr(comma + 1)));
  }
  return path;
}

// ---------------------------------------------------------------------------
// Limit ODE

Path solve_limit_ode(const CuspModel& model, double theta, std::size_t n_steps) {
  if (n_steps < 100) throw DomainError("solve_limit_ode needs n_steps >= 100");
  Path path{uniform_grid(model.T, n_steps), std::vector<double>(n_steps + 1), PathKind::deterministic};
  const double dt = model.T / static_cast<double>(n_steps);
  double x = model.x0;
  path.values[0] = x;
  for (std::size_t k = 0; k < n_steps; ++k) {
    const double k1 = drift(model, theta, x);
    const double k2 = drift(model, theta, x + 0.5 * dt * k1);
    const double k3 = drift(model, theta, x + 0.5 * dt * k2);
    const double k4 = drift(model, theta, x + dt * k3);
    x += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    path.values[k + 1] = x;
  }
  require_increasing(path, "solve_limit_ode");
  return path;
}

Path solve_limit_ode_euler(const CuspModel& model, double theta, std::size_t n_steps) {
  if (n_steps < 1) throw DomainError("solve_limit_ode_euler needs n_steps >= 1");
  Path path{uniform_grid(model.T, n_steps), std::vector<double>(n_steps + 1), PathKind::deterministic};
  const double dt = model.T / static_cast<double>(n_steps);
  double x = model.x0;
  path.values[0] = x;
  for (std::size_t k = 0; k < n_steps; ++k) {
    x = x + drift(model, theta, x) * dt;
    path.values[k + 1] = x;
  }
  require_increasing(path, "solve_limit_ode_euler");
  return path;
}

double time_of_level(const CuspModel& model, double theta, double x) {
  if (x < model.x0) {
    std::ostringstream msg;
    msg << "time_of_level: x=" << x << " below x0=" << model.x0;
    throw DomainError(msg.str());
  }
  if (x == model.x0) return 0.0;
  const auto inverse_speed = [&](double y) { return 1.0 / drift(model, theta, y); };
  const double t = integrate_split(inverse_speed, model.x0, x, theta);
  if (t > model.T * (1.0 + 1e-6)) {
    std::ostringstream msg;
    msg << "time_of_level: x=" << x << " is not reached by t=T (needs t=" << t << ")";
    throw DomainError(msg.str());
  }
  return t;
}

// ---------------------------------------------------------------------------
// Validation

ValidationReport validate_model(const CuspModel& model, double b, double H1,
                                const ValidationOptions& options) {
  ValidationReport report;
  auto& v = report.violations;

  if (!(model.kappa > 0.0 && model.kappa < 0.5)) v.emplace_back("kappa out of (0,1/2)");
  if (!(model.a > 0.0 || (options.allow_zero_amplitude && model.a == 0.0)))
    v.emplace_back("a not positive");
  if (!(model.T > 0.0)) v.emplace_back("T not positive");
  if (!(model.theta_lo < model.theta_hi)) v.emplace_back("theta interval empty");
  if (!(model.theta_lo > model.x0)) v.emplace_back("theta_lo not above x0");

  if (!std::isfinite(model.h(model.x0)))
    throw InvalidFunctionError("h(x0) is not finite");
  if (!(model.T > 0.0) || !std::isfinite(model.a) || !std::isfinite(model.kappa)) return report;

  std::vector<double> thetas;
  if (options.dense_theta_check && options.dense_theta_points >= 2) {
    for (std::size_t i = 0; i < options.dense_theta_points; ++i)
      thetas.push_back(model.theta_lo + (model.theta_hi - model.theta_lo) * static_cast<double>(i) /
                                            static_cast<double>(options.dense_theta_points - 1));
  } else {
    thetas = {model.theta_lo, model.theta_hi};
  }

  double min_xT = std::numeric_limits<double>::infinity();
  double max_xT = -std::numeric_limits<double>::infinity();
  bool ode_ok = true;
  for (double theta : thetas) {
    try {
      const Path x = solve_limit_ode(model, theta, std::max<std::size_t>(options.ode_steps, 100));
      min_xT = std::min(min_xT, x.values.back());
      max_xT = std::max(max_xT, x.values.back());
    } catch (const NumericalError&) {
      ode_ok = false;
    }
  }
  if (!ode_ok) {
    v.emplace_back("limit ODE not monotone");
    max_xT = model.x0 + model.T * std::max(model.h.upper_bound(), 1.0);
  } else {
    report.min_terminal_state = min_xT;
    if (!(model.theta_hi < min_xT)) v.emplace_back("theta_hi not below inf x_T(theta)");
  }

  const double lo = model.x0;
  const double hi = max_xT + 1.0;
  const std::size_t n = std::max<std::size_t>(options.range_samples, 2);
  double h_min = std::numeric_limits<double>::infinity();
  double dh_max = 0.0;
  double h_abs_max = 0.0;
  std::vector<double> xs(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    xs[i] = x;
    const double hx = model.h(x);
    const double dh = model.h.derivative(x);
    if (!std::isfinite(hx) || !std::isfinite(dh)) {
      std::ostringstream msg;
      msg << "h is not finite at x=" << x;
      throw InvalidFunctionError(msg.str());
    }
    h_min = std::min(h_min, hx);
    dh_max = std::max(dh_max, std::fabs(dh));
    h_abs_max = std::max(h_abs_max, std::fabs(hx));
  }
  if (!(b > 0.0) || h_min < b) v.emplace_back("h not separated from zero");
  if (dh_max > H1 * (1.0 + 1e-12) + 1e-15) v.emplace_back("h derivative exceeds H1");

  // |a|x-θ|^κ + h| <= a(|x|^κ + |θ|^κ) + sup|h| <= L (1 + |x|^κ)
  const double theta_abs = std::max(std::fabs(model.theta_lo), std::fabs(model.theta_hi));
  const double L = std::fabs(model.a) * (1.0 + cusp_power(theta_abs, model.kappa)) + h_abs_max;
  report.growth_constant = L;
  bool growth_ok = true;
  for (double theta : {model.theta_lo, 0.5 * (model.theta_lo + model.theta_hi), model.theta_hi}) {
    for (double x : xs) {
      if (std::fabs(drift(model, theta, x)) > L * (1.0 + cusp_power(x, model.kappa)) * (1.0 + 1e-12))
        growth_ok = false;
    }
  }
  if (!growth_ok) v.emplace_back("growth bound violated");
  return report;
}

ValidationReport validate_model(const CuspModel& model, const ValidationOptions& options) {
  return validate_model(model, model.h.lower_bound(), model.h.derivative_bound(), options);
}

// ---------------------------------------------------------------------------
// Stochastic paths

Path simulate_wiener(const NoiseStream& stream, std::size_t n_steps, double T) {
  Path path{uniform_grid(T, n_steps), std::vector<double>(n_steps + 1), PathKind::wiener};
  auto engine = stream.engine();
  std::normal_distribution<double> normal(0.0, 1.0);
  const double sd = std::sqrt(T / static_cast<double>(n_steps));
  double w = 0.0;
  path.values[0] = 0.0;
  for (std::size_t k = 0; k < n_steps; ++k) {
    w += sd * normal(engine);
    path.values[k + 1] = w;
  }
  return path;
}

Path simulate_sde(const CuspModel& model, double theta, double eps, const Path& wiener) {
  if (eps < 0.0) throw DomainError("simulate_sde needs eps >= 0");
  if (wiener.steps() == 0) throw ShapeError("Wiener path is empty");
  if (std::fabs(wiener.horizon() - model.T) > 1e-12 * std::max(1.0, model.T)) {
    std::ostringstream msg;
    msg << "Wiener path horizon " << wiener.horizon() << " differs from model T=" << model.T;
    throw ShapeError(msg.str());
  }
  const std::size_t n = wiener.steps();
  Path path{wiener.times, std::vector<double>(n + 1), PathKind::observation};
  const double dt = model.T / static_cast<double>(n);
  double x = model.x0;
  path.values[0] = x;
  for (std::size_t k = 0; k < n; ++k) {
    x = x + drift(model, theta, x) * dt + eps * (wiener.values[k + 1] - wiener.values[k]);
    path.values[k + 1] = x;
  }
  return path;
}

double sup_deviation(const Path& observed, const Path& deterministic) {
  require_same_grid(observed, deterministic);
  double sup = 0.0;
  for (std::size_t k = 0; k < observed.values.size(); ++k)
    sup = std::max(sup, std::fabs(observed.values[k] - deterministic.values[k]));
  return sup;
}

double sup_abs(const Path& path) {
  double sup = 0.0;
  for (double v : path.values) sup = std::max(sup, std::fabs(v));
  return sup;
}

double occupation_integral(const Path& observed, const std::function<double(double)>& g) {
  const std::size_t n = observed.values.size();
  if (n < 2) return 0.0;
  double acc = 0.0;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const double dt = observed.times[k + 1] - observed.times[k];
    acc += 0.5 * dt * (g(observed.values[k]) + g(observed.values[k + 1]));
  }
  return acc;
}

double occupation_limit(const CuspModel& model, double theta0,
                        const std::function<double(double)>& g, std::size_t ode_steps) {
  const double xT = solve_limit_ode(model, theta0, ode_steps).values.back();
  const auto integrand = [&](double x) { return g(x) / drift(model, theta0, x); };
  return integrate_split(integrand, model.x0, xT, theta0);
}

std::size_t steps_for_eps(double T, double eps) {
  constexpr std::size_t floor_steps = 1'000'000;
  constexpr std::size_t min_steps = 100;
  if (!(eps > 0.0)) return floor_steps;
  const double n = std::ceil(T / (eps * eps) - 1e-9);
  if (n >= static_cast<double>(floor_steps)) return floor_steps;
  return std::max(min_steps, static_cast<std::size_t>(n));
}

}  // namespace cusp
