#include "nlbound/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <Eigen/LU>
#include <fmt/format.h>

#include "nlbound/csv.hpp"
#include "nlbound/error.hpp"

namespace nlbound {

double EnvelopeTerm::coefficient(double t) const {
  double c = 0.0;
  for (const auto& q : coefficients) c += std::abs(q(t));
  return c;
}

double EnvelopeTerm::coefficient_bound() const {
  double c = 0.0;
  for (const auto& q : coefficients) c += q.magnitude_bound();
  return c;
}

LipschitzEnvelope LipschitzEnvelope::linear(QuasiPeriodicScalar l, double region_radius) {
  return power_series({EnvelopeTerm{{std::move(l)}, 1.0}}, region_radius);
}

LipschitzEnvelope LipschitzEnvelope::power_series(std::vector<EnvelopeTerm> terms, double region_radius) {
  if (!(region_radius > 0.0)) throw ValidationError("envelope region radius must be positive");
  for (const auto& t : terms) {
    // Exponents below 1 lose uniqueness at X = 0.
    if (!(t.exponent >= 1.0) || !std::isfinite(t.exponent)) {
      throw ValidationError(fmt::format("envelope exponent {} is below 1", t.exponent));
    }
  }
  LipschitzEnvelope env;
  env.terms_ = std::move(terms);
  env.region_radius_ = region_radius;
  return env;
}

double LipschitzEnvelope::operator()(double t, double x_norm) const {
  const double x = std::max(x_norm, 0.0);
  double v = 0.0;
  for (const auto& term : terms_) {
    v += term.coefficient(t) * (term.exponent == 1.0 ? x : std::pow(x, term.exponent));
  }
  return v;
}

double LipschitzEnvelope::linear_coefficient(double t) const {
  double v = 0.0;
  for (const auto& term : terms_)
    if (term.exponent == 1.0) v += term.coefficient(t);
  return v;
}

bool LipschitzEnvelope::is_linear() const {
  return std::all_of(terms_.begin(), terms_.end(), [](const EnvelopeTerm& t) { return t.exponent == 1.0; });
}

LipschitzEnvelope envelope_from_polynomial(const PolynomialVectorField& f) {
  // ||f||_2 <= sum_m |f_m| and |x_j| <= ||x||_2, so each monomial of total
  // degree d contributes |c| ||x||^d.
  std::map<int, EnvelopeTerm> by_degree;
  for (const auto& m : f.terms()) {
    auto& term = by_degree[m.degree()];
    term.exponent = m.degree();
    term.coefficients.push_back(m.coefficient);
  }
  std::vector<EnvelopeTerm> terms;
  for (auto& [degree, term] : by_degree) {
    // Constant coefficients collapse into a single absolute sum.
    EnvelopeTerm merged{{}, term.exponent};
    double constant_sum = 0.0;
    for (auto& q : term.coefficients) {
      if (q.terms().empty()) {
        constant_sum += std::abs(q.offset());
      } else {
        merged.coefficients.push_back(std::move(q));
      }
    }
    if (constant_sum > 0.0 || merged.coefficients.empty()) {
      merged.coefficients.insert(merged.coefficients.begin(), QuasiPeriodicScalar(constant_sum));
    }
    terms.push_back(std::move(merged));
  }
  return LipschitzEnvelope::power_series(std::move(terms));
}

double linear_l_from_energy(const SystemSpec& spec, const Eigen::VectorXd& x0) {
  if (!spec.preset) throw UnsupportedError("energy-based Lipschitz constant needs the benchmark preset");
  if (x0.size() != 2) throw DimensionError("benchmark initial state must be 2-dimensional");
  const auto& p = *spec.preset;
  // E = (x2^2 + omega0^2 x1^2) / 2 is non-increasing for the frozen homogeneous
  // oscillator, so |x2| <= sqrt(2 E(0)).
  const double sup_x2_sq = x0[1] * x0[1] + p.omega0 * p.omega0 * x0[0] * x0[0];
  return std::abs(p.alpha2) * sup_x2_sq;
}

ComparisonEquation::ComparisonEquation(const FundamentalData& fd, LipschitzEnvelope envelope,
                                       std::vector<double> forcing_norm)
    : fd_(&fd), envelope_(std::move(envelope)), forcing_(std::move(forcing_norm)) {
  if (forcing_.empty()) forcing_.assign(fd.size(), 0.0);
  if (forcing_.size() != fd.size()) throw DimensionError("forcing norm series does not match the grid");
  if (fd.p.size() != fd.size() || fd.k.size() != fd.size()) throw DimensionError("coefficient series incomplete");
}

double ComparisonEquation::interp(const std::vector<double>& v, double t) const {
  const std::size_t n = v.size();
  if (n == 1) return v[0];
  const double h = fd_->step();
  const double s = (t - fd_->t0()) / h;
  auto i = static_cast<std::ptrdiff_t>(std::floor(s));
  i = std::clamp<std::ptrdiff_t>(i, 0, static_cast<std::ptrdiff_t>(n) - 2);
  const double frac = std::clamp(s - static_cast<double>(i), 0.0, 1.0);
  return v[i] + frac * (v[i + 1] - v[i]);
}

double ComparisonEquation::operator()(double t, double x) const {
  const double kt = k(t);
  return p(t) * x + kt * (envelope_(t, x) + forcing(t));
}

namespace {

Eigen::VectorXd solve_initial(const FundamentalData& fd, const Eigen::VectorXd& x0) {
  if (fd.w.empty()) throw DegeneracyError("fundamental matrix samples unavailable");
  if (fd.w0().rows() != x0.size()) throw DimensionError("initial state dimension mismatch");
  Eigen::FullPivLU<Eigen::MatrixXd> lu(fd.w0());
  if (!lu.isInvertible()) throw DegeneracyError("W(t0) is singular");
  return lu.solve(x0);
}

}  // namespace

BoundTrajectory linear_bound(const FundamentalData& fd, const LipschitzEnvelope& l,
                             const std::vector<double>& forcing_norm, const Eigen::VectorXd& x0) {
  if (!l.is_linear()) throw UnsupportedError("linear_bound requires a linear envelope");
  const std::size_t n = fd.size();
  std::vector<double> forcing = forcing_norm.empty() ? std::vector<double>(n, 0.0) : forcing_norm;
  if (forcing.size() != n) throw DimensionError("forcing norm series does not match the grid");

  BoundTrajectory out;
  out.kind = BoundKind::Linear;
  out.times = fd.times;
  out.x0_norm = solve_initial(fd, x0).norm();

  std::vector<double> kl(n), rate(n), g(n);
  for (std::size_t i = 0; i < n; ++i) {
    kl[i] = fd.k[i] * l.linear_coefficient(fd.times[i]);
    rate[i] = fd.p[i] + kl[i];
    g[i] = fd.k[i] * forcing[i];
  }
  const auto int_kl = cumulative_trapezoid(kl, fd.times);
  const auto int_rate = cumulative_trapezoid(rate, fd.times);

  out.values.resize(n);
  // x_nh is advanced one interval at a time so exp(c(t) - c(s)) never overflows.
  double nh = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) {
      const double dt = fd.times[i] - fd.times[i - 1];
      const double decay = std::exp(int_rate[i] - int_rate[i - 1]);
      nh = decay * nh + 0.5 * dt * (decay * g[i - 1] + g[i]);
    }
    const double h = fd.sigma_max[i] / fd.sigma_max[0] * out.x0_norm * std::exp(int_kl[i]);
    out.values[i] = h + nh;
  }
  return out;
}

BoundTrajectory auxiliary_solve(const FundamentalData& fd, const LipschitzEnvelope& envelope,
                                const std::vector<double>& forcing_norm, double x0_norm,
                                const IntegratorConfig& cfg, double horizon) {
  if (!(x0_norm >= 0.0)) throw ValidationError("initial bound must be non-negative");
  if (fd.size() < 2) throw ValidationError("coefficient grid needs at least two samples");
  ComparisonEquation eq(fd, envelope, forcing_norm);

  const double t0 = fd.t0();
  const double t_end = std::min(fd.times.back(), t0 + horizon);
  IntegratorConfig local = cfg;
  local.output_step = fd.step();
  local.stop_at_grid = true;

  BoundTrajectory out;
  out.kind = BoundKind::Nonlinear;
  out.x0_norm = x0_norm;
  const auto count = output_grid(t0, t_end, local.output_step).size();
  out.times.assign(fd.times.begin(), fd.times.begin() + static_cast<std::ptrdiff_t>(count));

  StateRhs rhs = [&eq](double t, const Eigen::VectorXd& x, Eigen::VectorXd& dx) {
    dx.resize(1);
    dx[0] = eq(t, x[0]);
  };
  Trajectory traj;
  try {
    traj = integrate_ivp(rhs, t0, Eigen::VectorXd::Constant(1, x0_norm), t_end, local);
  } catch (const IntegrationError& e) {
    if (e.kind() != IntegrationError::Kind::StepUnderflow) throw;
    // Finite-time blow-up can exhaust the step size before the escape radius.
    out.values.assign(count, kUnbounded);
    out.escaped = true;
    out.escape_time = e.time();
    return out;
  }
  out.values.resize(count, kUnbounded);
  for (std::size_t i = 0; i < traj.size(); ++i) out.values[i] = std::max(traj.states[i][0], 0.0);
  if (traj.escaped()) {
    out.escaped = true;
    out.escape_time = traj.end_time;
    // The sample at the escape step may already be past the radius.
    for (std::size_t i = 0; i < traj.size(); ++i)
      if (out.values[i] > local.escape_radius) out.values[i] = kUnbounded;
  }
  return out;
}

BernoulliValue bernoulli_closed_form(double p_const, double k_const, double c, double alpha, double x0, double t) {
  if (!(alpha > 1.0)) throw UnsupportedError("Bernoulli closed form needs alpha > 1");
  if (!(x0 >= 0.0) || !(c >= 0.0)) throw ValidationError("x0 and c must be non-negative");
  BernoulliValue out;
  const double b = k_const * c;
  if (x0 == 0.0) return out;
  if (b == 0.0) {
    out.value = x0 * std::exp(p_const * t);
    return out;
  }
  const double beta = 1.0 - alpha;  // negative
  const double u0 = std::pow(x0, beta);
  double u = 0.0;
  if (p_const != 0.0) {
    const double denom = p_const * u0 + b;
    if (denom != 0.0) {
      const double ratio = b / denom;
      if (ratio > 0.0) {
        const double tstar = std::log(ratio) / (beta * p_const);
        if (tstar > 0.0 && std::isfinite(tstar)) out.blowup_time = tstar;
      }
    }
    u = (u0 + b / p_const) * std::exp(beta * p_const * t) - b / p_const;
  } else {
    out.blowup_time = u0 / (-beta * b);
    u = u0 + beta * b * t;
  }
  if (out.blowup_time && t >= *out.blowup_time) {
    out.value = kUnbounded;
  } else {
    out.value = u > 0.0 ? std::pow(u, 1.0 / beta) : kUnbounded;
  }
  return out;
}

ComparisonReport verify_comparison(const Trajectory& actual, const BoundTrajectory& bound, double region_radius,
                                   double tol) {
  if (actual.times.size() > bound.times.size()) {
    throw ValidationError("grid mismatch: actual trajectory is longer than the bound");
  }
  if (!actual.escaped() && actual.times.size() != bound.times.size()) {
    throw ValidationError("grid mismatch: actual trajectory ends before the bound");
  }
  ComparisonReport report;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    if (std::abs(actual.times[i] - bound.times[i]) > 1e-9 * std::max(1.0, std::abs(bound.times[i]))) {
      throw ValidationError(fmt::format("grid mismatch at index {}", i));
    }
    const double norm = actual.states[i].norm();
    const double b = bound.values[i];
    const double violation = norm - b;
    report.max_violation = std::max(report.max_violation, violation);
    if (violation > tol * (1.0 + b) && !report.first_violation_time) {
      report.first_violation_time = actual.times[i];
      report.passed = false;
    }
    if (norm > region_radius && !report.region_excursion_time) report.region_excursion_time = actual.times[i];
    ++report.compared_points;
  }
  if (actual.escaped()) {
    // ||x|| passed the escape radius after the last stored sample.
    const std::size_t next = actual.size();
    const bool bound_escaped_first = bound.escape_time && *bound.escape_time <= actual.end_time;
    if (!bound_escaped_first && next < bound.values.size() && std::isfinite(bound.values[next])) {
      report.passed = false;
      report.max_violation = kUnbounded;
      if (!report.first_violation_time) report.first_violation_time = actual.end_time;
    }
  }
  return report;
}

StabilityReport stability_report(const FundamentalData& fd, const LipschitzEnvelope& l,
                                 const std::vector<double>& forcing_norm, double tail_fraction) {
  if (!l.is_linear()) throw UnsupportedError("stability criteria use a linear envelope");
  const std::size_t n = fd.size();
  std::vector<double> forcing = forcing_norm.empty() ? std::vector<double>(n, 0.0) : forcing_norm;
  if (forcing.size() != n) throw DimensionError("forcing norm series does not match the grid");

  StabilityReport r;
  std::vector<double> kl(n), rate(n);
  for (std::size_t i = 0; i < n; ++i) {
    kl[i] = fd.k[i] * l.linear_coefficient(fd.times[i]);
    rate[i] = fd.p[i] + kl[i];
  }

  // sigma_max (k l + p) < 0 is the sign of p + k l.
  std::optional<std::size_t> last_violation;
  double sup_rate = -kUnbounded;
  for (std::size_t i = 1; i < n; ++i) {
    sup_rate = std::max(sup_rate, rate[i]);
    if (rate[i] >= 0.0) {
      if (!r.corollary1.first_violation_time) r.corollary1.first_violation_time = fd.times[i];
      last_violation = i;
    }
  }
  r.corollary1.passed = !r.corollary1.first_violation_time;
  if (!last_violation) {
    r.corollary1.holds_from = fd.times.front();
  } else if (*last_violation + 1 < n) {
    r.corollary1.holds_from = fd.times[*last_violation + 1];
  }
  r.nu1 = -sup_rate;
  r.corollary2 = r.nu1 > 0.0;

  r.chi_bar_max = estimate_max_lyapunov(fd, tail_fraction);
  r.chi_star = tail_limsup_of_mean(fd.times, cumulative_trapezoid(kl, fd.times), tail_fraction);
  r.chi_hat = r.chi_bar_max + r.chi_star;
  r.corollary3 = r.chi_hat < 0.0;

  r.spectral_floor = spectral_floor(fd);
  // sigma_min shows no decay toward zero within the horizon when its minimum
  // is reached before the tail window.
  const auto argmin = std::min_element(fd.sigma_min.begin(), fd.sigma_min.end()) - fd.sigma_min.begin();
  const double tail_cut = fd.times.back() - tail_fraction * (fd.times.back() - fd.t0());
  r.uniform = r.spectral_floor > 0.0 && fd.times[argmin] < tail_cut;

  if (r.chi_hat < 0.0) {
    auto& c4 = r.corollary4;
    c4.applicable = true;
    c4.epsilon = 0.1 * std::abs(r.chi_hat);
    c4.lambda = -(r.chi_hat + c4.epsilon);
    // M = sup_{s <= t} theta(t, s) exp(lambda (t - s)) = exp(max_{s <= t} g(t) - g(s)).
    const auto c = cumulative_trapezoid(rate, fd.times);
    double running_min = kUnbounded;
    double best = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double g = c[i] + c4.lambda * (fd.times[i] - fd.t0());
      running_min = std::min(running_min, g);
      best = std::max(best, g - running_min);
    }
    c4.m = std::exp(best);
    c4.f0 = *std::max_element(forcing.begin(), forcing.end());
    c4.bound = c4.f0 * c4.m / c4.lambda;
  }
  return r;
}

void write_bounds_csv(const std::filesystem::path& path, const std::vector<double>& times,
                      const std::vector<double>* actual_norm, const BoundTrajectory* linear,
                      const BoundTrajectory* nonlinear) {
  const auto flag = [](const void* p) { return p ? "1" : "0"; };
  CsvWriter csv(path,
                {{"t", "time"}, {"actual_norm", "state"}, {"linear_bound", "state"}, {"nonlinear_bound", "state"}},
                {fmt::format("present,{},{},{}", flag(actual_norm), flag(linear), flag(nonlinear))});
  const double nan = std::numeric_limits<double>::quiet_NaN();
  auto at = [nan](const std::vector<double>* v, std::size_t i) { return v && i < v->size() ? (*v)[i] : nan; };
  for (std::size_t i = 0; i < times.size(); ++i) {
    csv.row({times[i], at(actual_norm, i), at(linear ? &linear->values : nullptr, i),
             at(nonlinear ? &nonlinear->values : nullptr, i)});
  }
}

}  // namespace nlbound
