#include "nlbound/integrator.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "nlbound/error.hpp"

namespace nlbound {

namespace {

// Dormand-Prince 5(4) tableau with Hairer's continuous extension.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                 a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;
constexpr double d1 = -12715105075.0 / 11282082432, d3 = 87487479700.0 / 32700410799,
                 d4 = -10690763975.0 / 1880347072, d5 = 701980252875.0 / 199316789632,
                 d6 = -1453857185.0 / 822651844, d7 = 69997945.0 / 29380423;

bool all_finite(const Eigen::VectorXd& v) { return v.allFinite(); }

double scaled_rms(const Eigen::VectorXd& v, const Eigen::VectorXd& y0, const Eigen::VectorXd& y1,
                  const IntegratorConfig& cfg) {
  double acc = 0.0;
  const double whole = cfg.state_norm_error ? std::max(y0.lpNorm<Eigen::Infinity>(), y1.lpNorm<Eigen::Infinity>()) : 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double mag = cfg.state_norm_error ? whole : std::max(std::abs(y0[i]), std::abs(y1[i]));
    const double sc = cfg.abs_tol + cfg.rel_tol * mag;
    const double r = v[i] / sc;
    acc += r * r;
  }
  return std::sqrt(acc / static_cast<double>(std::max<Eigen::Index>(v.size(), 1)));
}

double initial_step(const StateRhs& rhs, double t0, const Eigen::VectorXd& y0, const Eigen::VectorXd& f0,
                    double hmax, const IntegratorConfig& cfg) {
  const double dy = scaled_rms(y0, y0, y0, cfg);
  const double df = scaled_rms(f0, y0, y0, cfg);
  double h0 = (dy < 1e-5 || df < 1e-5) ? 1e-6 : 0.01 * dy / df;
  h0 = std::min(h0, hmax);
  Eigen::VectorXd y1 = y0 + h0 * f0;
  Eigen::VectorXd f1(y0.size());
  rhs(t0 + h0, y1, f1);
  if (!all_finite(f1)) return h0 * 1e-3;
  const double ddf = scaled_rms(f1 - f0, y0, y0, cfg) / h0;
  const double m = std::max(df, ddf);
  const double h1 = m <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / m, 1.0 / 5.0);
  return std::min({100.0 * h0, h1, hmax});
}

}  // namespace

void IntegratorConfig::validate() const {
  if (!(rel_tol > 0.0) || !(abs_tol > 0.0)) throw ValidationError("integrator tolerances must be positive");
  if (!(output_step > 0.0)) throw ValidationError("output grid step must be positive");
  if (max_step < 0.0) throw ValidationError("max step must be non-negative");
  if (!(escape_radius > 0.0)) throw ValidationError("escape radius must be positive");
}

std::vector<double> output_grid(double t0, double t_end, double step) {
  const auto count = static_cast<long>(std::floor((t_end - t0) / step + 1e-9));
  std::vector<double> grid;
  grid.reserve(count + 1);
  for (long i = 0; i <= count; ++i) grid.push_back(t0 + static_cast<double>(i) * step);
  return grid;
}

Trajectory integrate_ivp(const StateRhs& rhs, double t0, const Eigen::VectorXd& x0, double t_end,
                         const IntegratorConfig& cfg) {
  cfg.validate();
  if (!(t_end > t0)) throw ValidationError("integration end time must exceed the start time");

  const auto grid = output_grid(t0, t_end, cfg.output_step);
  const double t_final = grid.back();
  const Eigen::Index n = x0.size();

  Trajectory out;
  out.times.reserve(grid.size());
  out.states.reserve(grid.size());
  out.times.push_back(t0);
  out.states.push_back(x0);
  out.end_time = t0;

  if (x0.norm() > cfg.escape_radius) {
    out.termination = Termination::Escaped;
    return out;
  }
  if (grid.size() == 1) return out;

  Eigen::VectorXd y = x0, ynew(n), ytmp(n), err(n);
  Eigen::VectorXd k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n);
  rhs(t0, y, k1);
  if (!all_finite(k1)) {
    throw IntegrationError(IntegrationError::Kind::NonFinite, t0,
                           fmt::format("non-finite derivative at t = {}", t0));
  }

  const double hmax = cfg.max_step > 0.0 ? cfg.max_step : (t_final - t0);
  double h = initial_step(rhs, t0, y, k1, hmax, cfg);
  double t = t0;
  std::size_t next = 1;
  long steps = 0;
  bool rejected_last = false;

  while (next < grid.size()) {
    if (++steps > cfg.max_steps) {
      throw IntegrationError(IntegrationError::Kind::StepLimit, t,
                             fmt::format("step limit exceeded at t = {}", t));
    }
    h = std::min(h, hmax);
    double hs = h;
    bool lands_on_grid = false;
    const double target = cfg.stop_at_grid ? grid[next] : t_final;
    if (t + h >= target - 1e-12 * std::max(1.0, std::abs(target))) {
      hs = target - t;
      lands_on_grid = true;
    }
    const double min_step = 1e-14 * std::max(1.0, std::abs(t));
    if (hs < min_step) {
      throw IntegrationError(IntegrationError::Kind::StepUnderflow, t,
                             fmt::format("step size underflow at t = {} (stiffness or blow-up)", t));
    }

    ytmp = y + hs * a21 * k1;
    rhs(t + c2 * hs, ytmp, k2);
    ytmp = y + hs * (a31 * k1 + a32 * k2);
    rhs(t + c3 * hs, ytmp, k3);
    ytmp = y + hs * (a41 * k1 + a42 * k2 + a43 * k3);
    rhs(t + c4 * hs, ytmp, k4);
    ytmp = y + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    rhs(t + c5 * hs, ytmp, k5);
    ytmp = y + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    rhs(t + hs, ytmp, k6);
    ynew = y + hs * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
    rhs(t + hs, ynew, k7);

    const bool finite = all_finite(ynew) && all_finite(k2) && all_finite(k3) && all_finite(k4) &&
                        all_finite(k5) && all_finite(k6) && all_finite(k7);
    double en = std::numeric_limits<double>::infinity();
    if (finite) {
      err = hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
      en = scaled_rms(err, y, ynew, cfg);
    }
    if (!(en <= 1.0)) {
      const double factor = std::isfinite(en) ? std::max(0.2, 0.9 * std::pow(en, -0.25)) : 0.2;
      h = hs * factor;
      rejected_last = true;
      continue;
    }

    const double t_new = lands_on_grid ? target : t + hs;
    // Continuous extension coefficients for the grid points inside (t, t_new].
    Eigen::VectorXd r2 = ynew - y;
    Eigen::VectorXd r3 = hs * k1 - r2;
    Eigen::VectorXd r4 = r2 - hs * k7 - r3;
    Eigen::VectorXd r5 = hs * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
    const double grid_tol = 1e-12 * std::max(1.0, std::abs(t_new));
    while (next < grid.size() && grid[next] <= t_new + grid_tol) {
      const double theta = std::clamp((grid[next] - t) / hs, 0.0, 1.0);
      if (theta >= 1.0) {
        out.states.push_back(ynew);
      } else {
        const double th1 = 1.0 - theta;
        out.states.push_back(y + theta * (r2 + th1 * (r3 + theta * (r4 + th1 * r5))));
      }
      out.times.push_back(grid[next]);
      ++next;
    }

    t = t_new;
    y.swap(ynew);
    k1.swap(k7);
    out.end_time = t;

    if (y.norm() > cfg.escape_radius) {
      out.termination = Termination::Escaped;
      return out;
    }

    double factor = en > 0.0 ? 0.9 * std::pow(en, -0.2) : 5.0;
    factor = std::clamp(factor, 0.2, rejected_last ? 1.0 : 5.0);
    h = (lands_on_grid && hs < h) ? std::max(h, hs * factor) : hs * factor;
    rejected_last = false;
  }
  return out;
}

MatrixTrajectory integrate_matrix_ode(const MatrixRhs& a, const Eigen::MatrixXd& w0, double t0,
                                      double t_end, const IntegratorConfig& cfg) {
  if (w0.rows() != w0.cols()) throw DimensionError("initial matrix must be square");
  const Eigen::Index n = w0.rows();
  Eigen::MatrixXd amat(n, n);
  StateRhs rhs = [&a, &amat, n](double t, const Eigen::VectorXd& x, Eigen::VectorXd& dx) {
    a(t, amat);
    Eigen::Map<const Eigen::MatrixXd> w(x.data(), n, n);
    dx.resize(n * n);
    Eigen::Map<Eigen::MatrixXd>(dx.data(), n, n).noalias() = amat * w;
  };
  const Eigen::VectorXd x0 = Eigen::Map<const Eigen::VectorXd>(w0.data(), n * n);
  auto traj = integrate_ivp(rhs, t0, x0, t_end, cfg);

  MatrixTrajectory out;
  out.times = std::move(traj.times);
  out.termination = traj.termination;
  out.end_time = traj.end_time;
  out.matrices.reserve(traj.states.size());
  for (const auto& s : traj.states) out.matrices.emplace_back(Eigen::Map<const Eigen::MatrixXd>(s.data(), n, n));
  return out;
}

}  // namespace nlbound
