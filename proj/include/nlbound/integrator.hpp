#pragma once

// Adaptive explicit integration on a uniform output grid.
//
// One engine serves every downstream computation: the full system, the matrix
// ODE for the fundamental solution (flattened column-major into an n*n vector)
// and the scalar comparison equation.

#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Dense>

namespace nlbound {

struct IntegratorConfig {
  double rel_tol = 1e-9;
  double abs_tol = 1e-12;
  /// Upper bound on the internal step; 0 means unbounded.
  double max_step = 0.0;
  double output_step = 0.01;
  /// Integration stops once the state norm exceeds this radius.
  double escape_radius = 1e6;
  /// Clip internal steps so that every output time is hit exactly. Needed when
  /// the right-hand side is only piecewise smooth between grid points.
  bool stop_at_grid = false;
  /// Scale the error of every component by the largest component of the state
  /// instead of by its own magnitude.
  bool state_norm_error = false;
  long max_steps = 100'000'000;

  /// Throws ValidationError on non-positive tolerances or grid step.
  void validate() const;
};

using StateRhs = std::function<void(double t, const Eigen::VectorXd& x, Eigen::VectorXd& dxdt)>;
using MatrixRhs = std::function<void(double t, Eigen::MatrixXd& a)>;

enum class Termination { Completed, Escaped };

struct Trajectory {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> states;
  Termination termination = Termination::Completed;
  /// Time of the last accepted step (t_end when completed).
  double end_time = 0.0;

  bool escaped() const { return termination == Termination::Escaped; }
  std::size_t size() const { return times.size(); }
};

struct MatrixTrajectory {
  std::vector<double> times;
  std::vector<Eigen::MatrixXd> matrices;
  Termination termination = Termination::Completed;
  double end_time = 0.0;
};

/// Times t0, t0 + h, ..., covering [t0, t_end] (the last point is within h/1e9
/// of t_end or strictly below it).
std::vector<double> output_grid(double t0, double t_end, double step);

/// Solves x' = rhs(t, x), x(t0) = x0 and samples the solution on the output grid.
/// Throws IntegrationError on step-size underflow or a non-finite derivative.
Trajectory integrate_ivp(const StateRhs& rhs, double t0, const Eigen::VectorXd& x0, double t_end,
                         const IntegratorConfig& cfg);

/// Solves W' = A(t) W, W(t0) = w0.
MatrixTrajectory integrate_matrix_ode(const MatrixRhs& a, const Eigen::MatrixXd& w0, double t0,
                                      double t_end, const IntegratorConfig& cfg);

}  // namespace nlbound
