#pragma once

// Norm bounds for x' = A(t) x + f(t, x) + F(t) obtained from the scalar
// comparison equation
//
//     X' = p(t) X + k(t) L(t, X) + k(t) ||F(t)||,    X(t0) = ||W^-1(t0) x0||,
//
// where ||f(t, x)|| <= L(t, ||x||). With a linear envelope L = l(t) X the
// equation integrates in closed form (linear_bound); otherwise it is solved
// numerically (auxiliary_solve).

#include <filesystem>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "nlbound/integrator.hpp"
#include "nlbound/linear_analysis.hpp"
#include "nlbound/system_model.hpp"

namespace nlbound {

constexpr double kUnbounded = std::numeric_limits<double>::infinity();

/// c(t) X^exponent with c(t) = sum_i |coefficients_i(t)|.
struct EnvelopeTerm {
  std::vector<QuasiPeriodicScalar> coefficients;
  double exponent = 1.0;

  double coefficient(double t) const;
  /// sum_i magnitude_bound(coefficients_i); dominates coefficient(t).
  double coefficient_bound() const;
};

class LipschitzEnvelope {
 public:
  LipschitzEnvelope() = default;

  static LipschitzEnvelope linear(QuasiPeriodicScalar l, double region_radius = kUnbounded);
  /// Throws ValidationError when an exponent is below 1.
  static LipschitzEnvelope power_series(std::vector<EnvelopeTerm> terms, double region_radius = kUnbounded);

  double operator()(double t, double x_norm) const;
  /// Coefficient of the exponent-1 term at time t (zero if absent).
  double linear_coefficient(double t) const;

  /// True for the empty envelope or a single exponent-1 term.
  bool is_linear() const;
  bool empty() const { return terms_.empty(); }
  const std::vector<EnvelopeTerm>& terms() const { return terms_; }
  double region_radius() const { return region_radius_; }

 private:
  std::vector<EnvelopeTerm> terms_;
  double region_radius_ = kUnbounded;
};

/// Power-series envelope with |c| X^d per monomial; equal degrees merge.
LipschitzEnvelope envelope_from_polynomial(const PolynomialVectorField& f);

/// Lipschitz constant of the benchmark's cubic damping term over the energy
/// ellipse of the frozen homogeneous oscillator: |alpha2| (x2^2 + omega0^2 x1^2).
/// Throws UnsupportedError for specs not built from the benchmark preset.
double linear_l_from_energy(const SystemSpec& spec, const Eigen::VectorXd& x0);

enum class BoundKind { Linear, Nonlinear };

struct BoundTrajectory {
  std::vector<double> times;
  /// +inf after an escape.
  std::vector<double> values;
  BoundKind kind = BoundKind::Nonlinear;
  double x0_norm = 0.0;
  bool escaped = false;
  std::optional<double> escape_time;
};

/// Scalar right-hand side p(t) X + k(t) (L(t, X) + ||F(t)||) with p, k, ||F||
/// interpolated linearly between grid samples.
class ComparisonEquation {
 public:
  ComparisonEquation(const FundamentalData& fd, LipschitzEnvelope envelope, std::vector<double> forcing_norm);

  double operator()(double t, double x) const;
  double p(double t) const { return interp(fd_->p, t); }
  double k(double t) const { return interp(fd_->k, t); }
  double forcing(double t) const { return interp(forcing_, t); }
  const LipschitzEnvelope& envelope() const { return envelope_; }
  const FundamentalData& fundamental() const { return *fd_; }

 private:
  double interp(const std::vector<double>& v, double t) const;

  const FundamentalData* fd_;
  LipschitzEnvelope envelope_;
  std::vector<double> forcing_;
};

/// Closed-form bound for a linear envelope: ||x_h|| + ||x_nh|| with
/// ||x_h|| = ||W(t)|| ||W^-1(t0) x0|| exp(int k l) and
/// ||x_nh|| = int theta(t, s) k(s) ||F(s)|| ds, theta = exp(int_s^t (p + k l)).
BoundTrajectory linear_bound(const FundamentalData& fd, const LipschitzEnvelope& l,
                             const std::vector<double>& forcing_norm, const Eigen::VectorXd& x0);

/// Numerical solution of the comparison equation from X(t0) = x0_norm on the
/// grid of `fd`. Blow-up is flagged, not thrown.
BoundTrajectory auxiliary_solve(const FundamentalData& fd, const LipschitzEnvelope& envelope,
                                const std::vector<double>& forcing_norm, double x0_norm,
                                const IntegratorConfig& cfg, double horizon = kUnbounded);

struct BernoulliValue {
  double value = 0.0;  // +inf at or after blow-up
  std::optional<double> blowup_time;
};

/// Exact solution of X' = p X + k c X^alpha, alpha > 1, via u = X^(1 - alpha).
BernoulliValue bernoulli_closed_form(double p_const, double k_const, double c, double alpha, double x0, double t);

struct ComparisonReport {
  double max_violation = -kUnbounded;
  std::optional<double> first_violation_time;
  bool passed = true;
  std::size_t compared_points = 0;
  /// First grid time where ||x|| left the envelope's region of validity.
  std::optional<double> region_excursion_time;
};

/// Checks ||x(t)|| <= bound(t) + tol (1 + bound(t)) on the shared grid.
ComparisonReport verify_comparison(const Trajectory& actual, const BoundTrajectory& bound,
                                   double region_radius = kUnbounded, double tol = 1e-6);

struct CriterionVerdict {
  bool passed = false;
  std::optional<double> first_violation_time;
  /// Start of the trailing interval on which the condition holds, if any.
  std::optional<double> holds_from;
};

struct ForcedBoundEstimate {
  bool applicable = false;
  double epsilon = 0.0;
  double lambda = 0.0;
  double m = 0.0;
  double f0 = 0.0;
  double bound = 0.0;  // F0 M / lambda
};

struct StabilityReport {
  CriterionVerdict corollary1;  // ||W|| k l + d||W||/dt < 0
  double nu1 = 0.0;             // -sup(p + k l)
  bool corollary2 = false;      // nu1 > 0
  double chi_bar_max = 0.0;
  double chi_star = 0.0;
  double chi_hat = 0.0;         // chi_bar_max + chi_star
  bool corollary3 = false;      // chi_hat < 0
  double spectral_floor = 0.0;
  bool uniform = false;         // spectral floor bounded away from zero on the grid
  ForcedBoundEstimate corollary4;
};

StabilityReport stability_report(const FundamentalData& fd, const LipschitzEnvelope& l,
                                 const std::vector<double>& forcing_norm, double tail_fraction = 0.25);

/// Columns t, actual_norm, linear_bound, nonlinear_bound, with a presence-flag
/// row; absent series are written as nan.
void write_bounds_csv(const std::filesystem::path& path, const std::vector<double>& times,
                      const std::vector<double>* actual_norm, const BoundTrajectory* linear,
                      const BoundTrajectory* nonlinear);

}  // namespace nlbound
