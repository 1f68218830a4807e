#pragma once

// System description for x' = A(t) x + f(t, x) + F(t).
//
// Every time-dependent coefficient is a quasi-periodic scalar (a constant plus
// a finite sum of sines and cosines), and the nonlinearity is a polynomial
// vector field whose monomials all have total degree >= 1, so f(t, 0) = 0
// holds by construction.

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace nlbound {

enum class WaveKind { Sin, Cos };

struct Harmonic {
  double amplitude = 0.0;
  double frequency = 0.0;  // rad per unit time
  double phase = 0.0;      // rad
  WaveKind kind = WaveKind::Sin;

  bool operator==(const Harmonic&) const = default;
};

/// offset + sum_i amplitude_i * kind_i(frequency_i * t + phase_i)
class QuasiPeriodicScalar {
 public:
  QuasiPeriodicScalar() = default;
  explicit QuasiPeriodicScalar(double offset, std::vector<Harmonic> terms = {});

  static QuasiPeriodicScalar constant(double value) { return QuasiPeriodicScalar(value); }

  double operator()(double t) const;

  /// |offset| + sum |amplitude|; dominates |eval(t)| for every t.
  double magnitude_bound() const;

  /// Time-invariant part: offset plus the zero-frequency terms.
  double constant_part() const;

  bool is_constant() const;

  double offset() const { return offset_; }
  const std::vector<Harmonic>& terms() const { return terms_; }

  bool operator==(const QuasiPeriodicScalar&) const = default;

 private:
  double offset_ = 0.0;
  std::vector<Harmonic> terms_;
};

/// n x n grid of quasi-periodic entries, stored row-major.
class MatrixFunctionSpec {
 public:
  MatrixFunctionSpec() = default;
  MatrixFunctionSpec(int dimension, std::vector<QuasiPeriodicScalar> entries);

  static MatrixFunctionSpec zero(int dimension);
  static MatrixFunctionSpec constant(const Eigen::MatrixXd& a);

  int dimension() const { return n_; }
  const QuasiPeriodicScalar& entry(int row, int col) const { return entries_[row * n_ + col]; }
  QuasiPeriodicScalar& entry(int row, int col) { return entries_[row * n_ + col]; }

  Eigen::MatrixXd operator()(double t) const;
  void evaluate(double t, Eigen::MatrixXd& out) const;

  /// Matrix of constant parts; the frozen system used for reference normalization.
  Eigen::MatrixXd constant_part() const;

  bool operator==(const MatrixFunctionSpec&) const = default;

 private:
  int n_ = 0;
  std::vector<QuasiPeriodicScalar> entries_;
};

struct Monomial {
  int component = 0;  // zero-based target row
  QuasiPeriodicScalar coefficient;
  std::vector<int> exponents;

  int degree() const;
  bool operator==(const Monomial&) const = default;
};

class PolynomialVectorField {
 public:
  PolynomialVectorField() = default;
  PolynomialVectorField(int dimension, std::vector<Monomial> terms);

  int dimension() const { return n_; }
  const std::vector<Monomial>& terms() const { return terms_; }
  bool empty() const { return terms_.empty(); }

  Eigen::VectorXd operator()(double t, const Eigen::VectorXd& x) const;
  void accumulate(double t, const Eigen::VectorXd& x, Eigen::VectorXd& out) const;

  bool operator==(const PolynomialVectorField&) const = default;

 private:
  int n_ = 0;
  std::vector<Monomial> terms_;
};

/// Parameters of the damped oscillator benchmark
///   x1' = x2,
///   x2' = -(omega0^2 + a1 sin r1 t + a2 sin r2 t) x1 - alpha1 x2 - alpha2 x2^3 + a sin omega2 t.
struct VdpParameters {
  double omega0 = 2.0;
  double alpha1 = 0.2;
  double alpha2 = 0.0;
  double a1 = 0.0;
  double a2 = 0.0;
  double r1 = 0.0;
  double r2 = 0.0;
  double a = 0.0;
  double omega2 = 0.0;

  bool operator==(const VdpParameters&) const = default;
};

struct SystemSpec {
  MatrixFunctionSpec linear;
  PolynomialVectorField nonlinear;
  std::vector<QuasiPeriodicScalar> forcing;
  double t0 = 0.0;
  /// Set when the spec was built from the benchmark preset.
  std::optional<VdpParameters> preset;

  int dimension() const { return linear.dimension(); }

  /// Throws ValidationError / DimensionError when parts disagree.
  void validate() const;

  Eigen::VectorXd forcing_at(double t) const;

  bool operator==(const SystemSpec&) const = default;
};

/// A(t) x + f(t, x) + F(t).
Eigen::VectorXd eval_rhs(const SystemSpec& spec, double t, const Eigen::VectorXd& x);
void eval_rhs(const SystemSpec& spec, double t, const Eigen::VectorXd& x, Eigen::VectorXd& out);

SystemSpec vdp_preset(const VdpParameters& params);

/// ||F(t)|| sampled on the given times.
std::vector<double> forcing_norm_series(const SystemSpec& spec, const std::vector<double>& times);

/// Upper bound on sup_t ||F(t)|| from the harmonic magnitudes.
double forcing_norm_bound(const SystemSpec& spec);

}  // namespace nlbound
