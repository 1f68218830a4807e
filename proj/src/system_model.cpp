#include "nlbound/system_model.hpp"

#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "nlbound/error.hpp"

namespace nlbound {

QuasiPeriodicScalar::QuasiPeriodicScalar(double offset, std::vector<Harmonic> terms)
    : offset_(offset), terms_(std::move(terms)) {
  if (!std::isfinite(offset_)) throw ValidationError("quasi-periodic offset must be finite");
  for (const auto& h : terms_) {
    if (!std::isfinite(h.amplitude) || !std::isfinite(h.frequency) || !std::isfinite(h.phase)) {
      throw ValidationError("quasi-periodic term parameters must be finite");
    }
  }
}

double QuasiPeriodicScalar::operator()(double t) const {
  double v = offset_;
  for (const auto& h : terms_) {
    const double arg = h.frequency * t + h.phase;
    v += h.amplitude * (h.kind == WaveKind::Sin ? std::sin(arg) : std::cos(arg));
  }
  return v;
}

double QuasiPeriodicScalar::magnitude_bound() const {
  double b = std::abs(offset_);
  for (const auto& h : terms_) b += std::abs(h.amplitude);
  return b;
}

double QuasiPeriodicScalar::constant_part() const {
  double v = offset_;
  for (const auto& h : terms_) {
    if (h.frequency == 0.0) {
      v += h.amplitude * (h.kind == WaveKind::Sin ? std::sin(h.phase) : std::cos(h.phase));
    }
  }
  return v;
}

bool QuasiPeriodicScalar::is_constant() const {
  return std::all_of(terms_.begin(), terms_.end(),
                     [](const Harmonic& h) { return h.frequency == 0.0 || h.amplitude == 0.0; });
}

MatrixFunctionSpec::MatrixFunctionSpec(int dimension, std::vector<QuasiPeriodicScalar> entries)
    : n_(dimension), entries_(std::move(entries)) {
  if (n_ <= 0) throw DimensionError("matrix dimension must be positive");
  if (entries_.size() != static_cast<std::size_t>(n_) * n_) {
    throw DimensionError(fmt::format("matrix needs {} entries, got {}", n_ * n_, entries_.size()));
  }
}

MatrixFunctionSpec MatrixFunctionSpec::zero(int dimension) {
  return MatrixFunctionSpec(dimension, std::vector<QuasiPeriodicScalar>(dimension * dimension));
}

MatrixFunctionSpec MatrixFunctionSpec::constant(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols()) throw DimensionError("constant matrix must be square");
  const int n = static_cast<int>(a.rows());
  std::vector<QuasiPeriodicScalar> entries;
  entries.reserve(n * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) entries.emplace_back(a(i, j));
  return MatrixFunctionSpec(n, std::move(entries));
}

Eigen::MatrixXd MatrixFunctionSpec::operator()(double t) const {
  Eigen::MatrixXd out;
  evaluate(t, out);
  return out;
}

void MatrixFunctionSpec::evaluate(double t, Eigen::MatrixXd& out) const {
  out.resize(n_, n_);
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j) out(i, j) = entry(i, j)(t);
}

Eigen::MatrixXd MatrixFunctionSpec::constant_part() const {
  Eigen::MatrixXd out(n_, n_);
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j) out(i, j) = entry(i, j).constant_part();
  return out;
}

int Monomial::degree() const { return std::accumulate(exponents.begin(), exponents.end(), 0); }

PolynomialVectorField::PolynomialVectorField(int dimension, std::vector<Monomial> terms)
    : n_(dimension), terms_(std::move(terms)) {
  if (n_ <= 0) throw DimensionError("vector field dimension must be positive");
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    const auto& m = terms_[i];
    if (m.component < 0 || m.component >= n_) {
      throw DimensionError(fmt::format("nonlinear term {} targets component {} outside 1..{}", i + 1,
                                       m.component + 1, n_));
    }
    if (m.exponents.size() != static_cast<std::size_t>(n_)) {
      throw DimensionError(fmt::format("nonlinear term {} has {} exponents, expected {}", i + 1,
                                       m.exponents.size(), n_));
    }
    if (std::any_of(m.exponents.begin(), m.exponents.end(), [](int e) { return e < 0; })) {
      throw ValidationError(fmt::format("nonlinear term {} has a negative exponent", i + 1));
    }
    // f(t, 0) = 0 requires every monomial to vanish at the origin.
    if (m.degree() < 1) {
      throw ValidationError(fmt::format("nonlinear term {} has total degree 0", i + 1));
    }
  }
}

Eigen::VectorXd PolynomialVectorField::operator()(double t, const Eigen::VectorXd& x) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n_);
  accumulate(t, x, out);
  return out;
}

void PolynomialVectorField::accumulate(double t, const Eigen::VectorXd& x, Eigen::VectorXd& out) const {
  for (const auto& m : terms_) {
    double v = m.coefficient(t);
    for (int j = 0; j < n_; ++j) {
      for (int e = 0; e < m.exponents[j]; ++e) v *= x[j];
    }
    out[m.component] += v;
  }
}

void SystemSpec::validate() const {
  const int n = linear.dimension();
  if (n <= 0) throw DimensionError("system dimension must be positive");
  if (nonlinear.dimension() != n && !(nonlinear.dimension() == 0 && nonlinear.empty())) {
    throw DimensionError(
        fmt::format("nonlinear part has dimension {}, linear part {}", nonlinear.dimension(), n));
  }
  if (forcing.size() != static_cast<std::size_t>(n)) {
    throw DimensionError(fmt::format("forcing has {} components, expected {}", forcing.size(), n));
  }
  if (!std::isfinite(t0)) throw ValidationError("t0 must be finite");
}

Eigen::VectorXd SystemSpec::forcing_at(double t) const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(forcing.size()));
  for (std::size_t i = 0; i < forcing.size(); ++i) out[i] = forcing[i](t);
  return out;
}

void eval_rhs(const SystemSpec& spec, double t, const Eigen::VectorXd& x, Eigen::VectorXd& out) {
  const int n = spec.dimension();
  if (x.size() != n) {
    throw DimensionError(fmt::format("state has dimension {}, system has {}", x.size(), n));
  }
  out.setZero(n);
  for (int i = 0; i < n; ++i) {
    double acc = spec.forcing[i](t);
    for (int j = 0; j < n; ++j) acc += spec.linear.entry(i, j)(t) * x[j];
    out[i] = acc;
  }
  spec.nonlinear.accumulate(t, x, out);
}

Eigen::VectorXd eval_rhs(const SystemSpec& spec, double t, const Eigen::VectorXd& x) {
  Eigen::VectorXd out;
  eval_rhs(spec, t, x, out);
  return out;
}

SystemSpec vdp_preset(const VdpParameters& p) {
  SystemSpec spec;
  auto a = MatrixFunctionSpec::zero(2);
  a.entry(0, 1) = QuasiPeriodicScalar::constant(1.0);
  std::vector<Harmonic> stiffness;
  if (p.a1 != 0.0) stiffness.push_back({-p.a1, p.r1, 0.0, WaveKind::Sin});
  if (p.a2 != 0.0) stiffness.push_back({-p.a2, p.r2, 0.0, WaveKind::Sin});
  a.entry(1, 0) = QuasiPeriodicScalar(-p.omega0 * p.omega0, std::move(stiffness));
  a.entry(1, 1) = QuasiPeriodicScalar::constant(-p.alpha1);
  spec.linear = std::move(a);

  std::vector<Monomial> terms;
  if (p.alpha2 != 0.0) terms.push_back({1, QuasiPeriodicScalar::constant(-p.alpha2), {0, 3}});
  spec.nonlinear = PolynomialVectorField(2, std::move(terms));

  spec.forcing = {QuasiPeriodicScalar{}, QuasiPeriodicScalar{}};
  if (p.a != 0.0) spec.forcing[1] = QuasiPeriodicScalar(0.0, {{p.a, p.omega2, 0.0, WaveKind::Sin}});
  spec.t0 = 0.0;
  spec.preset = p;
  return spec;
}

std::vector<double> forcing_norm_series(const SystemSpec& spec, const std::vector<double>& times) {
  std::vector<double> out;
  out.reserve(times.size());
  for (double t : times) out.push_back(spec.forcing_at(t).norm());
  return out;
}

double forcing_norm_bound(const SystemSpec& spec) {
  double s = 0.0;
  for (const auto& f : spec.forcing) s += f.magnitude_bound() * f.magnitude_bound();
  return std::sqrt(s);
}

}  // namespace nlbound
