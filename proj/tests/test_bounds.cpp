#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "nlbound/bounds.hpp"
#include "nlbound/error.hpp"
#include "test_support.hpp"

using namespace nlbound;

namespace {

SystemSpec constant_system(const Eigen::MatrixXd& a) {
  SystemSpec spec;
  spec.linear = MatrixFunctionSpec::constant(a);
  spec.nonlinear = PolynomialVectorField(static_cast<int>(a.rows()), {});
  spec.forcing.assign(a.rows(), QuasiPeriodicScalar{});
  return spec;
}

IntegratorConfig scalar_cfg() {
  IntegratorConfig cfg;
  cfg.rel_tol = 1e-11;
  cfg.abs_tol = 1e-14;
  cfg.output_step = 0.01;
  return cfg;
}

LipschitzEnvelope cubic(double c = 1.0) {
  return LipschitzEnvelope::power_series({EnvelopeTerm{{QuasiPeriodicScalar(c)}, 3.0}});
}

Monomial monomial(int component, double c, std::vector<int> e) {
  Monomial m;
  m.component = component;
  m.coefficient = QuasiPeriodicScalar(c);
  m.exponents = std::move(e);
  return m;
}

}  // namespace

TEST_CASE("envelope of the benchmark cubic") {
  const PolynomialVectorField f(2, {monomial(1, -0.1, {0, 3})});
  const auto env = envelope_from_polynomial(f);
  REQUIRE(env.terms().size() == 1);
  CHECK(env.terms()[0].exponent == 3.0);
  CHECK(env(0.0, 2.0) == doctest::Approx(0.8));
  CHECK(envelope_from_polynomial(PolynomialVectorField(2, {})).empty());
}

TEST_CASE("quadratic envelope dominates sampled field") {
  const PolynomialVectorField f(2, {monomial(0, 1.0, {1, 1}), monomial(1, -1.0, {2, 0})});
  const auto env = envelope_from_polynomial(f);
  REQUIRE(env.terms().size() == 1);
  CHECK(env(0.0, 1.0) == doctest::Approx(2.0));
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> g(0.0, 3.0);
  for (int i = 0; i < 10000; ++i) {
    const Eigen::Vector2d x(g(rng), g(rng));
    REQUIRE(f(0.0, x).norm() <= 2.0 * x.squaredNorm() * (1.0 + 1e-12));
  }
}

TEST_CASE("exponents below one are rejected") {
  CHECK_THROWS_AS(LipschitzEnvelope::power_series({EnvelopeTerm{{QuasiPeriodicScalar(1.0)}, 0.5}}), ValidationError);
}

TEST_CASE("energy Lipschitz constant") {
  VdpParameters p;
  p.alpha2 = 0.1;
  const auto spec = vdp_preset(p);
  CHECK(linear_l_from_energy(spec, Eigen::Vector2d(0, 0)) == 0.0);
  CHECK(linear_l_from_energy(spec, Eigen::Vector2d(1, 0)) == doctest::Approx(0.4));
  CHECK(linear_l_from_energy(spec, Eigen::Vector2d(0, 1)) == doctest::Approx(0.1));
  CHECK_THROWS_AS(linear_l_from_energy(constant_system(Eigen::Matrix2d::Identity()), Eigen::Vector2d(1, 0)),
                  UnsupportedError);
}

TEST_CASE("linear bound of a decaying system is exact") {
  const auto fd = compute_fundamental(constant_system(-Eigen::Matrix2d::Identity()), Normalization::Identity, 5.0,
                                      scalar_cfg());
  const std::vector<double> zero(fd.size(), 0.0);
  const auto b = linear_bound(fd, LipschitzEnvelope::linear(QuasiPeriodicScalar(0.0)), zero, Eigen::Vector2d(1, 0));
  for (std::size_t i = 0; i < fd.size(); ++i) REQUIRE(b.values[i] == doctest::Approx(std::exp(-fd.times[i])).epsilon(1e-8));

  Trajectory actual;
  actual.times = fd.times;
  for (double t : fd.times) actual.states.push_back(Eigen::Vector2d(std::exp(-t), 0.0));
  const auto rep = verify_comparison(actual, b);
  CHECK(rep.passed);
  CHECK(std::abs(rep.max_violation) < 1e-7);
}

TEST_CASE("linear bound with constant k l") {
  const double c = 0.3;
  const auto fd = compute_fundamental(constant_system(-Eigen::Matrix2d::Identity()), Normalization::Identity, 5.0,
                                      scalar_cfg());
  const std::vector<double> zero(fd.size(), 0.0);
  const Eigen::Vector2d x0(0.6, 0.8);
  const auto b = linear_bound(fd, LipschitzEnvelope::linear(QuasiPeriodicScalar(c)), zero, x0);
  for (std::size_t i = 0; i < fd.size(); ++i) {
    REQUIRE(b.values[i] == doctest::Approx(std::exp((c - 1.0) * fd.times[i])).epsilon(1e-8));
  }
}

TEST_CASE("linear bound with constant forcing") {
  const auto fd = testing::constant_fundamental(-1.0, 1.0, 6.0);
  const std::vector<double> one(fd.size(), 1.0);
  FundamentalData with_w = fd;
  with_w.w.assign(fd.size(), Eigen::MatrixXd::Identity(1, 1));
  const auto b = linear_bound(with_w, LipschitzEnvelope::linear(QuasiPeriodicScalar(0.0)), one, Eigen::VectorXd::Zero(1));
  for (std::size_t i = 0; i < fd.size(); i += 50) {
    REQUIRE(std::abs(b.values[i] - (1.0 - std::exp(-fd.times[i]))) < 1e-4);
  }
}

TEST_CASE("auxiliary solutions: zero, linear and Bernoulli") {
  const auto fd = testing::constant_fundamental(-1.0, 1.0, 10.0);
  const std::vector<double> zero(fd.size(), 0.0), one(fd.size(), 1.0);

  const auto z = auxiliary_solve(fd, cubic(), zero, 0.0, scalar_cfg());
  for (double v : z.values) REQUIRE(v == 0.0);

  const auto lin = auxiliary_solve(fd, LipschitzEnvelope{}, one, 0.0, scalar_cfg());
  for (std::size_t i = 0; i < fd.size(); ++i) REQUIRE(std::abs(lin.values[i] - (1.0 - std::exp(-fd.times[i]))) < 1e-8);

  const auto cub = auxiliary_solve(fd, cubic(), zero, 0.5, scalar_cfg());
  for (std::size_t i = 0; i < fd.size(); ++i) {
    const double exact = bernoulli_closed_form(-1.0, 1.0, 1.0, 3.0, 0.5, fd.times[i]).value;
    REQUIRE(cub.values[i] == doctest::Approx(exact).epsilon(1e-6));
  }
}

TEST_CASE("auxiliary solution flags blow-up") {
  const auto fd = testing::constant_fundamental(-1.0, 1.0, 10.0);
  const std::vector<double> zero(fd.size(), 0.0);
  const auto b = auxiliary_solve(fd, cubic(), zero, 1.1, scalar_cfg());
  CHECK(b.escaped);
  REQUIRE(b.escape_time.has_value());
  const auto exact = bernoulli_closed_form(-1.0, 1.0, 1.0, 3.0, 1.1, 10.0);
  REQUIRE(exact.blowup_time.has_value());
  CHECK(*b.escape_time == doctest::Approx(*exact.blowup_time).epsilon(0.01));
  CHECK(std::isinf(b.values.back()));
}

TEST_CASE("Bernoulli closed form") {
  CHECK(bernoulli_closed_form(-0.7, 1.0, 0.0, 3.0, 2.0, 1.5).value == doctest::Approx(2.0 * std::exp(-0.7 * 1.5)));
  CHECK(bernoulli_closed_form(-1.0, 1.0, 1.0, 3.0, 1.0, 4.0).value == doctest::Approx(1.0));
  CHECK_THROWS_AS(bernoulli_closed_form(-1.0, 1.0, 1.0, 1.0, 0.5, 1.0), UnsupportedError);

  // Numerical oracle: classical RK4 with a fine fixed step.
  double x = 0.5;
  const int n = 100000;
  const double h = 1.0 / n;
  const auto f = [](double v) { return -v + v * v * v; };
  for (int i = 0; i < n; ++i) {
    const double k1 = f(x), k2 = f(x + 0.5 * h * k1), k3 = f(x + 0.5 * h * k2), k4 = f(x + h * k3);
    x += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  CHECK(std::abs(bernoulli_closed_form(-1.0, 1.0, 1.0, 3.0, 0.5, 1.0).value - x) < 1e-8);
}

TEST_CASE("comparison against a zero trajectory passes") {
  const auto fd = testing::constant_fundamental(-1.0, 1.0, 1.0);
  const auto b = auxiliary_solve(fd, cubic(), std::vector<double>(fd.size(), 0.0), 0.3, scalar_cfg());
  Trajectory zero;
  zero.times = fd.times;
  zero.states.assign(fd.size(), Eigen::VectorXd::Zero(2));
  CHECK(verify_comparison(zero, b).passed);

  zero.times.pop_back();
  zero.states.pop_back();
  CHECK_THROWS(verify_comparison(zero, b));
}

TEST_CASE("comparison reports region excursions") {
  const auto fd = testing::constant_fundamental(0.0, 1.0, 1.0);
  const auto b = auxiliary_solve(fd, LipschitzEnvelope{}, std::vector<double>(fd.size(), 0.0), 5.0, scalar_cfg());
  Trajectory tr;
  tr.times = fd.times;
  for (double t : fd.times) tr.states.push_back(Eigen::VectorXd::Constant(1, t > 0.5 ? 3.0 : 1.0));
  const auto rep = verify_comparison(tr, b, 2.0);
  CHECK(rep.passed);
  REQUIRE(rep.region_excursion_time.has_value());
  CHECK(*rep.region_excursion_time > 0.5);
}

TEST_CASE("stability report on constant diagonal systems") {
  IntegratorConfig cfg;
  cfg.output_step = 0.05;
  const auto stable = compute_fundamental(constant_system(Eigen::Vector2d(-1, -2).asDiagonal()),
                                          Normalization::Identity, 100.0, cfg);
  const std::vector<double> zero(stable.size(), 0.0);
  const auto r1 = stability_report(stable, LipschitzEnvelope::linear(QuasiPeriodicScalar(0.0)), zero);
  CHECK(r1.corollary1.passed);
  CHECK(r1.corollary2);
  CHECK(r1.corollary3);
  CHECK(r1.chi_hat == doctest::Approx(-1.0).epsilon(0.02));
  CHECK(r1.chi_hat == r1.chi_bar_max + r1.chi_star);

  const auto unstable = compute_fundamental(constant_system(Eigen::Vector2d(1, -2).asDiagonal()),
                                            Normalization::Identity, 20.0, cfg);
  const auto r2 = stability_report(unstable, LipschitzEnvelope::linear(QuasiPeriodicScalar(0.0)),
                                   std::vector<double>(unstable.size(), 0.0));
  CHECK_FALSE(r2.corollary1.passed);
  CHECK_FALSE(r2.corollary2);
  CHECK_FALSE(r2.corollary3);
  CHECK(r2.chi_hat == doctest::Approx(1.0).epsilon(0.02));
  CHECK_FALSE(r2.corollary4.applicable);
}

TEST_CASE("stability report sign agrees with auxiliary decay") {
  VdpParameters p;
  IntegratorConfig cfg;
  cfg.output_step = 0.05;
  const auto fd = compute_fundamental(vdp_preset(p), Normalization::FrozenReference, 200.0, cfg);
  const std::vector<double> zero(fd.size(), 0.0);
  const auto env = LipschitzEnvelope::linear(QuasiPeriodicScalar(0.05));
  const auto r = stability_report(fd, env, zero);
  CHECK(r.chi_hat == doctest::Approx(r.chi_bar_max + r.chi_star));
  CHECK(r.chi_bar_max == doctest::Approx(-0.1).epsilon(0.05));
  const auto x = auxiliary_solve(fd, env, zero, 1.0, cfg);
  const double rate = std::log(x.values.back()) / fd.times.back();
  CHECK((rate < 0) == (r.chi_hat < 0));
}

TEST_CASE("forced bound estimate for a stable system") {
  IntegratorConfig cfg;
  cfg.output_step = 0.05;
  const auto fd = compute_fundamental(constant_system(Eigen::Vector2d(-1, -2).asDiagonal()),
                                      Normalization::Identity, 40.0, cfg);
  const auto r = stability_report(fd, LipschitzEnvelope::linear(QuasiPeriodicScalar(0.0)),
                                  std::vector<double>(fd.size(), 0.5));
  REQUIRE(r.corollary4.applicable);
  CHECK(r.corollary4.f0 == doctest::Approx(0.5));
  CHECK(r.corollary4.lambda > 0.0);
  CHECK(r.corollary4.bound == doctest::Approx(r.corollary4.f0 * r.corollary4.m / r.corollary4.lambda));
}

TEST_CASE("property: auxiliary solutions are ordered in X0") {
  const auto t = testing::grid(0.0, 30.0, 0.02);
  std::vector<double> p, k, f;
  for (double s : t) {
    p.push_back(-0.3 + 0.8 * std::sin(1.3 * s));
    k.push_back(1.5 + 0.5 * std::cos(0.7 * s));
    f.push_back(0.02 * std::abs(std::sin(2.0 * s)));
  }
  const auto fd = synthetic_fundamental(t, p, k);
  IntegratorConfig cfg;
  cfg.output_step = 0.02;
  const auto env = cubic(0.1);
  std::vector<double> prev;
  for (double x0 = 0.1; x0 <= 1.0001; x0 += 0.1) {
    const auto b = auxiliary_solve(fd, env, f, x0, cfg);
    if (!prev.empty()) {
      for (std::size_t i = 0; i < b.values.size(); ++i) REQUIRE(b.values[i] >= prev[i] - 1e-9);
    }
    prev = b.values;
  }
}

TEST_CASE("property: exponent-one envelope matches the linear bound") {
  const auto t = testing::grid(0.0, 10.0, 0.01);
  std::vector<double> p, k;
  for (double s : t) {
    p.push_back(-0.2 + 0.3 * std::sin(s));
    k.push_back(1.2);
  }
  auto fd = synthetic_fundamental(t, p, k);
  fd.w.assign(fd.size(), Eigen::MatrixXd::Identity(1, 1));
  for (std::size_t i = 0; i < fd.size(); ++i) fd.w[i](0, 0) = fd.sigma_max[i];
  const std::vector<double> f(fd.size(), 0.0);
  const auto l = LipschitzEnvelope::linear(QuasiPeriodicScalar(0.1));
  const auto lin = linear_bound(fd, l, f, Eigen::VectorXd::Constant(1, 0.7));
  IntegratorConfig cfg;
  cfg.output_step = 0.01;
  cfg.rel_tol = 1e-11;
  const auto aux = auxiliary_solve(fd, l, f, 0.7, cfg);
  for (std::size_t i = 0; i < fd.size(); ++i) REQUIRE(aux.values[i] == doctest::Approx(lin.values[i]).epsilon(1e-4));
}

TEST_CASE("property: dominance on random small systems") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  IntegratorConfig cfg;
  cfg.output_step = 0.02;
  for (int trial = 0; trial < 6; ++trial) {
    SystemSpec spec;
    Eigen::Matrix2d a0;
    a0 << -0.5 + 0.2 * u(rng), u(rng), u(rng), -0.7 + 0.2 * u(rng);
    spec.linear = MatrixFunctionSpec::constant(a0);
    spec.linear.entry(0, 1) = QuasiPeriodicScalar(a0(0, 1), {{0.3, 1.0 + u(rng), 0.0, WaveKind::Sin}});
    spec.nonlinear = PolynomialVectorField(2, {monomial(0, 0.2 * u(rng), {2, 0}), monomial(1, 0.2 * u(rng), {0, 3})});
    spec.forcing = {QuasiPeriodicScalar(0.0, {{0.05 * u(rng), 2.0, 0.0, WaveKind::Sin}}), QuasiPeriodicScalar{}};
    const auto fd = compute_fundamental(spec, Normalization::Identity, 15.0, cfg);
    const Eigen::Vector2d x0(0.3 * u(rng), 0.3 * u(rng));
    const double x0n = (fd.w0().inverse() * x0).norm();
    const auto env = envelope_from_polynomial(spec.nonlinear);
    const auto forcing = forcing_norm_series(spec, fd.times);
    const auto bound = auxiliary_solve(fd, env, forcing, x0n, cfg);
    const auto actual = integrate_ivp(
        [&](double t, const Eigen::VectorXd& x, Eigen::VectorXd& d) { eval_rhs(spec, t, x, d); }, 0.0, x0, 15.0, cfg);
    REQUIRE(verify_comparison(actual, bound).passed);
  }
}

TEST_CASE("bounds csv presence flags") {
  const auto fd = testing::constant_fundamental(-1.0, 1.0, 0.1);
  const auto b = auxiliary_solve(fd, cubic(), std::vector<double>(fd.size(), 0.0), 0.5, scalar_cfg());
  const auto path = std::filesystem::temp_directory_path() / "nlbound_bounds.csv";
  write_bounds_csv(path, fd.times, nullptr, nullptr, &b);
  std::ifstream in(path);
  std::string all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(all.find("nonlinear_bound") != std::string::npos);
  CHECK(all.find("nan") != std::string::npos);
  std::filesystem::remove(path);
}
