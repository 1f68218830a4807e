#include "nlbound/linear_analysis.hpp"

#include <cmath>
#include <complex>
#include <limits>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <fmt/format.h>

#include "nlbound/csv.hpp"
#include "nlbound/error.hpp"

namespace nlbound {

std::string to_string(Normalization n) {
  return n == Normalization::Identity ? "identity" : "frozen";
}

Normalization normalization_from_string(const std::string& s) {
  if (s == "identity") return Normalization::Identity;
  if (s == "frozen" || s == "frozen-reference") return Normalization::FrozenReference;
  throw ValidationError("unknown normalization '" + s + "' (expected identity|frozen)");
}

Eigen::MatrixXd initial_fundamental(const SystemSpec& spec, Normalization norm) {
  const int n = spec.dimension();
  if (norm == Normalization::Identity) return Eigen::MatrixXd::Identity(n, n);

  const Eigen::MatrixXd a0 = spec.linear.constant_part();
  Eigen::EigenSolver<Eigen::MatrixXd> es(a0);
  if (es.info() != Eigen::Success) throw DegeneracyError("eigen-decomposition of the frozen matrix failed");
  const auto& values = es.eigenvalues();
  const auto& vectors = es.eigenvectors();

  // Real modal basis: real eigenvectors, and (Re v, Im v) for each conjugate pair.
  // Any other real basis in which the frozen flow is block-diagonal differs by a
  // right factor that commutes with the blocks, so singular values agree.
  Eigen::MatrixXd v(n, n);
  int col = 0;
  for (int i = 0; i < n; ++i) {
    const std::complex<double> lambda = values[i];
    const double scale = 1.0 + std::abs(lambda);
    if (std::abs(lambda.imag()) <= 1e-12 * scale) {
      if (col >= n) break;
      v.col(col++) = vectors.col(i).real().normalized();
    } else if (lambda.imag() > 0.0) {
      if (col + 1 >= n + 1) break;
      const Eigen::VectorXcd z = vectors.col(i).normalized();
      v.col(col++) = z.real();
      v.col(col++) = z.imag();
    }
  }
  if (col != n) throw DegeneracyError("frozen matrix has no real modal basis");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(v);
  const auto& s = svd.singularValues();
  if (!(s(n - 1) > 1e-10 * s(0))) {
    throw DegeneracyError("frozen matrix is defective; reference normalization unavailable");
  }
  return v / s(0);
}

std::vector<double> cumulative_trapezoid(const std::vector<double>& series, const std::vector<double>& times) {
  if (series.size() != times.size()) throw DimensionError("series and times differ in length");
  std::vector<double> out(series.size(), 0.0);
  for (std::size_t i = 1; i < series.size(); ++i) {
    out[i] = out[i - 1] + 0.5 * (times[i] - times[i - 1]) * (series[i] + series[i - 1]);
  }
  return out;
}

std::vector<double> running_average(const std::vector<double>& series, const std::vector<double>& times) {
  auto out = cumulative_trapezoid(series, times);
  if (out.empty()) return out;
  out[0] = series[0];
  for (std::size_t i = 1; i < out.size(); ++i) out[i] /= (times[i] - times[0]);
  return out;
}

std::vector<double> compute_p(const std::vector<double>& times, const std::vector<double>& sigma_max) {
  const std::size_t n = sigma_max.size();
  if (times.size() != n) throw DimensionError("times and sigma_max differ in length");
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(sigma_max[i] > 0.0)) throw DegeneracyError(fmt::format("non-positive sigma_max at t = {}", times[i]));
    g[i] = std::log(sigma_max[i]);
  }
  std::vector<double> p(n, 0.0);
  if (n < 2) return p;
  const double h = times[1] - times[0];
  for (std::size_t i = 1; i < n; ++i) {
    if (std::abs((times[i] - times[i - 1]) - h) > 1e-8 * h) {
      throw ValidationError("compute_p requires a uniform grid");
    }
  }
  if (n == 2) {
    p[0] = p[1] = (g[1] - g[0]) / h;
    return p;
  }
  for (std::size_t i = 1; i + 1 < n; ++i) p[i] = (g[i + 1] - g[i - 1]) / (2.0 * h);
  p[0] = (-3.0 * g[0] + 4.0 * g[1] - g[2]) / (2.0 * h);
  p[n - 1] = (3.0 * g[n - 1] - 4.0 * g[n - 2] + g[n - 3]) / (2.0 * h);
  return p;
}

std::vector<double> compute_p(const FundamentalData& fd) { return compute_p(fd.times, fd.sigma_max); }

namespace {

void finish_coefficients(FundamentalData& fd) {
  fd.k.resize(fd.size());
  for (std::size_t i = 0; i < fd.size(); ++i) fd.k[i] = fd.sigma_max[i] / fd.sigma_min[i];
  fd.p = compute_p(fd);
  fd.p_bar = running_average(fd.p, fd.times);
  fd.k_bar = running_average(fd.k, fd.times);
}

}  // namespace

FundamentalData compute_fundamental(const SystemSpec& spec, Normalization norm, double t_end,
                                    const IntegratorConfig& cfg) {
  spec.validate();
  const Eigen::MatrixXd w0 = initial_fundamental(spec, norm);
  IntegratorConfig local = cfg;
  // The matrix flow is linear; only overflow ends it.
  local.escape_radius = std::numeric_limits<double>::max();
  // W(t) may decay by many orders of magnitude; errors are measured relative to it.
  local.state_norm_error = true;
  local.abs_tol = std::numeric_limits<double>::min();
  MatrixRhs a = [&spec](double t, Eigen::MatrixXd& m) { spec.linear.evaluate(t, m); };
  auto traj = integrate_matrix_ode(a, w0, spec.t0, t_end, local);

  FundamentalData fd;
  fd.times = std::move(traj.times);
  fd.w = std::move(traj.matrices);
  const std::size_t count = fd.times.size();
  fd.sigma_max.resize(count);
  fd.sigma_min.resize(count);
  fd.determinant.resize(count);
  fd.near_crossing.resize(count);
  const int n = spec.dimension();
  for (std::size_t i = 0; i < count; ++i) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(fd.w[i]);
    const auto& s = svd.singularValues();
    fd.sigma_max[i] = s(0);
    fd.sigma_min[i] = s(n - 1);
    if (!(s(n - 1) > 0.0) || !std::isfinite(s(0)) || s(n - 1) < std::numeric_limits<double>::min() * s(0)) {
      throw DegeneracyError(fmt::format("fundamental matrix is singular at t = {}", fd.times[i]));
    }
    fd.near_crossing[i] = n >= 2 && (s(0) - s(1)) < 1e-6 * s(0);
    fd.determinant[i] = fd.w[i].determinant();
  }
  finish_coefficients(fd);
  return fd;
}

FundamentalData synthetic_fundamental(std::vector<double> times, std::vector<double> p, std::vector<double> k) {
  if (times.size() != p.size() || times.size() != k.size()) {
    throw DimensionError("synthetic coefficient series differ in length");
  }
  FundamentalData fd;
  fd.times = std::move(times);
  const auto c = cumulative_trapezoid(p, fd.times);
  fd.sigma_max.resize(fd.size());
  fd.sigma_min.resize(fd.size());
  fd.near_crossing.assign(fd.size(), false);
  for (std::size_t i = 0; i < fd.size(); ++i) {
    if (!(k[i] >= 1.0)) throw ValidationError("condition numbers must be >= 1");
    fd.sigma_max[i] = std::exp(c[i]);
    fd.sigma_min[i] = fd.sigma_max[i] / k[i];
  }
  fd.p = std::move(p);
  fd.k = std::move(k);
  fd.p_bar = running_average(fd.p, fd.times);
  fd.k_bar = running_average(fd.k, fd.times);
  return fd;
}

double FundamentalData::log_reconstruction_error() const {
  const auto c = cumulative_trapezoid(p, times);
  double worst = 0.0;
  for (std::size_t i = 0; i < size(); ++i) {
    const double ratio = sigma_max[i] / sigma_max[0];
    worst = std::max(worst, std::abs(std::exp(c[i]) / ratio - 1.0));
  }
  return worst;
}

namespace {

std::size_t tail_start(const std::vector<double>& times, double tail_fraction) {
  if (!(tail_fraction > 0.0 && tail_fraction < 1.0)) throw ValidationError("tail fraction must lie in (0, 1)");
  if (times.size() < 2) throw ValidationError("tail estimate needs at least two samples");
  const double t0 = times.front();
  const double cut = times.back() - tail_fraction * (times.back() - t0);
  std::size_t i = 0;
  while (i < times.size() && (times[i] < cut || times[i] <= t0)) ++i;
  if (times.size() - i < 10) throw ValidationError("tail window holds fewer than 10 samples");
  return i;
}

}  // namespace

double tail_limsup_of_mean(const std::vector<double>& times, const std::vector<double>& cumulative,
                           double tail_fraction) {
  const std::size_t start = tail_start(times, tail_fraction);
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = start; i < times.size(); ++i) {
    best = std::max(best, cumulative[i] / (times[i] - times.front()));
  }
  return best;
}

double estimate_max_lyapunov(const FundamentalData& fd, double tail_fraction) {
  std::vector<double> log_sigma(fd.size());
  for (std::size_t i = 0; i < fd.size(); ++i) log_sigma[i] = std::log(fd.sigma_max[i]);
  return tail_limsup_of_mean(fd.times, log_sigma, tail_fraction);
}

double spectral_floor(const FundamentalData& fd) {
  return *std::min_element(fd.sigma_min.begin(), fd.sigma_min.end());
}

void write_fundamental_csv(const FundamentalData& fd, const std::filesystem::path& path) {
  CsvWriter csv(path, {{"t", "time"},
                       {"sigma_max", "1"},
                       {"sigma_min", "1"},
                       {"p", "1/time"},
                       {"k", "1"},
                       {"p_bar", "1/time"},
                       {"k_bar", "1"},
                       {"near_crossing", "flag"}});
  for (std::size_t i = 0; i < fd.size(); ++i) {
    csv.row({fd.times[i], fd.sigma_max[i], fd.sigma_min[i], fd.p[i], fd.k[i], fd.p_bar[i], fd.k_bar[i],
             fd.near_crossing[i] ? 1.0 : 0.0});
  }
}

}  // namespace nlbound
