#pragma once

// Fundamental matrix of x' = A(t) x and the scalar coefficients derived from it:
// p(t) = d ln ||W(t)|| / dt and k(t) = sigma_max(W) / sigma_min(W).

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nlbound/integrator.hpp"
#include "nlbound/system_model.hpp"

namespace nlbound {

enum class Normalization {
  /// W(t0) = I.
  Identity,
  /// W(t0) = real modal matrix of the constant part of A, scaled to unit norm.
  FrozenReference,
};

std::string to_string(Normalization n);
Normalization normalization_from_string(const std::string& s);

struct FundamentalData {
  std::vector<double> times;
  std::vector<Eigen::MatrixXd> w;
  std::vector<double> sigma_max;
  std::vector<double> sigma_min;
  std::vector<double> p;
  std::vector<double> k;
  std::vector<double> p_bar;
  std::vector<double> k_bar;
  std::vector<double> determinant;
  /// Relative gap between the two largest singular values fell below 1e-6.
  std::vector<bool> near_crossing;

  std::size_t size() const { return times.size(); }
  double t0() const { return times.front(); }
  double step() const { return times.size() > 1 ? times[1] - times[0] : 0.0; }
  const Eigen::MatrixXd& w0() const { return w.front(); }

  /// Largest relative error of exp(cumulative trapezoid of p) against
  /// sigma_max / sigma_max[0] over the grid.
  double log_reconstruction_error() const;
};

/// Initial matrix for the requested normalization. Throws DegeneracyError when
/// the frozen matrix has no real modal basis (defective eigenstructure).
Eigen::MatrixXd initial_fundamental(const SystemSpec& spec, Normalization norm);

FundamentalData compute_fundamental(const SystemSpec& spec, Normalization norm, double t_end,
                                    const IntegratorConfig& cfg);

/// Coefficient data with prescribed p and k and no underlying matrix; sigma_max
/// follows exp(cumulative integral of p). Used for scalar studies and tests.
FundamentalData synthetic_fundamental(std::vector<double> times, std::vector<double> p,
                                      std::vector<double> k);

/// Central differences of ln sigma_max, second-order one-sided at both ends.
std::vector<double> compute_p(const std::vector<double>& times, const std::vector<double>& sigma_max);
std::vector<double> compute_p(const FundamentalData& fd);

/// Cumulative trapezoid divided by elapsed time; the first point is series[0].
std::vector<double> running_average(const std::vector<double>& series, const std::vector<double>& times);

/// Cumulative trapezoid integral, starting at zero.
std::vector<double> cumulative_trapezoid(const std::vector<double>& series, const std::vector<double>& times);

/// max over the tail window of (t - t0)^-1 ln sigma_max(t).
double estimate_max_lyapunov(const FundamentalData& fd, double tail_fraction);

/// Tail-window maximum of (t - t0)^-1 * integral of series; the finite-horizon
/// stand-in for a limsup of a running mean.
double tail_limsup_of_mean(const std::vector<double>& times, const std::vector<double>& cumulative,
                           double tail_fraction);

double spectral_floor(const FundamentalData& fd);

/// Columns: t, sigma_max, sigma_min, p, k, p_bar, k_bar, near_crossing.
void write_fundamental_csv(const FundamentalData& fd, const std::filesystem::path& path);

}  // namespace nlbound
