#pragma once

// Trapping region and stability basin estimates.
//
// Three routes lead to a critical initial level X0 of the comparison equation:
// roots of a time-invariant replacement Q(X) = p X + k L(X) + k F whose
// coefficients are suprema or long-time averages, and a bisection on numerical
// solutions of the comparison equation itself. A direct probe of the full
// system gives the reference value. Levels map to ellipsoids
// ||W^-1(t0) x0|| <= X0 in phase space.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nlbound/bounds.hpp"
#include "nlbound/integrator.hpp"
#include "nlbound/linear_analysis.hpp"
#include "nlbound/system_model.hpp"

namespace nlbound {

enum class Provenance { Supremum, Average };

struct FrozenTerm {
  double coefficient = 0.0;
  double exponent = 1.0;
};

struct FrozenCoefficients {
  double p_hat = 0.0;
  double k_hat = 1.0;
  std::vector<FrozenTerm> l_hat;
  double f_hat = 0.0;
  Provenance provenance = Provenance::Supremum;
  double window = 0.0;  // averaging window; zero for suprema
  bool converged = true;

  double l(double x) const;
  /// Q(X) = p_hat X + k_hat L_hat(X) + k_hat F_hat.
  double q(double x) const;
  double dq(double x) const;
};

/// Grid maxima of p, k and ||F||; envelope coefficients use their analytic bounds.
FrozenCoefficients freeze_sup(const FundamentalData& fd, const LipschitzEnvelope& envelope,
                              const std::vector<double>& forcing_norm);

/// Trapezoid means over [t0, t0 + window]. `converged` compares against the
/// means over the first half window at 1% relative. Throws ValidationError
/// when the window exceeds the grid.
FrozenCoefficients freeze_avg(const FundamentalData& fd, const LipschitzEnvelope& envelope,
                              const std::vector<double>& forcing_norm, double window);

/// min(horizon, max(200, 20 periods of the slowest forcing harmonic)).
double default_averaging_window(const SystemSpec& spec, double horizon);

enum class RootClass { Stable, Unstable, Semistable };
std::string to_string(RootClass c);

struct RootSet {
  std::vector<double> roots;  // ascending
  std::vector<RootClass> classes;
  double x_max = 0.0;

  std::size_t size() const { return roots.size(); }
  bool empty() const { return roots.empty(); }
};

/// 10 x max over superlinear terms of (|p_hat| / c)^(1 / (exponent - 1)), or
/// 10 x the positive root of a purely linear Q; 10 when neither exists.
double default_scan_ceiling(const FrozenCoefficients& frozen);

/// Positive roots of Q on (0, x_max], bisected to machine resolution.
/// Tangential roots (|Q| minimum below 1e-8 without a sign change) are semistable.
RootSet find_roots(const FrozenCoefficients& frozen, double x_max);

enum class Method { Frozen, Averaged, NumericSplitting };
std::string to_string(Method m);

enum class TheoremCase {
  Thm3Case1,
  Thm3Case2,
  Thm4Case1,
  Thm4Case2,
  Thm5Case1,
  Thm5Case2,
  Thm5Case3,
  Cor5Case1,
  Cor5Case2,
  Growth,
  Uncatalogued,
};
std::string to_string(TheoremCase c);

enum class RegionRole { StabilityBasin, Trapping, AsymptoticLevel };
std::string to_string(RegionRole r);

struct RegionRadius {
  RegionRole role = RegionRole::Trapping;
  /// Root or splitting level before the mu margin.
  double level = 0.0;
  /// Admissible ||W^-1(t0) x0|| (level - mu); for AsymptoticLevel, the limsup bound.
  double radius = 0.0;
  /// Norm guarantee for trajectories started inside (level + mu).
  double guarantee = 0.0;
};

struct AttractorReport {
  Method method = Method::Frozen;
  std::optional<FrozenCoefficients> frozen;
  RootSet roots;
  std::optional<double> splitting_value;
  double mu = 0.0;
  bool mu_reliable = true;
  TheoremCase theorem = TheoremCase::Uncatalogued;
  std::vector<RegionRadius> radii;
  bool conclusive = false;
  /// The estimate stops at the scan ceiling rather than at a root.
  bool ceiling_limited = false;
  std::string verdict;

  /// Largest non-asymptotic radius, if any.
  std::optional<double> region_radius() const;
  bool basin_claim() const;
};

/// Maps the root structure to the applicable case. Averaged coefficients use
/// the margin `mu`; radii below zero make the report inconclusive. Throws
/// ValidationError when a root does not solve Q.
AttractorReport classify_report(const RootSet& roots, const FrozenCoefficients& frozen, double mu = 0.0);

struct MuOptions {
  double horizon = 200.0;
  /// Initial stretch excluded from the sup; defaults to a tenth of the horizon.
  std::optional<double> transient;
};

struct MuEstimate {
  double value = 0.0;
  bool reliable = true;
  double window_start = 0.0;
  double window_end = 0.0;
};

/// sup |X(t) - d| after the transient for the comparison equation started at
/// X = d. A stable level is followed forward in time; an unstable level is
/// followed backward from the end of the horizon, where it attracts.
MuEstimate estimate_mu(const FundamentalData& fd, const LipschitzEnvelope& envelope,
                       const std::vector<double>& forcing_norm, double d, RootClass cls, const MuOptions& opts,
                       const IntegratorConfig& cfg);

enum class ProbeCriterion { DecaysToZero, StaysBounded };
std::string to_string(ProbeCriterion c);

struct SplittingResult {
  double value = 0.0;  // largest X0 known to satisfy the criterion
  double lo = 0.0;
  double hi = 0.0;
  int evaluations = 0;
};

/// Bisection on X0 over comparison-equation solutions. The criterion must hold
/// at x_lo and fail at x_hi, and a coarse scan of the bracket must show a single
/// switch; BracketError otherwise.
SplittingResult splitting_value_search(const FundamentalData& fd, const LipschitzEnvelope& envelope,
                                       const std::vector<double>& forcing_norm, double x_lo, double x_hi,
                                       double horizon, ProbeCriterion criterion, const IntegratorConfig& cfg,
                                       double resolution = 1e-4);

/// Report for a splitting level: decay gives a basin, boundedness a trapping region.
AttractorReport splitting_report(const SplittingResult& result, ProbeCriterion criterion);

struct EllipsoidSpec {
  double t0 = 0.0;
  Eigen::MatrixXd w_inv;
  double radius = 0.0;

  double quadratic_form(const Eigen::VectorXd& x) const { return (w_inv * x).squaredNorm(); }
  bool contains(const Eigen::VectorXd& x) const { return quadratic_form(x) <= radius * radius; }
  /// Distance to the boundary along the unit direction e.
  double intercept(const Eigen::VectorXd& e) const;
};

EllipsoidSpec map_to_ellipsoid(const Eigen::MatrixXd& w0, double t0, double radius);
EllipsoidSpec map_to_ellipsoid(const FundamentalData& fd, double radius);

struct ProbeOptions {
  double horizon = 100.0;
  double escape_radius = 1e6;
  double lo = 1e-2;
  double hi = 10.0;
  double resolution = 1e-3;
};

struct ProbeResult {
  double value = 0.0;
  /// The whole bracket satisfies the criterion; value is the ceiling.
  bool ceiling = false;
  int evaluations = 0;
};

/// Critical amplitude s of x0 = s e for the full system.
ProbeResult direct_basin_probe(const SystemSpec& spec, const Eigen::VectorXd& direction,
                               ProbeCriterion criterion, const ProbeOptions& opts, const IntegratorConfig& cfg);

struct PolylinePoint {
  double angle = 0.0;
  double intercept = 0.0;
};

/// Ellipsoid boundary sampled at `count` equally spaced angles (2-D only).
std::vector<PolylinePoint> ellipsoid_polyline(const EllipsoidSpec& ellipsoid, int count);

/// Direct probes along `count` equally spaced directions, run concurrently.
/// Results are ordered by angle regardless of completion order.
std::vector<PolylinePoint> probe_polyline(const SystemSpec& spec, ProbeCriterion criterion, int count,
                                          const ProbeOptions& opts, const IntegratorConfig& cfg);

void write_polyline_csv(const std::filesystem::path& path, const std::vector<PolylinePoint>& points);

struct RootTableRow {
  std::string method;
  std::string classification;
  double level = 0.0;
  double mu = 0.0;
  std::vector<double> intercepts;  // one per direction
};

void write_root_table(const std::filesystem::path& path, const std::vector<RootTableRow>& rows,
                      const std::vector<std::string>& direction_names);

}  // namespace nlbound
