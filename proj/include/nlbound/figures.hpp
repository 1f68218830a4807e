#pragma once

// End-to-end pipelines shared by the command-line tool and the acceptance
// suite, plus the parameter sets of the benchmark oscillator studies.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nlbound/attractor.hpp"
#include "nlbound/bounds.hpp"
#include "nlbound/integrator.hpp"
#include "nlbound/linear_analysis.hpp"
#include "nlbound/system_model.hpp"

namespace nlbound {

struct FigurePreset {
  std::string name;
  VdpParameters params;
  double horizon = 200.0;
  /// Initial state for the bound studies.
  std::optional<Eigen::Vector2d> x0;
  /// Values the source description leaves open, recorded in manifests.
  std::vector<std::string> assumptions;
};

const std::vector<std::string>& figure_names();
/// Throws UnsupportedError for an unknown name.
FigurePreset figure_preset(const std::string& name);

/// Fundamental data for the analyses below: FrozenReference normalization.
FundamentalData analysis_fundamental(const SystemSpec& spec, double t_end, const IntegratorConfig& cfg);

// ---- bounds ---------------------------------------------------------------

struct BoundRunOptions {
  bool linear = true;
  bool nonlinear = true;
};

struct Crossover {
  /// First grid time after which the nonlinear bound stays below the linear one.
  std::optional<double> time;
  /// The nonlinear bound is >= the linear one on the whole stretch before it.
  bool single = false;
};

struct BoundRun {
  Trajectory actual;
  std::vector<double> actual_norm;
  double l = 0.0;
  std::optional<BoundTrajectory> linear;
  std::optional<BoundTrajectory> nonlinear;
  std::optional<ComparisonReport> linear_report;
  std::optional<ComparisonReport> nonlinear_report;
  Crossover crossover;
};

/// Lipschitz constant for the linear envelope: zero without a nonlinearity,
/// the energy estimate for the benchmark, UnsupportedError otherwise.
double linear_envelope_constant(const SystemSpec& spec, const Eigen::VectorXd& x0);

/// Integrates the full system on the grid of `fd` and evaluates the requested bounds.
BoundRun run_bounds(const SystemSpec& spec, const FundamentalData& fd, const Eigen::VectorXd& x0,
                    const BoundRunOptions& opts, const IntegratorConfig& cfg);

Crossover find_crossover(const BoundTrajectory& linear, const BoundTrajectory& nonlinear);

/// `count` points drawn uniformly from the ellipsoid, reproducible from `seed`.
std::vector<Eigen::VectorXd> sample_ellipsoid(const EllipsoidSpec& ellipsoid, int count, std::uint64_t seed);

// ---- attractors -----------------------------------------------------------

struct AttractorRunOptions {
  double horizon = 200.0;
  /// Averaging window; default_averaging_window when unset.
  std::optional<double> window;
  std::optional<double> transient;
  bool sup = true;
  bool avg = true;
  bool numeric = true;
  bool probe = true;
  double splitting_floor = 1e-2;
  ProbeOptions probe_options;
  std::vector<Eigen::VectorXd> directions;  // e_1 .. e_n when empty
};

struct DirectionEstimate {
  std::string name;
  Eigen::VectorXd direction;
  std::optional<double> sup;
  std::optional<double> avg;
  std::optional<double> splitting;
  std::optional<double> probe;
  bool probe_ceiling = false;
};

struct NestingRow {
  std::string direction;
  std::string analytic_source;  // "sup", "avg" or empty
  std::optional<double> analytic;
  std::optional<double> splitting;
  std::optional<double> probe;
  /// analytic <= splitting <= probe, all present.
  bool holds = false;
  /// The sup intercept does not exceed the averaged one (or one is absent).
  bool sup_within_avg = true;
};

struct AttractorRun {
  FundamentalData fd;
  LipschitzEnvelope envelope;
  std::vector<double> forcing;
  ProbeCriterion criterion = ProbeCriterion::StaysBounded;
  std::optional<AttractorReport> sup;
  std::optional<AttractorReport> avg;
  std::vector<MuEstimate> mu_per_root;
  std::optional<AttractorReport> numeric;
  std::optional<std::string> numeric_error;
  std::optional<std::string> probe_error;
  std::vector<DirectionEstimate> directions;
  std::vector<NestingRow> nesting;
};

/// Decay for unforced systems, boundedness otherwise.
ProbeCriterion default_criterion(const SystemSpec& spec);

/// Runs the requested methods; method failures are recorded, not thrown.
AttractorRun run_attractor(const SystemSpec& spec, const AttractorRunOptions& opts, const IntegratorConfig& cfg);

/// Radius of the analytic estimate used in nesting comparisons: the sup
/// estimate when it is conclusive and root-based, else the averaged one.
std::optional<std::pair<std::string, double>> analytic_radius(const AttractorRun& run);

/// One line per method and per nesting comparison.
std::vector<std::string> attractor_summary(const AttractorRun& run);

/// Root table and boundary polylines (2-D) into `dir` with file prefix.
std::vector<std::filesystem::path> write_attractor_outputs(const AttractorRun& run, const SystemSpec& spec,
                                                           const std::filesystem::path& dir,
                                                           const std::string& prefix, int polyline_points,
                                                           const AttractorRunOptions& opts,
                                                           const IntegratorConfig& cfg);

// ---- figures ---------------------------------------------------------------

struct FigureResult {
  std::vector<std::filesystem::path> outputs;
  std::vector<std::string> summary;
  bool conclusive = true;
};

/// Runs the full pipeline for a named study and writes its CSV files.
FigureResult run_figure(const std::string& name, const std::filesystem::path& out_dir,
                        const IntegratorConfig& cfg);

}  // namespace nlbound
