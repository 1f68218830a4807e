#include "nlbound/figures.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numbers>
#include <random>

#include <fmt/format.h>

#include "nlbound/csv.hpp"
#include "nlbound/error.hpp"

namespace nlbound {

namespace {

constexpr double kPi = std::numbers::pi;

VdpParameters fig2_params(double a) {
  VdpParameters p;
  p.alpha2 = 0.1;
  p.a1 = p.a2 = 0.5;
  p.r1 = kPi;
  p.r2 = 7.0;
  p.a = a;
  p.omega2 = 2.0 * kPi;
  return p;
}

VdpParameters fig3_params(double a1, double a, double omega2) {
  VdpParameters p;
  p.alpha2 = -0.05;
  p.a1 = p.a2 = a1;
  p.r1 = 3.2 * kPi;
  p.r2 = 13.0;
  p.a = a;
  p.omega2 = omega2;
  return p;
}

}  // namespace

const std::vector<std::string>& figure_names() {
  static const std::vector<std::string> names{"fig1", "fig2.1", "fig2.2", "fig3.1", "fig3.2", "fig3.3", "fig4"};
  return names;
}

FigurePreset figure_preset(const std::string& name) {
  FigurePreset f;
  f.name = name;
  if (name == "fig1") {
    f.params = fig2_params(0.0);
    f.horizon = 300.0;
  } else if (name == "fig2.1" || name == "fig2.2") {
    f.params = fig2_params(name == "fig2.1" ? 0.0 : 0.01);
    f.horizon = 100.0;
    f.x0 = Eigen::Vector2d(0.2, 0.2);
    f.assumptions.push_back("x0 = (0.2, 0.2): initial state not stated in the source");
  } else if (name == "fig3.1") {
    f.params = fig3_params(0.1, 0.01, 2.0 * kPi);
    f.assumptions.push_back("omega2 = 2 pi: forcing frequency not stated in the source");
  } else if (name == "fig3.2") {
    f.params = fig3_params(5.0, 0.0, 8.0 * kPi);
  } else if (name == "fig3.3" || name == "fig4") {
    f.params = fig3_params(5.0, 0.05, 8.0 * kPi);
  } else {
    throw UnsupportedError(fmt::format("unknown figure '{}' (expected one of fig1, fig2.1, fig2.2, fig3.1, "
                                       "fig3.2, fig3.3, fig4)",
                                       name));
  }
  return f;
}

FundamentalData analysis_fundamental(const SystemSpec& spec, double t_end, const IntegratorConfig& cfg) {
  return compute_fundamental(spec, Normalization::FrozenReference, t_end, cfg);
}

double linear_envelope_constant(const SystemSpec& spec, const Eigen::VectorXd& x0) {
  if (spec.nonlinear.empty()) return 0.0;
  if (spec.preset) return linear_l_from_energy(spec, x0);
  throw UnsupportedError("a linear envelope is available for the benchmark preset or a zero nonlinearity only");
}

Crossover find_crossover(const BoundTrajectory& linear, const BoundTrajectory& nonlinear) {
  const std::size_t n = std::min(linear.values.size(), nonlinear.values.size());
  Crossover c;
  std::optional<std::size_t> last_above;
  for (std::size_t i = 0; i < n; ++i)
    if (nonlinear.values[i] >= linear.values[i]) last_above = i;
  if (!last_above) {
    c.time = linear.times.front();
    c.single = true;
    return c;
  }
  if (*last_above + 1 >= n) return c;
  c.time = linear.times[*last_above + 1];
  c.single = true;
  for (std::size_t i = 0; i <= *last_above; ++i)
    if (nonlinear.values[i] < linear.values[i]) c.single = false;
  return c;
}

BoundRun run_bounds(const SystemSpec& spec, const FundamentalData& fd, const Eigen::VectorXd& x0,
                    const BoundRunOptions& opts, const IntegratorConfig& cfg) {
  spec.validate();
  if (x0.size() != spec.dimension()) throw DimensionError("initial state dimension mismatch");
  BoundRun run;
  IntegratorConfig local = cfg;
  local.output_step = fd.step();
  StateRhs rhs = [&spec](double t, const Eigen::VectorXd& x, Eigen::VectorXd& dx) { eval_rhs(spec, t, x, dx); };
  run.actual = integrate_ivp(rhs, fd.t0(), x0, fd.times.back(), local);
  for (const auto& s : run.actual.states) run.actual_norm.push_back(s.norm());

  const auto forcing = forcing_norm_series(spec, fd.times);
  if (opts.linear) {
    run.l = linear_envelope_constant(spec, x0);
    const auto env = LipschitzEnvelope::linear(QuasiPeriodicScalar(run.l));
    run.linear = linear_bound(fd, env, forcing, x0);
    run.linear_report = verify_comparison(run.actual, *run.linear);
  }
  if (opts.nonlinear) {
    const auto env = envelope_from_polynomial(spec.nonlinear);
    const double x0_norm = (map_to_ellipsoid(fd, 1.0).w_inv * x0).norm();
    run.nonlinear = auxiliary_solve(fd, env, forcing, x0_norm, cfg);
    run.nonlinear_report = verify_comparison(run.actual, *run.nonlinear, env.region_radius());
  }
  if (run.linear && run.nonlinear) run.crossover = find_crossover(*run.linear, *run.nonlinear);
  return run;
}

std::vector<Eigen::VectorXd> sample_ellipsoid(const EllipsoidSpec& ellipsoid, int count, std::uint64_t seed) {
  const Eigen::Index n = ellipsoid.w_inv.rows();
  const Eigen::MatrixXd w0 = ellipsoid.w_inv.inverse();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> unit;
  std::vector<Eigen::VectorXd> out;
  for (int i = 0; i < count; ++i) {
    Eigen::VectorXd y(n);
    for (Eigen::Index j = 0; j < n; ++j) y[j] = gauss(rng);
    const double r = ellipsoid.radius * std::pow(unit(rng), 1.0 / static_cast<double>(n));
    out.push_back(w0 * (r * y.normalized()));
  }
  return out;
}

ProbeCriterion default_criterion(const SystemSpec& spec) {
  const bool forced = std::any_of(spec.forcing.begin(), spec.forcing.end(),
                                  [](const QuasiPeriodicScalar& f) { return f.magnitude_bound() > 0.0; });
  return forced ? ProbeCriterion::StaysBounded : ProbeCriterion::DecaysToZero;
}

namespace {

bool splitting_ok(const AttractorRun& run, double x0, double horizon, const IntegratorConfig& cfg) {
  const auto r = auxiliary_solve(run.fd, run.envelope, run.forcing, x0, cfg, horizon);
  if (r.escaped) return false;
  return run.criterion == ProbeCriterion::StaysBounded || r.values.back() < 1e-3 * x0;
}

std::optional<double> scaled(const std::optional<AttractorReport>& r, double g) {
  if (!r || !r->conclusive) return std::nullopt;
  const auto radius = r->region_radius();
  if (!radius) return std::nullopt;
  return *radius / g;
}

}  // namespace

AttractorRun run_attractor(const SystemSpec& spec, const AttractorRunOptions& opts, const IntegratorConfig& cfg) {
  spec.validate();
  AttractorRun run;
  run.fd = analysis_fundamental(spec, spec.t0 + opts.horizon, cfg);
  run.envelope = envelope_from_polynomial(spec.nonlinear);
  run.forcing = forcing_norm_series(spec, run.fd.times);
  run.criterion = default_criterion(spec);
  const double horizon = run.fd.times.back() - run.fd.t0();

  std::vector<double> levels;
  if (opts.sup) {
    const auto fc = freeze_sup(run.fd, run.envelope, run.forcing);
    run.sup = classify_report(find_roots(fc, default_scan_ceiling(fc)), fc);
    levels.insert(levels.end(), run.sup->roots.roots.begin(), run.sup->roots.roots.end());
  }
  if (opts.avg) {
    const double window = opts.window.value_or(default_averaging_window(spec, horizon));
    const auto fc = freeze_avg(run.fd, run.envelope, run.forcing, window);
    const auto roots = find_roots(fc, default_scan_ceiling(fc));
    double mu = 0.0;
    bool reliable = true;
    for (std::size_t i = 0; i < roots.size(); ++i) {
      const auto m = estimate_mu(run.fd, run.envelope, run.forcing, roots.roots[i], roots.classes[i],
                                 MuOptions{horizon, opts.transient}, cfg);
      run.mu_per_root.push_back(m);
      mu = std::max(mu, m.value);
      reliable = reliable && m.reliable;
    }
    run.avg = classify_report(roots, fc, mu);
    run.avg->mu_reliable = reliable;
    if (!reliable) {
      run.avg->conclusive = false;
      run.avg->verdict = "inconclusive: mu estimate unreliable";
    }
    levels.insert(levels.end(), roots.roots.begin(), roots.roots.end());
  }
  if (opts.numeric) {
    try {
      const double lo = opts.splitting_floor;
      if (!splitting_ok(run, lo, horizon, cfg)) {
        throw BracketError(fmt::format("criterion '{}' fails already at X0 = {}", to_string(run.criterion), lo));
      }
      double hi = 1.0;
      for (double l : levels) hi = std::max(hi, 2.0 * l);
      while (splitting_ok(run, hi, horizon, cfg)) {
        hi *= 2.0;
        if (hi > 1e4) throw BracketError("criterion holds up to X0 = 1e4; no splitting value");
      }
      const auto s = splitting_value_search(run.fd, run.envelope, run.forcing, lo, hi, horizon, run.criterion, cfg);
      run.numeric = splitting_report(s, run.criterion);
    } catch (const Error& e) {
      run.numeric_error = e.what();
    }
  }

  std::vector<Eigen::VectorXd> dirs = opts.directions;
  std::vector<std::string> names;
  if (dirs.empty()) {
    for (int i = 0; i < spec.dimension(); ++i) {
      dirs.push_back(Eigen::VectorXd::Unit(spec.dimension(), i));
      names.push_back(fmt::format("e{}", i + 1));
    }
  } else {
    for (std::size_t i = 0; i < dirs.size(); ++i) names.push_back(fmt::format("d{}", i + 1));
  }

  std::vector<std::future<ProbeResult>> probes;
  if (opts.probe) {
    for (const auto& d : dirs) {
      probes.push_back(std::async(std::launch::async, [&spec, d, &run, &opts, &cfg] {
        return direct_basin_probe(spec, d, run.criterion, opts.probe_options, cfg);
      }));
    }
  }

  const auto ell = map_to_ellipsoid(run.fd, 1.0);
  const auto analytic = analytic_radius(run);
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    DirectionEstimate de;
    de.name = names[i];
    de.direction = dirs[i].normalized();
    const double g = (ell.w_inv * de.direction).norm();
    de.sup = scaled(run.sup, g);
    de.avg = scaled(run.avg, g);
    de.splitting = scaled(run.numeric, g);
    if (opts.probe) {
      try {
        const auto p = probes[i].get();
        de.probe = p.value;
        de.probe_ceiling = p.ceiling;
      } catch (const Error& e) {
        run.probe_error = fmt::format("{}: {}", de.name, e.what());
      }
    }
    NestingRow row;
    row.direction = de.name;
    if (analytic) {
      row.analytic_source = analytic->first;
      row.analytic = analytic->second / g;
    }
    row.splitting = de.splitting;
    row.probe = de.probe;
    row.holds = row.analytic && row.splitting && row.probe && *row.analytic <= *row.splitting &&
                *row.splitting <= *row.probe;
    row.sup_within_avg = !(de.sup && de.avg) || *de.sup <= *de.avg;
    run.nesting.push_back(row);
    run.directions.push_back(std::move(de));
  }
  return run;
}

std::optional<std::pair<std::string, double>> analytic_radius(const AttractorRun& run) {
  auto usable = [](const std::optional<AttractorReport>& r) {
    return r && r->conclusive && !r->ceiling_limited && r->region_radius();
  };
  if (usable(run.sup)) return std::pair<std::string, double>{"sup", *run.sup->region_radius()};
  if (usable(run.avg)) return std::pair<std::string, double>{"avg", *run.avg->region_radius()};
  return std::nullopt;
}

std::vector<std::filesystem::path> write_attractor_outputs(const AttractorRun& run, const SystemSpec& spec,
                                                           const std::filesystem::path& dir,
                                                           const std::string& prefix, int polyline_points,
                                                           const AttractorRunOptions& opts,
                                                           const IntegratorConfig& cfg) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> files;
  std::vector<std::string> dir_names;
  std::vector<double> gains;
  const auto ell = map_to_ellipsoid(run.fd, 1.0);
  for (const auto& d : run.directions) {
    dir_names.push_back(d.name);
    gains.push_back((ell.w_inv * d.direction).norm());
  }
  auto intercepts = [&](double radius) {
    std::vector<double> v;
    for (double g : gains) v.push_back(radius / g);
    return v;
  };

  std::vector<RootTableRow> rows;
  auto add_roots = [&](const std::optional<AttractorReport>& r, const std::string& method) {
    if (!r) return;
    for (std::size_t i = 0; i < r->roots.size(); ++i) {
      const double level = r->roots.roots[i];
      rows.push_back({method, to_string(r->roots.classes[i]), level, r->mu, intercepts(std::max(level - r->mu, 0.0))});
    }
  };
  add_roots(run.sup, "frozen-sup");
  add_roots(run.avg, "frozen-avg");
  if (run.numeric) {
    const double v = *run.numeric->splitting_value;
    rows.push_back({to_string(Method::NumericSplitting), to_string(run.criterion), v, 0.0, intercepts(v)});
  }
  if (!run.directions.empty() && std::all_of(run.directions.begin(), run.directions.end(),
                                             [](const DirectionEstimate& d) { return d.probe.has_value(); })) {
    std::vector<double> v;
    for (const auto& d : run.directions) v.push_back(*d.probe);
    rows.push_back({"direct-probe", to_string(run.criterion), std::nan(""), 0.0, v});
  }
  const auto table = dir / (prefix + "_roots.csv");
  write_root_table(table, rows, dir_names);
  files.push_back(table);

  if (spec.dimension() == 2 && polyline_points >= 3) {
    auto emit = [&](const std::optional<AttractorReport>& r, const std::string& tag) {
      if (!r || !r->conclusive || !r->region_radius() || !(*r->region_radius() > 0.0)) return;
      const auto path = dir / fmt::format("{}_boundary_{}.csv", prefix, tag);
      write_polyline_csv(path, ellipsoid_polyline(map_to_ellipsoid(run.fd, *r->region_radius()), polyline_points));
      files.push_back(path);
    };
    emit(run.sup, "sup");
    emit(run.avg, "avg");
    emit(run.numeric, "splitting");
    if (opts.probe) {
      const auto path = dir / fmt::format("{}_boundary_probe.csv", prefix);
      write_polyline_csv(path, probe_polyline(spec, run.criterion, polyline_points, opts.probe_options, cfg));
      files.push_back(path);
    }
  }
  return files;
}

namespace {

std::string opt_str(const std::optional<double>& v) { return v ? fmt::format("{:.6g}", *v) : "n/a"; }

void summarize_report(const std::optional<AttractorReport>& r, const std::string& label,
                      std::vector<std::string>& out) {
  if (!r) return;
  std::string roots;
  for (std::size_t i = 0; i < r->roots.size(); ++i) {
    roots += fmt::format("{}{:.6g} ({})", i ? ", " : "", r->roots.roots[i], to_string(r->roots.classes[i]));
  }
  out.push_back(fmt::format("{}: {} roots [{}], mu {:.6g}, case {}, {}", label, r->roots.size(), roots, r->mu,
                            to_string(r->theorem), r->verdict));
}

}  // namespace

std::vector<std::string> attractor_summary(const AttractorRun& run) {
  std::vector<std::string> out;
  summarize_report(run.sup, "sup", out);
  summarize_report(run.avg, "avg", out);
  if (run.numeric) {
    out.push_back(fmt::format("splitting ({}): X0 = {:.6g}", to_string(run.criterion), *run.numeric->splitting_value));
  } else if (run.numeric_error) {
    out.push_back("splitting: " + *run.numeric_error);
  }
  if (run.probe_error) out.push_back("probe: " + *run.probe_error);
  for (const auto& n : run.nesting) {
    out.push_back(fmt::format("nesting {}: analytic({}) {} <= splitting {} <= probe {} : {}", n.direction,
                              n.analytic_source.empty() ? "-" : n.analytic_source, opt_str(n.analytic),
                              opt_str(n.splitting), opt_str(n.probe), n.holds ? "holds" : "does not hold"));
  }
  return out;
}

FigureResult run_figure(const std::string& name, const std::filesystem::path& out_dir, const IntegratorConfig& cfg) {
  const auto preset = figure_preset(name);
  const auto spec = vdp_preset(preset.params);
  std::filesystem::create_directories(out_dir);
  FigureResult res;
  const std::string stem = name;

  if (name == "fig1") {
    const auto id = compute_fundamental(spec, Normalization::Identity, preset.horizon, cfg);
    const auto fr = compute_fundamental(spec, Normalization::FrozenReference, preset.horizon, cfg);
    const auto path = out_dir / (stem + ".csv");
    CsvWriter csv(path, {{"t", "time"}, {"p_identity", "1/time"}, {"p_frozen", "1/time"}, {"p_bar_identity", "1/time"}});
    for (std::size_t i = 0; i < id.size(); ++i) csv.row({id.times[i], id.p[i], fr.p[i], id.p_bar[i]});
    res.outputs.push_back(path);
    res.summary.push_back(fmt::format("p_bar (identity) at t = {:.6g}: {:.6g}", id.times.back(), id.p_bar.back()));
  } else if (name == "fig2.1" || name == "fig2.2") {
    const auto fd = analysis_fundamental(spec, preset.horizon, cfg);
    const auto run = run_bounds(spec, fd, *preset.x0, {}, cfg);
    const auto path = out_dir / (stem + ".csv");
    write_bounds_csv(path, fd.times, &run.actual_norm, &*run.linear, &*run.nonlinear);
    res.outputs.push_back(path);
    res.summary.push_back(fmt::format("l = {:.6g}, X0 = {:.6g}", run.l, run.nonlinear->x0_norm));
    res.summary.push_back(fmt::format("max violation: linear {:.3g}, nonlinear {:.3g}", run.linear_report->max_violation,
                                      run.nonlinear_report->max_violation));
    res.summary.push_back(fmt::format("crossover: {} (single: {})", opt_str(run.crossover.time), run.crossover.single));
    res.conclusive = run.linear_report->passed && run.nonlinear_report->passed;
  } else if (name == "fig4") {
    const auto fd = analysis_fundamental(spec, preset.horizon, cfg);
    const auto path = out_dir / (stem + ".csv");
    CsvWriter csv(path, {{"t", "time"}, {"p", "1/time"}, {"k", "1"}, {"p_bar", "1/time"}, {"k_bar", "1"}});
    for (std::size_t i = 0; i < fd.size(); ++i) csv.row({fd.times[i], fd.p[i], fd.k[i], fd.p_bar[i], fd.k_bar[i]});
    res.outputs.push_back(path);
    res.summary.push_back(fmt::format("p_bar -> {:.6g}, k_bar -> {:.6g}", fd.p_bar.back(), fd.k_bar.back()));
  } else {
    AttractorRunOptions opts;
    opts.horizon = preset.horizon;
    const auto run = run_attractor(spec, opts, cfg);
    res.outputs = write_attractor_outputs(run, spec, out_dir, stem, 72, opts, cfg);
    res.summary = attractor_summary(run);
    res.conclusive = analytic_radius(run).has_value();
  }
  return res;
}

}  // namespace nlbound
