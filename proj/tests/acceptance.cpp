// Acceptance suite: one PASS/FAIL line per criterion.
//
// Usage: acceptance [--report FILE] [criterion ...]
// Exit status is nonzero when a criterion fails that is not listed in
// kDocumentedFailures (see README, "Acceptance suite").

#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <fmt/format.h>

#include "nlbound/attractor.hpp"
#include "nlbound/bounds.hpp"
#include "nlbound/figures.hpp"
#include "nlbound/linear_analysis.hpp"
#include "test_support.hpp"

using namespace nlbound;

namespace {

const std::set<int> kDocumentedFailures = {8};

struct Outcome {
  bool pass = false;
  std::string detail;
};

IntegratorConfig default_cfg() {
  IntegratorConfig cfg;
  cfg.output_step = 0.01;
  return cfg;
}

SystemSpec constant_system(const Eigen::MatrixXd& a) {
  SystemSpec spec;
  spec.linear = MatrixFunctionSpec::constant(a);
  spec.nonlinear = PolynomialVectorField(static_cast<int>(a.rows()), {});
  spec.forcing.assign(a.rows(), QuasiPeriodicScalar{});
  return spec;
}

LipschitzEnvelope cubic() { return LipschitzEnvelope::power_series({EnvelopeTerm{{QuasiPeriodicScalar(1.0)}, 3.0}}); }

Outcome criterion1() {
  const auto cfg = default_cfg();
  VdpParameters frozen_params;
  frozen_params.alpha2 = 0.1;
  const auto fr = compute_fundamental(vdp_preset(frozen_params), Normalization::FrozenReference, 300.0, cfg);
  double worst_p = 0.0;
  for (double v : fr.p) worst_p = std::max(worst_p, std::abs(v + 0.1));

  const auto preset = figure_preset("fig1");
  const auto id = compute_fundamental(vdp_preset(preset.params), Normalization::Identity, preset.horizon, cfg);
  double worst_bar = 0.0;
  for (std::size_t i = 0; i < id.size(); ++i)
    if (id.times[i] >= 200.0) worst_bar = std::max(worst_bar, std::abs(id.p_bar[i] + 0.1));

  return {worst_p <= 1e-4 && worst_bar <= 0.02,
          fmt::format("frozen max|p+0.1| = {:.2e} (tol 1e-4); identity max|p_bar+0.1| on [200,{}] = {:.4f} (tol 0.02)",
                      worst_p, preset.horizon, worst_bar)};
}

Outcome criterion2() {
  const auto cfg = default_cfg();
  bool pass = true;
  std::ostringstream detail;
  for (const char* name : {"fig2.1", "fig2.2"}) {
    const auto preset = figure_preset(name);
    const auto spec = vdp_preset(preset.params);
    const auto fd = analysis_fundamental(spec, 100.0, cfg);
    const auto reference = map_to_ellipsoid(fd, 1.0);
    const double radius = (reference.w_inv * *preset.x0).norm();
    const auto samples = sample_ellipsoid(map_to_ellipsoid(fd, radius), 20, 20240601);
    double worst_lin = -kUnbounded, worst_nl = -kUnbounded;
    int failures = 0;
    for (const auto& x0 : samples) {
      const auto run = run_bounds(spec, fd, x0, {}, cfg);
      worst_lin = std::max(worst_lin, run.linear_report->max_violation);
      worst_nl = std::max(worst_nl, run.nonlinear_report->max_violation);
      failures += !run.linear_report->passed + !run.nonlinear_report->passed;
    }
    pass = pass && failures == 0;
    detail << fmt::format("{}: radius {:.4f}, max violation linear {:.3g} nonlinear {:.3g}, failures {}; ", name,
                          radius, worst_lin, worst_nl, failures);
  }
  return {pass, detail.str() + "tol 1e-6(1+bound)"};
}

Outcome criterion3() {
  const auto cfg = default_cfg();
  const auto preset = figure_preset("fig2.1");
  const auto spec = vdp_preset(preset.params);
  const auto fd = analysis_fundamental(spec, preset.horizon, cfg);
  const auto run = run_bounds(spec, fd, *preset.x0, {}, cfg);
  const auto& c = run.crossover;
  const bool pass = c.time && *c.time > fd.t0() && c.single;
  return {pass, fmt::format("crossover t_c = {}, nonlinear >= linear before it: {}",
                            c.time ? fmt::format("{:.3f}", *c.time) : "none", c.single)};
}

Outcome criterion4() {
  IntegratorConfig cfg = default_cfg();
  cfg.rel_tol = 1e-11;
  cfg.abs_tol = 1e-14;
  const auto fd = testing::constant_fundamental(-1.0, 1.0, 10.0);
  const std::vector<double> zero(fd.size(), 0.0);
  bool pass = true;
  std::ostringstream detail;
  for (double x0 : {0.3, 0.5, 0.9}) {
    const auto b = auxiliary_solve(fd, cubic(), zero, x0, cfg);
    double worst = 0.0;
    for (std::size_t i = 0; i < fd.size(); ++i) {
      const double exact = bernoulli_closed_form(-1.0, 1.0, 1.0, 3.0, x0, fd.times[i]).value;
      worst = std::max(worst, std::abs(b.values[i] - exact) / exact);
    }
    pass = pass && !b.escaped && worst <= 1e-6;
    detail << fmt::format("X0={}: max rel err {:.2e}; ", x0, worst);
  }
  const auto blow = auxiliary_solve(fd, cubic(), zero, 1.1, cfg);
  const auto exact = bernoulli_closed_form(-1.0, 1.0, 1.0, 3.0, 1.1, 10.0);
  if (blow.escaped && blow.escape_time && exact.blowup_time) {
    const double rel = std::abs(*blow.escape_time - *exact.blowup_time) / *exact.blowup_time;
    pass = pass && rel <= 0.01;
    detail << fmt::format("X0=1.1: blow-up numeric {:.5f} vs exact {:.5f} (rel {:.2e}, tol 1e-2)", *blow.escape_time,
                          *exact.blowup_time, rel);
  } else {
    pass = false;
    detail << "X0=1.1: blow-up not reported by both";
  }
  return {pass, detail.str()};
}

Outcome criterion5() {
  FrozenCoefficients fc;
  fc.p_hat = -1.0;
  fc.k_hat = 1.0;
  fc.l_hat = {{1.0, 3.0}};
  fc.f_hat = 0.1;
  const auto forced = find_roots(fc, default_scan_ceiling(fc));
  const auto q = [](double x) { return x * x * x - x + 0.1; };
  const double lo = testing::bisect(q, 0.0, 0.5), hi = testing::bisect(q, 0.5, 2.0);
  bool pass = forced.size() == 2 && std::abs(forced.roots[0] - lo) <= 1e-8 &&
              std::abs(forced.roots[1] - hi) <= 1e-8 && forced.classes[0] == RootClass::Stable &&
              forced.classes[1] == RootClass::Unstable;
  std::string detail = fmt::format("X^3-X+0.1: {} roots", forced.size());
  if (forced.size() == 2) {
    detail += fmt::format(" {:.10f} ({}) {:.10f} ({}), oracle {:.10f} {:.10f}", forced.roots[0],
                          to_string(forced.classes[0]), forced.roots[1], to_string(forced.classes[1]), lo, hi);
  }
  fc.f_hat = 0.0;
  const auto unforced = find_roots(fc, default_scan_ceiling(fc));
  pass = pass && unforced.size() == 1 && std::abs(unforced.roots[0] - 1.0) <= 1e-8 &&
         unforced.classes[0] == RootClass::Unstable;
  if (unforced.size() == 1) {
    detail += fmt::format("; X^3-X: {:.10f} ({})", unforced.roots[0], to_string(unforced.classes[0]));
  }
  return {pass, detail + "; tol 1e-8"};
}

Outcome criterion6() {
  const auto cfg = default_cfg();
  const auto preset = figure_preset("fig3.2");
  const auto spec = vdp_preset(preset.params);
  const auto fd = analysis_fundamental(spec, preset.horizon, cfg);
  const auto env = envelope_from_polynomial(spec.nonlinear);
  const auto forcing = forcing_norm_series(spec, fd.times);
  std::vector<double> prev;
  double worst = 0.0;
  int escaped = 0;
  for (int j = 1; j <= 10; ++j) {
    const auto b = auxiliary_solve(fd, env, forcing, 0.1 * j, cfg);
    escaped += b.escaped;
    if (!prev.empty()) {
      for (std::size_t i = 0; i < b.values.size(); ++i) {
        if (std::isinf(b.values[i])) continue;
        worst = std::max(worst, prev[i] - b.values[i]);
      }
    }
    prev = b.values;
  }
  return {worst <= 1e-9, fmt::format("max ordering defect {:.2e} (slack 1e-9); {} of 10 solutions escape", worst,
                                     escaped)};
}

struct AttractorCache {
  std::map<std::string, AttractorRun> runs;

  const AttractorRun& get(const std::string& name, bool full) {
    const auto key = name + (full ? "/full" : "/avg");
    auto it = runs.find(key);
    if (it != runs.end()) return it->second;
    const auto preset = figure_preset(name);
    AttractorRunOptions opts;
    opts.horizon = preset.horizon;
    if (!full) opts.sup = opts.numeric = opts.probe = false;
    return runs.emplace(key, run_attractor(vdp_preset(preset.params), opts, default_cfg())).first->second;
  }
};

AttractorCache& attractors() {
  static AttractorCache cache;
  return cache;
}

std::string opt(const std::optional<double>& v) { return v ? fmt::format("{:.4f}", *v) : "none"; }

Outcome criterion7() {
  bool pass = true;
  std::ostringstream detail;
  for (const char* name : {"fig3.1", "fig3.2"}) {
    const auto& run = attractors().get(name, true);
    for (const auto& row : run.nesting) {
      pass = pass && row.holds;
      detail << fmt::format("{} {}: {} {} <= splitting {} <= probe {}", name, row.direction, row.analytic_source,
                            opt(row.analytic), opt(row.splitting), opt(row.probe));
      if (row.analytic && row.splitting && row.probe) {
        detail << fmt::format(" (gaps {:.4f}, {:.4f})", *row.splitting - *row.analytic, *row.probe - *row.splitting);
      }
      detail << "; ";
    }
    if (run.nesting.empty()) {
      pass = false;
      detail << name << ": no nesting rows; ";
    }
  }
  return {pass, detail.str()};
}

Outcome criterion8() {
  std::optional<double> mu2, mu3;
  std::ostringstream detail;
  for (const auto& [name, paper, slot] :
       {std::tuple{"fig3.2", 0.085, &mu2}, std::tuple{"fig3.3", 0.183, &mu3}}) {
    const auto& run = attractors().get(name, false);
    if (run.avg && !run.avg->roots.empty()) {
      *slot = run.avg->mu;
      detail << fmt::format("{}: mu = {:.4f} (accepted [{:.4f}, {:.4f}]); ", name, run.avg->mu, paper / 3, paper * 3);
    } else {
      detail << fmt::format("{}: averaged equation has no positive root, mu undefined (accepted [{:.4f}, {:.4f}]); ",
                            name, paper / 3, paper * 3);
    }
  }
  const auto in_range = [](const std::optional<double>& v, double paper) {
    return v && *v > 0.0 && *v >= paper / 3 && *v <= paper * 3;
  };
  const bool pass = in_range(mu2, 0.085) && in_range(mu3, 0.183) && *mu3 > *mu2;
  return {pass, detail.str()};
}

Outcome criterion9() {
  // exp(int p) is checked on a grid fine enough to resolve the avoided
  // crossings of the singular values; the default-grid value is reported.
  IntegratorConfig fine = default_cfg();
  fine.output_step = 1e-3;
  double worst_k = 0.0, worst_log = 0.0, worst_det = 0.0, coarse_log = 0.0;
  int runs = 0;
  const auto check = [&](const SystemSpec& spec, const FundamentalData& fd) {
    ++runs;
    double trace_integral = 0.0;
    double prev_trace = spec.linear(fd.times[0]).trace();
    for (std::size_t i = 0; i < fd.size(); ++i) {
      worst_k = std::max(worst_k, std::abs(fd.k[i] * fd.sigma_min[i] - fd.sigma_max[i]) / fd.sigma_max[i]);
      if (i > 0) {
        const double tr = spec.linear(fd.times[i]).trace();
        trace_integral += 0.5 * (tr + prev_trace) * (fd.times[i] - fd.times[i - 1]);
        prev_trace = tr;
      }
      const double expected = fd.w0().determinant() * std::exp(trace_integral);
      worst_det = std::max(worst_det, std::abs(fd.w[i].determinant() - expected) / std::abs(expected));
    }
    worst_log = std::max(worst_log, fd.log_reconstruction_error());
  };
  for (const auto& name : figure_names()) {
    const auto preset = figure_preset(name);
    const auto spec = vdp_preset(preset.params);
    for (auto norm : {Normalization::Identity, Normalization::FrozenReference}) {
      check(spec, compute_fundamental(spec, norm, preset.horizon, fine));
      coarse_log = std::max(coarse_log,
                            compute_fundamental(spec, norm, preset.horizon, default_cfg()).log_reconstruction_error());
    }
  }
  const bool pass = worst_k <= 1e-14 && worst_log <= 1e-3 && worst_det <= 1e-4;
  return {pass, fmt::format("{} runs at step 1e-3: max rel |k sigma_min - sigma_max| {:.1e} (machine); exp(int p) "
                            "rel err {:.2e} (tol 1e-3; {:.2e} at step 1e-2); Liouville rel err {:.2e} (tol 1e-4)",
                            runs, worst_k, worst_log, coarse_log, worst_det)};
}

Outcome criterion10() {
  IntegratorConfig cfg;
  cfg.output_step = 0.05;
  const auto zero_l = LipschitzEnvelope::linear(QuasiPeriodicScalar(0.0));
  const auto stable = compute_fundamental(constant_system(Eigen::Vector2d(-1, -2).asDiagonal()),
                                          Normalization::Identity, 100.0, cfg);
  const auto r1 = stability_report(stable, zero_l, std::vector<double>(stable.size(), 0.0));
  const auto unstable = compute_fundamental(constant_system(Eigen::Vector2d(1, -2).asDiagonal()),
                                            Normalization::Identity, 20.0, cfg);
  const auto r2 = stability_report(unstable, zero_l, std::vector<double>(unstable.size(), 0.0));
  const bool pass = r1.corollary1.passed && r1.corollary2 && r1.corollary3 && std::abs(r1.chi_hat + 1.0) <= 0.02 &&
                    !r2.corollary1.passed && !r2.corollary2 && !r2.corollary3 && std::abs(r2.chi_hat - 1.0) <= 0.02;
  return {pass, fmt::format("diag(-1,-2): cor1 {} cor2 {} cor3 {} chi_hat {:.4f}; diag(1,-2): cor1 {} cor2 {} cor3 {} "
                            "chi_hat {:.4f}; tol 0.02",
                            r1.corollary1.passed, r1.corollary2, r1.corollary3, r1.chi_hat, r2.corollary1.passed,
                            r2.corollary2, r2.corollary3, r2.chi_hat)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::function<Outcome()>> criteria = {criterion1, criterion2, criterion3, criterion4,
                                                          criterion5, criterion6, criterion7, criterion8,
                                                          criterion9, criterion10};
  std::string report_path;
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--report") == 0 && i + 1 < argc) {
      report_path = argv[++i];
    } else {
      selected.insert(std::stoi(argv[i]));
    }
  }

  std::ostringstream report;
  int unexpected = 0;
  for (int n = 1; n <= static_cast<int>(criteria.size()); ++n) {
    if (!selected.empty() && !selected.count(n)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[n - 1]();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::string status = o.pass ? "PASS" : "FAIL";
    if (!o.pass && kDocumentedFailures.count(n)) status += " (documented)";
    if (!o.pass && !kDocumentedFailures.count(n)) ++unexpected;
    const auto line = fmt::format("criterion {:2d}: {} [{:.1f}s] {}", n, status, secs, o.detail);
    std::cout << line << std::endl;
    report << line << '\n';
  }
  if (!report_path.empty()) std::ofstream(report_path) << report.str();
  return unexpected == 0 ? 0 : 1;
}
