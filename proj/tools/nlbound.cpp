// Command-line front end: fundamental, bound, attractor, figure, replay.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include "nlbound/attractor.hpp"
#include "nlbound/bounds.hpp"
#include "nlbound/config.hpp"
#include "nlbound/error.hpp"
#include "nlbound/figures.hpp"
#include "nlbound/linear_analysis.hpp"

namespace fs = std::filesystem;
using namespace nlbound;

namespace {

constexpr int kOk = 0;
constexpr int kInconclusive = 1;
constexpr int kUsage = 2;
constexpr int kNumerical = 3;

struct IntegratorArgs {
  double rel_tol = 1e-9;
  double abs_tol = 1e-12;
  double step = 0.01;

  IntegratorConfig config() const {
    IntegratorConfig c;
    c.rel_tol = rel_tol;
    c.abs_tol = abs_tol;
    c.output_step = step;
    return c;
  }
};

struct FundamentalArgs {
  std::string config;
  std::string normalization = "frozen";
  double t_end = 100.0;
  std::string out = "fundamental.csv";
};

struct BoundArgs {
  std::string config;
  std::vector<double> x0;
  std::string envelope = "both";
  double t_end = 100.0;
  std::string out = "bound.csv";
};

struct AttractorArgs {
  std::string config;
  std::string method = "all";
  std::vector<std::string> directions;
  double horizon = 200.0;
  double window = 0.0;
  double probe_horizon = 100.0;
  int polyline = 72;
  std::string out_dir = "attractor";
};

struct FigureArgs {
  std::string name;
  std::string out_dir = "figures";
};

std::vector<double> parse_vector(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double x = 0.0;
    try {
      x = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || item.find_first_not_of(" \t", used) != std::string::npos) {
      throw ValidationError(fmt::format("cannot read '{}' as a number in '{}'", item, text));
    }
    v.push_back(x);
  }
  if (v.empty()) throw ValidationError("empty vector");
  return v;
}

SystemSpec load_spec(const std::string& path) {
  if (!fs::exists(path)) throw ConfigError(path, "config not found");
  return load_config_file(path);
}

YAML::Node integrator_node(const IntegratorConfig& c) {
  YAML::Node n;
  n["rel_tol"] = c.rel_tol;
  n["abs_tol"] = c.abs_tol;
  n["output_step"] = c.output_step;
  n["max_step"] = c.max_step;
  n["escape_radius"] = c.escape_radius;
  return n;
}

IntegratorArgs integrator_from_node(const YAML::Node& n) {
  IntegratorArgs a;
  a.rel_tol = n["rel_tol"].as<double>();
  a.abs_tol = n["abs_tol"].as<double>();
  a.step = n["output_step"].as<double>();
  return a;
}

void write_manifest(const fs::path& path, const std::string& command, const YAML::Node& config,
                    const YAML::Node& options, const IntegratorConfig& cfg, const std::vector<fs::path>& outputs,
                    const std::vector<std::string>& assumptions = {}) {
  YAML::Node root;
  root["command"] = command;
  if (config) root["config"] = config;
  root["options"] = options;
  root["integrator"] = integrator_node(cfg);
  YAML::Node outs(YAML::NodeType::Sequence);
  for (const auto& p : outputs) outs.push_back(p.filename().string());
  root["outputs"] = outs;
  root["seed"] = 0;
  if (!assumptions.empty()) {
    YAML::Node a(YAML::NodeType::Sequence);
    for (const auto& s : assumptions) a.push_back(s);
    root["assumptions"] = a;
  }
  YAML::Emitter em;
  em.SetDoublePrecision(17);
  em << root;
  std::ofstream out(path);
  if (!out) throw Error("cannot write manifest '" + path.string() + "'");
  out << em.c_str() << '\n';
}

fs::path manifest_for(const fs::path& out) {
  return out.parent_path() / (out.stem().string() + ".manifest.yaml");
}

// ---- commands ---------------------------------------------------------------

int run_fundamental(const SystemSpec& spec, const FundamentalArgs& a, const IntegratorConfig& cfg) {
  const auto norm = normalization_from_string(a.normalization);
  const auto fd = compute_fundamental(spec, norm, spec.t0 + a.t_end, cfg);
  const fs::path out(a.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_fundamental_csv(fd, out);

  YAML::Node opts;
  opts["normalization"] = to_string(norm);
  opts["t_end"] = a.t_end;
  opts["out"] = out.filename().string();
  write_manifest(manifest_for(out), "fundamental", spec_to_node(spec), opts, cfg, {out});

  const double tail = 0.25;
  fmt::print("samples: {}\n", fd.size());
  try {
    fmt::print("chi_bar_max estimate: {:.6g}\n", estimate_max_lyapunov(fd, tail));
  } catch (const ValidationError& e) {
    fmt::print("chi_bar_max estimate: n/a ({})\n", e.what());
  }
  fmt::print("spectral floor: {:.6g}\n", spectral_floor(fd));
  fmt::print("mean k: {:.6g}\n", fd.k_bar.back());
  fmt::print("mean p: {:.6g}\n", fd.p_bar.back());
  fmt::print("wrote {}\n", out.string());
  return kOk;
}

int run_bound(const SystemSpec& spec, const BoundArgs& a, const IntegratorConfig& cfg) {
  if (static_cast<int>(a.x0.size()) != spec.dimension()) {
    throw DimensionError(fmt::format("--x0 has {} entries, system dimension is {}", a.x0.size(), spec.dimension()));
  }
  BoundRunOptions ro;
  if (a.envelope == "linear") {
    ro.nonlinear = false;
  } else if (a.envelope == "nonlinear") {
    ro.linear = false;
  } else if (a.envelope != "both") {
    throw ValidationError("--envelope must be linear, nonlinear or both");
  }
  const Eigen::VectorXd x0 = Eigen::Map<const Eigen::VectorXd>(a.x0.data(), static_cast<Eigen::Index>(a.x0.size()));
  const auto fd = analysis_fundamental(spec, spec.t0 + a.t_end, cfg);
  const auto run = run_bounds(spec, fd, x0, ro, cfg);

  const fs::path out(a.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_bounds_csv(out, fd.times, &run.actual_norm, run.linear ? &*run.linear : nullptr,
                   run.nonlinear ? &*run.nonlinear : nullptr);

  YAML::Node opts;
  YAML::Node xs(YAML::NodeType::Sequence);
  for (double v : a.x0) xs.push_back(v);
  xs.SetStyle(YAML::EmitterStyle::Flow);
  opts["x0"] = xs;
  opts["envelope"] = a.envelope;
  opts["t_end"] = a.t_end;
  opts["out"] = out.filename().string();
  write_manifest(manifest_for(out), "bound", spec_to_node(spec), opts, cfg, {out});

  auto report = [&](const char* label, const std::optional<BoundTrajectory>& b,
                    const std::optional<ComparisonReport>& r) {
    if (!b) return;
    std::size_t arg = 0;
    double best = 0.0;
    for (std::size_t i = 0; i < run.actual_norm.size(); ++i) {
      if (run.actual_norm[i] > 0.0 && std::isfinite(b->values[i]) && b->values[i] / run.actual_norm[i] > best) {
        best = b->values[i] / run.actual_norm[i];
        arg = i;
      }
    }
    fmt::print("{} bound: max violation {:.3g} ({}), max bound/actual {:.4g} at t = {:.6g}{}\n", label,
               r->max_violation, r->passed ? "dominates" : "VIOLATED", best, fd.times[arg],
               b->escaped ? fmt::format(", escapes at t = {:.6g}", *b->escape_time) : "");
  };
  if (run.linear) fmt::print("linear envelope l = {:.6g}\n", run.l);
  report("linear", run.linear, run.linear_report);
  report("nonlinear", run.nonlinear, run.nonlinear_report);
  if (run.linear && run.nonlinear) {
    fmt::print("crossover: {}\n", run.crossover.time ? fmt::format("t = {:.6g}", *run.crossover.time) : "none");
  }
  fmt::print("wrote {}\n", out.string());
  return kOk;
}

int run_attractor_cmd(const SystemSpec& spec, const AttractorArgs& a, const IntegratorConfig& cfg) {
  AttractorRunOptions opts;
  opts.horizon = a.horizon;
  if (a.window > 0.0) opts.window = a.window;
  opts.probe_options.horizon = a.probe_horizon;
  if (a.method != "all") {
    opts.sup = a.method == "sup";
    opts.avg = a.method == "avg";
    opts.numeric = a.method == "numeric";
    opts.probe = a.method == "probe";
    if (!(opts.sup || opts.avg || opts.numeric || opts.probe)) {
      throw ValidationError("--method must be sup, avg, numeric, probe or all");
    }
  }
  for (const auto& d : a.directions) {
    const auto v = parse_vector(d);
    if (static_cast<int>(v.size()) != spec.dimension()) throw DimensionError("--direction dimension mismatch");
    opts.directions.push_back(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
  }
  const auto run = run_attractor(spec, opts, cfg);
  const fs::path dir(a.out_dir);
  const auto files = write_attractor_outputs(run, spec, dir, "attractor", a.polyline, opts, cfg);

  YAML::Node o;
  o["method"] = a.method;
  YAML::Node ds(YAML::NodeType::Sequence);
  for (const auto& d : a.directions) ds.push_back(d);
  o["directions"] = ds;
  o["horizon"] = a.horizon;
  o["window"] = a.window;
  o["probe_horizon"] = a.probe_horizon;
  o["polyline"] = a.polyline;
  write_manifest(dir / "attractor.manifest.yaml", "attractor", spec_to_node(spec), o, cfg, files);

  for (const auto& line : attractor_summary(run)) fmt::print("{}\n", line);
  for (const auto& f : files) fmt::print("wrote {}\n", f.string());
  const bool finite = analytic_radius(run) || run.numeric;
  if (!finite && (opts.sup || opts.avg || opts.numeric)) {
    fmt::print("no finite estimate\n");
    return kInconclusive;
  }
  return kOk;
}

int run_figure_cmd(const FigureArgs& a, const IntegratorConfig& cfg) {
  const auto preset = figure_preset(a.name);
  const fs::path dir(a.out_dir);
  const auto res = run_figure(a.name, dir, cfg);
  YAML::Node o;
  o["name"] = a.name;
  write_manifest(dir / (a.name + ".manifest.yaml"), "figure", spec_to_node(vdp_preset(preset.params)), o, cfg,
                 res.outputs, preset.assumptions);
  for (const auto& line : res.summary) fmt::print("{}\n", line);
  for (const auto& f : res.outputs) fmt::print("wrote {}\n", f.string());
  return res.conclusive ? kOk : kInconclusive;
}

int run_replay(const std::string& manifest_path, const std::string& out_dir) {
  if (!fs::exists(manifest_path)) throw ConfigError(manifest_path, "manifest not found");
  const YAML::Node m = YAML::LoadFile(manifest_path);
  if (!m["command"] || !m["options"] || !m["integrator"]) throw ConfigError(manifest_path, "incomplete manifest");
  const auto command = m["command"].as<std::string>();
  const auto cfg = integrator_from_node(m["integrator"]).config();
  const auto& o = m["options"];
  const fs::path dir = out_dir.empty() ? fs::path(manifest_path).parent_path() : fs::path(out_dir);
  if (command == "figure") {
    return run_figure_cmd({o["name"].as<std::string>(), dir.string()}, cfg);
  }
  const auto spec = spec_from_node(m["config"]);
  if (command == "fundamental") {
    FundamentalArgs a;
    a.normalization = o["normalization"].as<std::string>();
    a.t_end = o["t_end"].as<double>();
    a.out = (dir / o["out"].as<std::string>()).string();
    return run_fundamental(spec, a, cfg);
  }
  if (command == "bound") {
    BoundArgs a;
    a.x0 = o["x0"].as<std::vector<double>>();
    a.envelope = o["envelope"].as<std::string>();
    a.t_end = o["t_end"].as<double>();
    a.out = (dir / o["out"].as<std::string>()).string();
    return run_bound(spec, a, cfg);
  }
  if (command == "attractor") {
    AttractorArgs a;
    a.method = o["method"].as<std::string>();
    a.directions = o["directions"].as<std::vector<std::string>>();
    a.horizon = o["horizon"].as<double>();
    a.window = o["window"].as<double>();
    a.probe_horizon = o["probe_horizon"].as<double>();
    a.polyline = o["polyline"].as<int>();
    a.out_dir = dir.string();
    return run_attractor_cmd(spec, a, cfg);
  }
  throw ConfigError("command", "unknown command '" + command + "'");
}

void add_integrator_flags(CLI::App* app, IntegratorArgs& ia) {
  app->add_option("--rel-tol", ia.rel_tol, "relative tolerance")->capture_default_str();
  app->add_option("--abs-tol", ia.abs_tol, "absolute tolerance")->capture_default_str();
  app->add_option("--step", ia.step, "output grid step")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Norm bounds and attractor estimates for nonlinear time-varying ODEs"};
  app.require_subcommand(1);

  IntegratorArgs ia;
  FundamentalArgs fa;
  BoundArgs ba;
  std::string x0_text;
  AttractorArgs aa;
  FigureArgs ga;
  std::string manifest, replay_dir;

  auto* fund = app.add_subcommand("fundamental", "fundamental matrix coefficients p, k and their averages");
  fund->add_option("config", fa.config, "system configuration (YAML)")->required();
  fund->add_option("--normalization", fa.normalization, "identity | frozen")->capture_default_str();
  fund->add_option("--t-end", fa.t_end, "horizon length")->capture_default_str();
  fund->add_option("--out", fa.out, "output CSV")->capture_default_str();
  add_integrator_flags(fund, ia);

  auto* bound = app.add_subcommand("bound", "solution norm and its upper bounds");
  bound->add_option("config", ba.config, "system configuration (YAML)")->required();
  bound->add_option("--x0", x0_text, "initial state, comma separated")->required();
  bound->add_option("--envelope", ba.envelope, "linear | nonlinear | both")->capture_default_str();
  bound->add_option("--t-end", ba.t_end, "horizon length")->capture_default_str();
  bound->add_option("--out", ba.out, "output CSV")->capture_default_str();
  add_integrator_flags(bound, ia);

  auto* attr = app.add_subcommand("attractor", "trapping region and stability basin estimates");
  attr->add_option("config", aa.config, "system configuration (YAML)")->required();
  attr->add_option("--method", aa.method, "sup | avg | numeric | probe | all")->capture_default_str();
  attr->add_option("--direction", aa.directions, "probe direction, comma separated (repeatable)");
  attr->add_option("--horizon", aa.horizon, "analysis horizon")->capture_default_str();
  attr->add_option("--window", aa.window, "averaging window (0: default)")->capture_default_str();
  attr->add_option("--probe-horizon", aa.probe_horizon, "full-system probe horizon")->capture_default_str();
  attr->add_option("--polyline", aa.polyline, "boundary points for 2-D systems (0: none)")->capture_default_str();
  attr->add_option("--out-dir", aa.out_dir, "output directory")->capture_default_str();
  add_integrator_flags(attr, ia);

  auto* fig = app.add_subcommand("figure", "reproduce a benchmark study");
  fig->add_option("name", ga.name, "fig1 | fig2.1 | fig2.2 | fig3.1 | fig3.2 | fig3.3 | fig4")->required();
  fig->add_option("--out-dir", ga.out_dir, "output directory")->capture_default_str();
  add_integrator_flags(fig, ia);

  auto* rep = app.add_subcommand("replay", "re-run a command from its manifest");
  rep->add_option("manifest", manifest, "manifest written by a previous run")->required();
  rep->add_option("--out-dir", replay_dir, "directory for the regenerated outputs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    const auto cfg = ia.config();
    if (*fund) return run_fundamental(load_spec(fa.config), fa, cfg);
    if (*bound) {
      ba.x0 = parse_vector(x0_text);
      return run_bound(load_spec(ba.config), ba, cfg);
    }
    if (*attr) return run_attractor_cmd(load_spec(aa.config), aa, cfg);
    if (*fig) return run_figure_cmd(ga, cfg);
    if (*rep) return run_replay(manifest, replay_dir);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const UnsupportedError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const YAML::Exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const Error& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  }
  return kUsage;
}
