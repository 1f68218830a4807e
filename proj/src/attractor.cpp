#include "nlbound/attractor.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numbers>
#include <thread>

#include <Eigen/LU>
#include <fmt/format.h>

#include "nlbound/csv.hpp"
#include "nlbound/error.hpp"

namespace nlbound {

double FrozenCoefficients::l(double x) const {
  double v = 0.0;
  for (const auto& t : l_hat) v += t.coefficient * (t.exponent == 1.0 ? x : std::pow(x, t.exponent));
  return v;
}

double FrozenCoefficients::q(double x) const { return p_hat * x + k_hat * l(x) + k_hat * f_hat; }

double FrozenCoefficients::dq(double x) const {
  double dl = 0.0;
  for (const auto& t : l_hat) dl += t.coefficient * t.exponent * std::pow(x, t.exponent - 1.0);
  return p_hat + k_hat * dl;
}

FrozenCoefficients freeze_sup(const FundamentalData& fd, const LipschitzEnvelope& envelope,
                              const std::vector<double>& forcing_norm) {
  if (fd.size() == 0) throw ValidationError("empty coefficient grid");
  FrozenCoefficients fc;
  fc.provenance = Provenance::Supremum;
  fc.p_hat = *std::max_element(fd.p.begin(), fd.p.end());
  fc.k_hat = *std::max_element(fd.k.begin(), fd.k.end());
  for (const auto& term : envelope.terms()) fc.l_hat.push_back({term.coefficient_bound(), term.exponent});
  fc.f_hat = forcing_norm.empty() ? 0.0 : *std::max_element(forcing_norm.begin(), forcing_norm.end());
  return fc;
}

namespace {

std::size_t last_index_within(const std::vector<double>& times, double t) {
  const double tol = 1e-9 * std::max(1.0, std::abs(t));
  auto it = std::upper_bound(times.begin(), times.end(), t + tol);
  return static_cast<std::size_t>(it - times.begin()) - 1;
}

double trapezoid_mean(const std::vector<double>& v, const std::vector<double>& times, std::size_t last) {
  double acc = 0.0;
  for (std::size_t i = 1; i <= last; ++i) acc += 0.5 * (times[i] - times[i - 1]) * (v[i] + v[i - 1]);
  return acc / (times[last] - times[0]);
}

bool close_means(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale < 1e-12 || std::abs(a - b) <= 0.01 * scale;
}

}  // namespace

FrozenCoefficients freeze_avg(const FundamentalData& fd, const LipschitzEnvelope& envelope,
                              const std::vector<double>& forcing_norm, double window) {
  if (fd.size() < 3) throw ValidationError("averaging needs at least three samples");
  const double span = fd.times.back() - fd.t0();
  if (!(window > 0.0)) throw ValidationError("averaging window must be positive");
  if (window > span * (1.0 + 1e-9)) {
    throw ValidationError(fmt::format("averaging window {} exceeds the computed horizon {}", window, span));
  }
  const std::size_t full = last_index_within(fd.times, fd.t0() + window);
  const std::size_t half = last_index_within(fd.times, fd.t0() + 0.5 * window);
  if (half < 1) throw ValidationError("averaging window shorter than two grid steps");

  FrozenCoefficients fc;
  fc.provenance = Provenance::Average;
  fc.window = fd.times[full] - fd.t0();
  bool converged = true;
  auto mean = [&](const std::vector<double>& v) {
    const double m = trapezoid_mean(v, fd.times, full);
    converged = converged && close_means(m, trapezoid_mean(v, fd.times, half));
    return m;
  };
  fc.p_hat = mean(fd.p);
  fc.k_hat = mean(fd.k);
  std::vector<double> c(fd.size());
  for (const auto& term : envelope.terms()) {
    for (std::size_t i = 0; i < fd.size(); ++i) c[i] = term.coefficient(fd.times[i]);
    fc.l_hat.push_back({mean(c), term.exponent});
  }
  if (!forcing_norm.empty()) {
    if (forcing_norm.size() != fd.size()) throw DimensionError("forcing norm series does not match the grid");
    fc.f_hat = mean(forcing_norm);
  }
  fc.converged = converged;
  return fc;
}

double default_averaging_window(const SystemSpec& spec, double horizon) {
  double slowest = 0.0;
  for (const auto& f : spec.forcing) {
    for (const auto& h : f.terms()) {
      if (h.frequency != 0.0 && h.amplitude != 0.0) {
        const double w = std::abs(h.frequency);
        slowest = slowest == 0.0 ? w : std::min(slowest, w);
      }
    }
  }
  double window = 200.0;
  if (slowest > 0.0) window = std::max(window, 20.0 * 2.0 * std::numbers::pi / slowest);
  return std::min(horizon, window);
}

std::string to_string(RootClass c) {
  switch (c) {
    case RootClass::Stable: return "stable";
    case RootClass::Unstable: return "unstable";
    case RootClass::Semistable: return "semistable";
  }
  return "?";
}

double default_scan_ceiling(const FrozenCoefficients& frozen) {
  double scale = 0.0;
  double linear = frozen.p_hat;
  for (const auto& t : frozen.l_hat) {
    if (t.exponent == 1.0) {
      linear += frozen.k_hat * t.coefficient;
    } else if (t.coefficient > 0.0 && frozen.p_hat != 0.0) {
      scale = std::max(scale, std::pow(std::abs(frozen.p_hat) / t.coefficient, 1.0 / (t.exponent - 1.0)));
    }
  }
  if (scale == 0.0 && linear < 0.0 && frozen.f_hat > 0.0) scale = frozen.k_hat * frozen.f_hat / -linear;
  return scale > 0.0 ? 10.0 * scale : 10.0;
}

namespace {

constexpr double kTangencyTol = 1e-8;

int sign(double v) { return (v > 0.0) - (v < 0.0); }

double bisect_root(const FrozenCoefficients& fc, double lo, double hi) {
  const int s_lo = sign(fc.q(lo));
  for (int it = 0; it < 200 && hi - lo > 4.0 * std::numeric_limits<double>::epsilon() * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    const int s = sign(fc.q(mid));
    if (s == 0) return mid;
    (s == s_lo ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// Minimizes s * Q on [a, b] by golden section.
double golden_minimum(const FrozenCoefficients& fc, double a, double b, int s) {
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc_ = s * fc.q(c), fd_ = s * fc.q(d);
  for (int it = 0; it < 200 && (b - a) > 1e-15 * b; ++it) {
    if (fc_ < fd_) {
      b = d;
      d = c;
      fd_ = fc_;
      c = b - g * (b - a);
      fc_ = s * fc.q(c);
    } else {
      a = c;
      c = d;
      fc_ = fd_;
      d = a + g * (b - a);
      fd_ = s * fc.q(d);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace

RootSet find_roots(const FrozenCoefficients& frozen, double x_max) {
  if (!(x_max > 0.0) || !std::isfinite(x_max)) throw ValidationError("scan ceiling must be positive and finite");
  constexpr int kPoints = 600;
  std::vector<double> xs;
  xs.reserve(2 * kPoints);
  const double x_min = 1e-8 * x_max;
  for (int i = 0; i < kPoints; ++i) {
    xs.push_back(x_min * std::pow(x_max / x_min, static_cast<double>(i) / (kPoints - 1)));
    xs.push_back(x_max * static_cast<double>(i + 1) / kPoints);
  }
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  std::vector<double> qs(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) qs[i] = frozen.q(xs[i]);

  struct Found {
    double x;
    RootClass cls;
  };
  std::vector<Found> found;
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
    const int a = sign(qs[i]), b = sign(qs[i + 1]);
    if (a == 0) {
      const int before = i > 0 ? sign(qs[i - 1]) : -b;
      if (before == b) {
        found.push_back({xs[i], RootClass::Semistable});
      } else {
        found.push_back({xs[i], before > 0 ? RootClass::Stable : RootClass::Unstable});
      }
    } else if (b != 0 && a != b) {
      found.push_back({bisect_root(frozen, xs[i], xs[i + 1]), a > 0 ? RootClass::Stable : RootClass::Unstable});
    } else if (b != 0 && i > 0 && sign(qs[i - 1]) == a && std::abs(qs[i]) <= std::abs(qs[i - 1]) &&
               std::abs(qs[i]) <= std::abs(qs[i + 1])) {
      const double x = golden_minimum(frozen, xs[i - 1], xs[i + 1], a);
      const double qx = frozen.q(x);
      if (std::abs(qx) <= kTangencyTol * (1.0 + std::abs(frozen.p_hat) * x)) {
        if (sign(qx) != a && sign(qx) != 0) {
          // The minimum dips across zero: two close simple roots.
          found.push_back({bisect_root(frozen, xs[i - 1], x), a > 0 ? RootClass::Stable : RootClass::Unstable});
          found.push_back({bisect_root(frozen, x, xs[i + 1]), a > 0 ? RootClass::Unstable : RootClass::Stable});
        } else {
          found.push_back({x, RootClass::Semistable});
        }
      }
    }
  }
  if (sign(qs.back()) == 0 && xs.size() > 1) {
    found.push_back({xs.back(), sign(qs[xs.size() - 2]) > 0 ? RootClass::Stable : RootClass::Unstable});
  }

  std::sort(found.begin(), found.end(), [](const Found& a, const Found& b) { return a.x < b.x; });
  RootSet out;
  out.x_max = x_max;
  for (const auto& f : found) {
    if (!out.roots.empty() && f.x - out.roots.back() <= 1e-9 * f.x) continue;
    out.roots.push_back(f.x);
    out.classes.push_back(f.cls);
  }
  return out;
}

std::string to_string(Method m) {
  switch (m) {
    case Method::Frozen: return "frozen";
    case Method::Averaged: return "averaged";
    case Method::NumericSplitting: return "numeric-splitting";
  }
  return "?";
}

std::string to_string(TheoremCase c) {
  switch (c) {
    case TheoremCase::Thm3Case1: return "Thm3-case1";
    case TheoremCase::Thm3Case2: return "Thm3-case2";
    case TheoremCase::Thm4Case1: return "Thm4-case1";
    case TheoremCase::Thm4Case2: return "Thm4-case2";
    case TheoremCase::Thm5Case1: return "Thm5-case1";
    case TheoremCase::Thm5Case2: return "Thm5-case2";
    case TheoremCase::Thm5Case3: return "Thm5-case3";
    case TheoremCase::Cor5Case1: return "Cor5-case1";
    case TheoremCase::Cor5Case2: return "Cor5-case2";
    case TheoremCase::Growth: return "growth";
    case TheoremCase::Uncatalogued: return "uncatalogued";
  }
  return "?";
}

std::string to_string(RegionRole r) {
  switch (r) {
    case RegionRole::StabilityBasin: return "stability-basin";
    case RegionRole::Trapping: return "trapping";
    case RegionRole::AsymptoticLevel: return "asymptotic-level";
  }
  return "?";
}

std::string to_string(ProbeCriterion c) {
  return c == ProbeCriterion::DecaysToZero ? "decays" : "bounded";
}

std::optional<double> AttractorReport::region_radius() const {
  std::optional<double> best;
  for (const auto& r : radii) {
    if (r.role == RegionRole::AsymptoticLevel) continue;
    if (!best || r.radius > *best) best = r.radius;
  }
  return best;
}

bool AttractorReport::basin_claim() const {
  return std::any_of(radii.begin(), radii.end(),
                     [](const RegionRadius& r) { return r.role == RegionRole::StabilityBasin; });
}

AttractorReport classify_report(const RootSet& roots, const FrozenCoefficients& frozen, double mu) {
  if (roots.roots.size() != roots.classes.size()) throw ValidationError("root and classification counts differ");
  if (!(mu >= 0.0)) throw ValidationError("mu must be non-negative");
  const bool averaged = frozen.provenance == Provenance::Average;
  if (!averaged && mu != 0.0) throw ValidationError("the mu margin applies to averaged coefficients only");
  for (std::size_t i = 0; i < roots.size(); ++i) {
    const double d = roots.roots[i];
    if (!(d > 0.0) || (i > 0 && !(d > roots.roots[i - 1]))) throw ValidationError("roots must be positive and ascending");
    const double tol = (roots.classes[i] == RootClass::Semistable ? kTangencyTol : 1e-9) *
                       (1.0 + std::abs(frozen.p_hat) * d);
    if (std::abs(frozen.q(d)) > tol) {
      throw ValidationError(fmt::format("root {} does not solve Q (residual {})", d, frozen.q(d)));
    }
  }

  AttractorReport r;
  r.method = averaged ? Method::Averaged : Method::Frozen;
  r.frozen = frozen;
  r.roots = roots;
  r.mu = mu;
  auto add = [&](RegionRole role, double level) {
    const double radius = role == RegionRole::AsymptoticLevel ? level + mu : level - mu;
    r.radii.push_back({role, level, radius, level + mu});
  };
  const auto n = roots.size();
  const auto cls = [&](std::size_t i) { return roots.classes[i]; };

  if (frozen.p_hat >= 0.0) {
    r.theorem = TheoremCase::Growth;
    r.verdict = "no finite estimate: p_hat >= 0 so Q >= 0";
  } else if (frozen.f_hat == 0.0) {
    if (n == 0) {
      if (frozen.q(roots.x_max) < 0.0) {
        r.theorem = averaged ? TheoremCase::Thm5Case1 : TheoremCase::Thm3Case1;
        r.ceiling_limited = true;
        add(RegionRole::StabilityBasin, roots.x_max);
        r.verdict = "Q < 0 up to the scan ceiling; basin radius limited by the ceiling";
      } else {
        r.theorem = TheoremCase::Growth;
        r.verdict = "no finite estimate: Q > 0 without a positive root";
      }
    } else if (n == 1 && cls(0) == RootClass::Unstable) {
      r.theorem = averaged ? TheoremCase::Thm5Case1 : TheoremCase::Thm3Case1;
      add(RegionRole::StabilityBasin, roots.roots[0]);
      r.verdict = "zero solution asymptotically stable; basin contains the ellipsoid";
    } else if (n == 1 && cls(0) == RootClass::Stable) {
      r.theorem = averaged ? TheoremCase::Thm5Case1 : TheoremCase::Thm3Case2;
      add(RegionRole::Trapping, roots.roots[0]);
      add(RegionRole::AsymptoticLevel, roots.roots[0]);
      r.verdict = "trapping region with limsup bound";
    } else if (n == 1) {
      r.theorem = averaged ? TheoremCase::Thm5Case3 : TheoremCase::Thm4Case2;
      add(RegionRole::Trapping, roots.roots[0]);
      r.verdict = "repeated root; trapping region";
    } else {
      r.theorem = TheoremCase::Uncatalogued;
      r.verdict = fmt::format("{} roots; outside the catalogued cases", n);
    }
  } else {
    if (n == 0) {
      r.theorem = TheoremCase::Growth;
      r.verdict = "no finite estimate: Q > 0 on the scan range";
    } else if (n == 2 && cls(0) == RootClass::Stable && cls(1) == RootClass::Unstable) {
      r.theorem = averaged ? TheoremCase::Thm5Case2 : TheoremCase::Thm4Case1;
      add(RegionRole::Trapping, roots.roots[1]);
      add(RegionRole::AsymptoticLevel, roots.roots[0]);
      r.verdict = "trapping region with limsup bound at the lower root";
    } else if (n == 1 && cls(0) == RootClass::Semistable) {
      r.theorem = averaged ? TheoremCase::Thm5Case3 : TheoremCase::Thm4Case2;
      add(RegionRole::Trapping, roots.roots[0]);
      r.verdict = "repeated root; trapping region";
    } else if (n == 1 && cls(0) == RootClass::Stable) {
      r.theorem = averaged ? TheoremCase::Thm5Case2 : TheoremCase::Thm4Case1;
      r.ceiling_limited = true;
      add(RegionRole::Trapping, roots.x_max);
      add(RegionRole::AsymptoticLevel, roots.roots[0]);
      r.verdict = "no unstable root below the scan ceiling; trapping radius limited by the ceiling";
    } else {
      r.theorem = TheoremCase::Uncatalogued;
      r.verdict = fmt::format("{} roots; outside the catalogued cases", n);
    }
  }

  r.conclusive = !r.radii.empty();
  for (const auto& rad : r.radii) {
    if (rad.role != RegionRole::AsymptoticLevel && rad.radius < 0.0) {
      r.conclusive = false;
      r.verdict = fmt::format("inconclusive: level {} minus mu {} is negative", rad.level, mu);
    }
  }
  return r;
}

MuEstimate estimate_mu(const FundamentalData& fd, const LipschitzEnvelope& envelope,
                       const std::vector<double>& forcing_norm, double d, RootClass cls, const MuOptions& opts,
                       const IntegratorConfig& cfg) {
  if (!(d > 0.0)) throw ValidationError("mu needs a positive level");
  if (fd.size() < 2) throw ValidationError("coefficient grid needs at least two samples");
  const double span = fd.times.back() - fd.t0();
  if (!(opts.horizon > 0.0) || opts.horizon > span * (1.0 + 1e-9)) {
    throw ValidationError(fmt::format("mu horizon {} outside the computed span {}", opts.horizon, span));
  }
  const std::size_t last = last_index_within(fd.times, fd.t0() + opts.horizon);
  const double t_end = fd.times[last];
  const double horizon = t_end - fd.t0();
  const double transient = opts.transient.value_or(0.1 * horizon);
  if (!(transient >= 0.0 && transient < horizon)) throw ValidationError("transient must lie inside the horizon");

  ComparisonEquation eq(fd, envelope, forcing_norm);
  IntegratorConfig local = cfg;
  local.output_step = fd.step();
  local.stop_at_grid = true;

  MuEstimate out;
  const bool backward = cls == RootClass::Unstable;
  StateRhs rhs;
  if (backward) {
    rhs = [&eq, t_end](double s, const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
      dy.resize(1);
      dy[0] = -eq(t_end - s, y[0]);
    };
    out.window_start = fd.t0();
    out.window_end = t_end - transient;
  } else {
    rhs = [&eq](double t, const Eigen::VectorXd& x, Eigen::VectorXd& dx) {
      dx.resize(1);
      dx[0] = eq(t, x[0]);
    };
    out.window_start = fd.t0() + transient;
    out.window_end = t_end;
  }
  const double start = backward ? 0.0 : fd.t0();
  Trajectory traj;
  try {
    traj = integrate_ivp(rhs, start, Eigen::VectorXd::Constant(1, d), start + horizon, local);
  } catch (const IntegrationError&) {
    out.reliable = false;
    out.value = kUnbounded;
    return out;
  }
  double sup = 0.0;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const double elapsed = traj.times[i] - start;
    if (elapsed < transient - 1e-9) continue;
    const double x = traj.states[i][0];
    if (!(x > 0.0)) out.reliable = false;
    sup = std::max(sup, std::abs(x - d));
  }
  if (traj.escaped() || traj.size() < last + 1) out.reliable = false;
  out.value = sup;
  return out;
}

namespace {

bool comparison_criterion(const FundamentalData& fd, const LipschitzEnvelope& envelope,
                          const std::vector<double>& forcing_norm, double x0, double horizon,
                          ProbeCriterion criterion, const IntegratorConfig& cfg) {
  const auto r = auxiliary_solve(fd, envelope, forcing_norm, x0, cfg, horizon);
  if (r.escaped) return false;
  if (criterion == ProbeCriterion::StaysBounded) return true;
  return r.values.back() < 1e-3 * x0;
}

}  // namespace

SplittingResult splitting_value_search(const FundamentalData& fd, const LipschitzEnvelope& envelope,
                                       const std::vector<double>& forcing_norm, double x_lo, double x_hi,
                                       double horizon, ProbeCriterion criterion, const IntegratorConfig& cfg,
                                       double resolution) {
  if (!(x_lo > 0.0) || !(x_hi > x_lo)) throw ValidationError("splitting bracket must satisfy 0 < lo < hi");
  const double span = fd.times.back() - fd.t0();
  if (!(horizon > 0.0) || horizon > span * (1.0 + 1e-9)) throw ValidationError("horizon outside the computed span");

  SplittingResult out;
  auto ok = [&](double x0) {
    ++out.evaluations;
    return comparison_criterion(fd, envelope, forcing_norm, x0, horizon, criterion, cfg);
  };

  constexpr int kScan = 9;
  std::vector<double> xs(kScan);
  std::vector<bool> res(kScan);
  for (int i = 0; i < kScan; ++i) {
    xs[i] = x_lo + (x_hi - x_lo) * i / (kScan - 1);
    res[i] = ok(xs[i]);
  }
  auto diagnostics = [&] {
    std::string s;
    for (int i = 0; i < kScan; ++i) s += fmt::format(" {:.6g}:{}", xs[i], res[i] ? "holds" : "fails");
    return s;
  };
  if (!res.front() || res.back()) {
    throw BracketError(fmt::format("criterion '{}' must hold at {} and fail at {};{}", to_string(criterion), x_lo,
                                   x_hi, diagnostics()));
  }
  int switch_at = -1;
  for (int i = 1; i < kScan; ++i) {
    if (res[i] != res[i - 1]) {
      if (switch_at >= 0) {
        throw BracketError(fmt::format("criterion '{}' is not monotone across the bracket;{}",
                                       to_string(criterion), diagnostics()));
      }
      switch_at = i;
    }
  }
  double lo = xs[switch_at - 1], hi = xs[switch_at];
  while (hi - lo > resolution * hi) {
    const double mid = 0.5 * (lo + hi);
    (ok(mid) ? lo : hi) = mid;
  }
  out.value = lo;
  out.lo = lo;
  out.hi = hi;
  return out;
}

AttractorReport splitting_report(const SplittingResult& result, ProbeCriterion criterion) {
  AttractorReport r;
  r.method = Method::NumericSplitting;
  r.splitting_value = result.value;
  const bool decays = criterion == ProbeCriterion::DecaysToZero;
  r.theorem = decays ? TheoremCase::Cor5Case1 : TheoremCase::Cor5Case2;
  const auto role = decays ? RegionRole::StabilityBasin : RegionRole::Trapping;
  r.radii.push_back({role, result.value, result.value, result.value});
  r.conclusive = true;
  r.verdict = decays ? "comparison solutions decay below the splitting level"
                     : "comparison solutions stay bounded below the splitting level";
  return r;
}

double EllipsoidSpec::intercept(const Eigen::VectorXd& e) const {
  if (e.size() != w_inv.cols()) throw DimensionError("direction dimension mismatch");
  const double n = e.norm();
  if (!(n > 0.0)) throw ValidationError("direction must be non-zero");
  return radius / (w_inv * (e / n)).norm();
}

EllipsoidSpec map_to_ellipsoid(const Eigen::MatrixXd& w0, double t0, double radius) {
  if (!(radius > 0.0)) throw ValidationError("ellipsoid radius must be positive");
  if (w0.rows() != w0.cols()) throw DimensionError("W(t0) must be square");
  Eigen::FullPivLU<Eigen::MatrixXd> lu(w0);
  if (!lu.isInvertible()) throw DegeneracyError("W(t0) is singular");
  return EllipsoidSpec{t0, lu.inverse(), radius};
}

EllipsoidSpec map_to_ellipsoid(const FundamentalData& fd, double radius) {
  if (fd.w.empty()) throw DegeneracyError("fundamental matrix samples unavailable");
  return map_to_ellipsoid(fd.w0(), fd.t0(), radius);
}

ProbeResult direct_basin_probe(const SystemSpec& spec, const Eigen::VectorXd& direction,
                               ProbeCriterion criterion, const ProbeOptions& opts, const IntegratorConfig& cfg) {
  spec.validate();
  if (direction.size() != spec.dimension()) throw DimensionError("probe direction dimension mismatch");
  if (!(direction.norm() > 0.0)) throw ValidationError("probe direction must be non-zero");
  if (!(opts.lo > 0.0) || !(opts.hi > opts.lo)) throw ValidationError("probe bracket must satisfy 0 < lo < hi");
  if (!(opts.horizon > 0.0)) throw ValidationError("probe horizon must be positive");
  const Eigen::VectorXd e = direction.normalized();

  IntegratorConfig local = cfg;
  local.output_step = opts.horizon;
  local.escape_radius = opts.escape_radius;
  local.stop_at_grid = false;
  StateRhs rhs = [&spec](double t, const Eigen::VectorXd& x, Eigen::VectorXd& dx) { eval_rhs(spec, t, x, dx); };

  ProbeResult out;
  auto ok = [&](double s) {
    ++out.evaluations;
    const Eigen::VectorXd x0 = s * e;
    Trajectory traj;
    try {
      traj = integrate_ivp(rhs, spec.t0, x0, spec.t0 + opts.horizon, local);
    } catch (const IntegrationError&) {
      return false;
    }
    if (traj.escaped()) return false;
    if (criterion == ProbeCriterion::StaysBounded) return true;
    return traj.states.back().norm() < 1e-3 * s;
  };

  if (!ok(opts.lo)) {
    throw BracketError(fmt::format("criterion '{}' fails at the probe floor {}", to_string(criterion), opts.lo));
  }
  if (ok(opts.hi)) {
    out.value = opts.hi;
    out.ceiling = true;
    return out;
  }
  double lo = opts.lo, hi = opts.hi;
  while (hi - lo > opts.resolution * hi) {
    const double mid = 0.5 * (lo + hi);
    (ok(mid) ? lo : hi) = mid;
  }
  out.value = lo;
  return out;
}

std::vector<PolylinePoint> ellipsoid_polyline(const EllipsoidSpec& ellipsoid, int count) {
  if (ellipsoid.w_inv.rows() != 2) throw UnsupportedError("boundary polylines are defined for 2-D systems");
  if (count < 3) throw ValidationError("polyline needs at least three points");
  std::vector<PolylinePoint> out;
  for (int j = 0; j < count; ++j) {
    const double a = 2.0 * std::numbers::pi * j / count;
    out.push_back({a, ellipsoid.intercept(Eigen::Vector2d(std::cos(a), std::sin(a)))});
  }
  return out;
}

std::vector<PolylinePoint> probe_polyline(const SystemSpec& spec, ProbeCriterion criterion, int count,
                                          const ProbeOptions& opts, const IntegratorConfig& cfg) {
  if (spec.dimension() != 2) throw UnsupportedError("boundary polylines are defined for 2-D systems");
  if (count < 3) throw ValidationError("polyline needs at least three points");
  std::vector<PolylinePoint> out(count);
  const unsigned workers = std::max(1u, std::thread::hardware_concurrency());
  for (int begin = 0; begin < count; begin += static_cast<int>(workers)) {
    const int end = std::min(count, begin + static_cast<int>(workers));
    std::vector<std::future<double>> jobs;
    for (int j = begin; j < end; ++j) {
      const double a = 2.0 * std::numbers::pi * j / count;
      out[j].angle = a;
      jobs.push_back(std::async(std::launch::async, [&spec, criterion, &opts, &cfg, a] {
        try {
          return direct_basin_probe(spec, Eigen::Vector2d(std::cos(a), std::sin(a)), criterion, opts, cfg).value;
        } catch (const BracketError&) {
          return std::numeric_limits<double>::quiet_NaN();
        }
      }));
    }
    for (int j = begin; j < end; ++j) out[j].intercept = jobs[j - begin].get();
  }
  return out;
}

void write_polyline_csv(const std::filesystem::path& path, const std::vector<PolylinePoint>& points) {
  CsvWriter csv(path, {{"angle", "rad"}, {"intercept", "state"}});
  for (const auto& p : points) csv.row({p.angle, p.intercept});
}

void write_root_table(const std::filesystem::path& path, const std::vector<RootTableRow>& rows,
                      const std::vector<std::string>& direction_names) {
  std::vector<CsvColumn> cols{{"method", ""}, {"classification", ""}, {"level", "state"}, {"mu", "state"}};
  for (const auto& d : direction_names) cols.push_back({"intercept_" + d, "state"});
  CsvWriter csv(path, cols);
  for (const auto& r : rows) {
    if (r.intercepts.size() != direction_names.size()) throw DimensionError("intercepts do not match directions");
    std::vector<double> values{r.level, r.mu};
    values.insert(values.end(), r.intercepts.begin(), r.intercepts.end());
    csv.row({r.method, r.classification}, values);
  }
}

}  // namespace nlbound
