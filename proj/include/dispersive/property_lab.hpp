#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "dispersive/equation.hpp"
#include "dispersive/function_spaces.hpp"
#include "dispersive/initial_data.hpp"
#include "dispersive/timestepping.hpp"

namespace dispersive::lab {

enum class Trend { stable, growing, shrinking };
enum class Outcome { pass, fail, inconclusive };

inline std::string to_string(Trend t) {
  switch (t) {
    case Trend::stable: return "stable";
    case Trend::growing: return "growing";
    case Trend::shrinking: return "shrinking";
  }
  return "unknown";
}

inline std::string to_string(Outcome o) {
  switch (o) {
    case Outcome::pass: return "pass";
    case Outcome::fail: return "fail";
    case Outcome::inconclusive: return "inconclusive";
  }
  return "unknown";
}

/// Relative change tolerated between the base and the refined maximum.
inline constexpr double kStableBand = 0.2;

inline Trend classify_trend(double base, double refined) {
  if (refined > (1.0 + kStableBand) * base) return Trend::growing;
  if (refined < (1.0 - kStableBand) * base) return Trend::shrinking;
  return Trend::stable;
}

/// Ratios of the two sides of a "lhs <= C rhs" statement over a family, at a
/// base resolution and after one doubling.
struct RatioReport {
  std::string family_id;
  std::vector<std::string> members;
  std::vector<double> ratios;
  std::vector<double> refined_ratios;
  double max_ratio = 0.0;
  double refined_max_ratio = 0.0;
  Trend refinement_trend = Trend::stable;
  std::map<std::string, std::vector<double>> extras;  ///< per-member side data, e.g. dilation a

  double min_ratio() const { return ratios.empty() ? 0.0 : *std::min_element(ratios.begin(), ratios.end()); }
  double refined_min_ratio() const {
    return refined_ratios.empty() ? 0.0 : *std::min_element(refined_ratios.begin(), refined_ratios.end());
  }

  bool finite() const {
    auto ok = [](const std::vector<double>& v) {
      return std::all_of(v.begin(), v.end(), [](double r) { return std::isfinite(r) && r >= 0.0; });
    };
    return ok(ratios) && ok(refined_ratios) && !ratios.empty();
  }

  bool bounded_and_stable() const { return finite() && refinement_trend == Trend::stable; }
};

namespace detail {
inline RatioReport finish(RatioReport r) {
  if (r.ratios.empty()) throw std::invalid_argument("ratio family is empty");
  r.max_ratio = *std::max_element(r.ratios.begin(), r.ratios.end());
  r.refined_max_ratio = *std::max_element(r.refined_ratios.begin(), r.refined_ratios.end());
  r.refinement_trend = classify_trend(r.max_ratio, r.refined_max_ratio);
  return r;
}
}  // namespace detail

struct ExperimentReport {
  std::string name;
  std::map<std::string, std::string> parameters;
  Outcome outcome = Outcome::inconclusive;
  std::map<std::string, double> metrics;
  std::string note;
  std::uint64_t config_hash = 0;
};

/// Scalar function with a derivative, for composition operators.
struct ScalarFunction {
  std::string name;
  std::function<double(double)> f;
  std::function<double(double)> df;
};

namespace functions {
inline ScalarFunction identity() {
  return {"x", [](double x) { return x; }, [](double) { return 1.0; }};
}
inline ScalarFunction square() {
  return {"x^2", [](double x) { return x * x; }, [](double x) { return 2.0 * x; }};
}
inline ScalarFunction cube() {
  return {"x^3", [](double x) { return x * x * x; }, [](double x) { return 3.0 * x * x; }};
}
/// |x| x: in H^2_loc but not C^2.
inline ScalarFunction abs_times() {
  return {"|x|x", [](double x) { return std::abs(x) * x; }, [](double x) { return 2.0 * std::abs(x); }};
}
}  // namespace functions

inline ScalarFunction builtin_function(const std::string& name) {
  for (auto f : {functions::identity(), functions::square(), functions::cube(), functions::abs_times()})
    if (f.name == name) return f;
  throw std::invalid_argument("unknown composition function '" + name + "'; expected one of: x, x^2, x^3, |x|x");
}

/// Member of a test family: a function of x that can be sampled on any grid,
/// so refinement re-samples the same function.
struct FamilyMember {
  std::string label;
  std::function<double(double)> f;
};

/// Band-limited random fields with modes 1..kmax, amplitudes (1+k)^-decay and
/// sup-norms cycling through `sups`.
inline std::vector<FamilyMember> random_family(std::size_t count, int kmax, std::uint64_t seed,
                                               std::vector<double> sups = {1.0}, double decay = 1.0) {
  std::vector<FamilyMember> out;
  for (std::size_t i = 0; i < count; ++i) {
    const double sup = sups[i % sups.size()];
    auto poly = random_trig_polynomial(kmax, seed + i, sup, decay);
    out.push_back({"random#" + std::to_string(seed + i), [poly](double x) { return poly(x); }});
  }
  return out;
}

inline std::vector<FamilyMember> sine_family(int kmax) {
  std::vector<FamilyMember> out;
  for (int k = 1; k <= kmax; ++k)
    out.push_back({"sin(" + std::to_string(k) + "x)", [k](double x) { return std::sin(k * x); }});
  return out;
}

inline FamilyMember constant_member(double c) {
  return {"const", [c](double) { return c; }};
}

/// Sample count of a line box of half-width at least `min_half_width` with
/// spacing exactly dx.
inline std::size_t line_samples(double min_half_width, double dx) {
  auto half = static_cast<std::size_t>(std::ceil(min_half_width / dx - 1e-9));
  return 2 * std::max<std::size_t>(half, 4);
}

/// Periodic composition bound
///   ||f(g)||_{B^s_pq(T)} <~ ||(f phi_a)'||_{B^{s-1}_pq(R)} ||g|| (1 + ||g||)^{s-1-1/p},  a = ||g||_inf,
/// evaluated as lhs / rhs for every g at N and 2N (P = 1).
inline RatioReport check_composition_bound(const ScalarFunction& f, const std::vector<FamilyMember>& family,
                                           const BesovIndex& idx, std::size_t n = 256) {
  if (!(idx.s > 1.0 + 1.0 / idx.p))
    throw std::invalid_argument("check_composition_bound: needs s > 1 + 1/p");
  RatioReport report;
  report.family_id = "composition " + f.name;
  const BesovIndex lower = idx.with_s(idx.s - 1.0);
  auto ratio_at = [&](const FamilyMember& member, std::size_t size, double* dilation) {
    const auto grid = make_grid(size, 1);
    const auto g = RealField::sample(grid, member.f);
    const double a = g.max_abs();
    if (dilation) *dilation = a;
    if (a == 0.0) throw std::invalid_argument("check_composition_bound: zero member in family");
    RealField fg(grid);
    for (std::size_t j = 0; j < size; ++j) fg[j] = f.f(g[j]);
    const double lhs = besov_norm_torus(fg, idx);

    const CutoffFunction phi(a);
    const double reach = phi.support_radius();
    const std::size_t m = line_samples(reach + 2.0 * kLineShiftBound + 0.5, grid.dx());
    const double half_width = 0.5 * static_cast<double>(m) * grid.dx();
    const auto fphi_prime = LineField::sample(half_width, m, -reach, reach, [&](double x) {
      return f.df(x) * phi(x) + f.f(x) * phi.derivative(x);
    });
    const double gn = besov_norm_torus(g, idx);
    const double rhs = besov_norm_line(fphi_prime, lower) * gn * std::pow(1.0 + gn, idx.s - 1.0 - 1.0 / idx.p);
    return lhs / rhs;
  };
  std::vector<double> dilations;
  for (const auto& member : family) {
    double a = 0.0;
    report.members.push_back(member.label);
    report.ratios.push_back(ratio_at(member, n, &a));
    report.refined_ratios.push_back(ratio_at(member, 2 * n, nullptr));
    dilations.push_back(a);
  }
  report.extras["a"] = std::move(dilations);
  return detail::finish(std::move(report));
}

/// Localizing bound ||rho f||_{B^s_pq(R)} <~ ||f||_{B^s_pq(T)}, rho = phi_a. The
/// line box is [-2 pi m, 2 pi m) sampled with the torus spacing, so the
/// periodic extension of f is read off by index.
inline RatioReport check_localizing(const CutoffFunction& rho, const std::vector<FamilyMember>& family,
                                    const BesovIndex& idx, std::size_t n = 256) {
  RatioReport report;
  report.family_id = "localizing a=" + std::to_string(rho.dilation());
  const double period = 2.0 * std::numbers::pi;
  const auto periods = static_cast<std::size_t>(
      std::ceil((rho.support_radius() + 2.0 * kLineShiftBound) / period + 1e-12));
  auto ratio_at = [&](const FamilyMember& member, std::size_t size) {
    const auto grid = make_grid(size, 1);
    const auto f = RealField::sample(grid, member.f);
    const std::size_t m = 2 * periods * size;
    const double half_width = static_cast<double>(periods) * period;
    std::vector<double> values(m);
    for (std::size_t i = 0; i < m; ++i) {
      const double x = -half_width + static_cast<double>(i) * grid.dx();
      values[i] = rho(x) * f[i % size];
    }
    const LineField product(half_width, m, -rho.support_radius(), rho.support_radius(), std::move(values));
    return besov_norm_line(product, idx) / besov_norm_torus(f, idx);
  };
  for (const auto& member : family) {
    report.members.push_back(member.label);
    report.ratios.push_back(ratio_at(member, n));
    report.refined_ratios.push_back(ratio_at(member, 2 * n));
  }
  return detail::finish(std::move(report));
}

/// B^s_22 against H^s on the torus: ratio besov_norm_torus / sobolev_norm.
/// When `restricted_delta` is set the ratio is instead restricted-shift norm
/// over full-shift norm.
inline RatioReport check_norm_equivalence(const std::vector<FamilyMember>& family, double s, std::size_t n = 256,
                                          std::optional<double> restricted_delta = std::nullopt) {
  RatioReport report;
  const BesovIndex idx(s, 2.0, 2.0);
  report.family_id = (restricted_delta ? "restricted-h s=" : "B22/Hs s=") + std::to_string(s);
  auto ratio_at = [&](const FamilyMember& member, std::size_t size) {
    const auto u = RealField::sample(make_grid(size, 1), member.f);
    const double full = besov_norm_torus(u, idx);
    if (restricted_delta) return besov_norm_torus(u, idx, *restricted_delta) / full;
    return full / sobolev_norm(u, s);
  };
  for (const auto& member : family) {
    report.members.push_back(member.label);
    report.ratios.push_back(ratio_at(member, n));
    report.refined_ratios.push_back(ratio_at(member, 2 * n));
  }
  return detail::finish(std::move(report));
}

/// Norm equivalence holds on the family when the ratio interval [c1, c2] has
/// c2 / c1 <= 10 and both ends move by less than 20% under refinement.
inline bool equivalence_holds(const RatioReport& r) {
  if (!r.finite() || r.min_ratio() <= 0.0) return false;
  const bool narrow = r.max_ratio / r.min_ratio() <= 10.0;
  auto shift = [](double a, double b) { return std::abs(b - a) / a; };
  return narrow && shift(r.min_ratio(), r.refined_min_ratio()) < kStableBand &&
         shift(r.max_ratio, r.refined_max_ratio) < kStableBand;
}

inline ExperimentReport ratio_experiment(const std::string& name, const std::vector<RatioReport>& reports,
                                         bool equivalence = false) {
  ExperimentReport out;
  out.name = name;
  bool ok = true;
  for (const auto& r : reports) {
    out.metrics[r.family_id + " max_ratio"] = r.max_ratio;
    out.metrics[r.family_id + " refined_max_ratio"] = r.refined_max_ratio;
    if (equivalence) {
      out.metrics[r.family_id + " min_ratio"] = r.min_ratio();
      out.metrics[r.family_id + " refined_min_ratio"] = r.refined_min_ratio();
    }
    ok = ok && (equivalence ? equivalence_holds(r) : r.bounded_and_stable());
    if (!r.bounded_and_stable()) out.note += r.family_id + ": trend " + to_string(r.refinement_trend) + "; ";
  }
  out.outcome = ok ? Outcome::pass : Outcome::fail;
  return out;
}

namespace detail {
inline double max_sobolev_distance(const Trajectory& a, const Trajectory& b, double s) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.snapshots.size(); ++i) d = std::max(d, sobolev_norm(a.snapshots[i] - b.snapshots[i], s));
  return d;
}
}  // namespace detail

/// d(eps) = max over snapshots of ||u_eps(t) - u(t)||_{H^s} for u0 + eps w.
/// Passes when d(eps)/eps varies by at most a factor of 4 over the nonzero eps.
inline ExperimentReport run_continuous_dependence(const EvolutionProblem& prob, const std::vector<double>& eps_list,
                                                  const RealField& direction, const SolverConfig& cfg) {
  ExperimentReport out;
  out.name = "continuous_dependence";
  out.parameters["t_end"] = std::to_string(cfg.t_end);
  const auto base = evolve(prob, cfg);
  if (base.termination != Termination::completed) {
    out.note = "base run ended early: " + to_string(base.termination);
    return out;
  }
  std::vector<double> lipschitz;
  for (double eps : eps_list) {
    const auto run = evolve(prob.with_initial(prob.u0() + eps * direction), cfg);
    if (run.termination != Termination::completed) {
      out.note = "perturbed run ended early: " + to_string(run.termination);
      return out;
    }
    const double d = detail::max_sobolev_distance(run, base, prob.s_index());
    out.metrics["d(" + ::dispersive::detail::format_g(eps) + ")"] = d;
    if (eps != 0.0) {
      lipschitz.push_back(d / std::abs(eps));
      out.metrics["d/eps(" + ::dispersive::detail::format_g(eps) + ")"] = d / std::abs(eps);
    }
  }
  if (lipschitz.empty()) {
    out.outcome = Outcome::pass;
    return out;
  }
  const auto [lo, hi] = std::minmax_element(lipschitz.begin(), lipschitz.end());
  const double spread = *lo > 0.0 ? *hi / *lo : INFINITY;
  out.metrics["spread"] = spread;
  out.outcome = spread <= 4.0 ? Outcome::pass : Outcome::fail;
  return out;
}

inline constexpr double kBreakingGradientRatio = 50.0;
inline constexpr double kBreakingAmplitudeRatio = 2.0;

/// Wave breaking: gradient growth by at least 50x while the sup-norm grows by at
/// most 2x, before any resolution loss. The run stops at the 50x trigger.
inline ExperimentReport run_wave_breaking(const EvolutionProblem& prob, SolverConfig cfg) {
  ExperimentReport out;
  out.name = "wave_breaking";
  out.parameters["symbol"] = prob.symbol().name();
  cfg.blowup_gradient_factor = kBreakingGradientRatio;
  const auto traj = evolve(prob, cfg);
  out.metrics["gradient_ratio"] = traj.monitor.max_gradient_ratio;
  out.metrics["amplitude_ratio"] = traj.monitor.max_amplitude_ratio;
  out.metrics["final_time"] = traj.final_time;
  if (traj.monitor.trigger_time) out.metrics["breaking_time"] = *traj.monitor.trigger_time;
  out.parameters["termination"] = to_string(traj.termination);

  const bool steep = traj.monitor.max_gradient_ratio >= kBreakingGradientRatio;
  const bool bounded = traj.monitor.max_amplitude_ratio <= kBreakingAmplitudeRatio;
  if (traj.termination == Termination::resolution_lost) {
    out.outcome = Outcome::inconclusive;
    out.note = "resolution lost at t=" + std::to_string(traj.final_time) + " before breaking; try a larger N";
  } else if (steep && bounded) {
    out.outcome = Outcome::pass;
  } else {
    out.outcome = Outcome::fail;
    out.note = steep ? "sup-norm grew beyond x2" : "no breaking detected";
  }
  return out;
}

/// Empirical order of `method` from runs at each dt against a reference at
/// min(dt) / 4. Errors are max-norm differences at t_end.
inline ExperimentReport convergence_study(const EvolutionProblem& prob, Method method, std::vector<double> dts,
                                          double t_end, double declared_order = 4.0) {
  if (dts.size() < 4) throw std::invalid_argument("convergence_study: need at least 4 step sizes");
  std::sort(dts.begin(), dts.end(), std::greater<>());
  for (std::size_t i = 0; i + 1 < dts.size(); ++i)
    if (std::abs(dts[i] / dts[i + 1] - 2.0) > 1e-9)
      throw std::invalid_argument("convergence_study: step sizes must form a factor-2 sequence");
  ExperimentReport out;
  out.name = "convergence";
  out.parameters["method"] = to_string(method);
  auto run = [&](double dt) {
    SolverConfig cfg;
    cfg.method = method;
    cfg.dt = dt;
    cfg.t_end = t_end;
    cfg.snapshot_stride = std::numeric_limits<std::size_t>::max();
    return evolve(prob, cfg);
  };
  const auto reference = run(dts.back() / 4.0);
  if (reference.termination != Termination::completed) {
    out.note = "reference run ended early: " + to_string(reference.termination);
    return out;
  }
  std::vector<double> errors;
  for (double dt : dts) {
    const auto traj = run(dt);
    if (traj.termination != Termination::completed) {
      out.note = "run at dt=" + ::dispersive::detail::format_g(dt) + " ended early: " + to_string(traj.termination);
      return out;
    }
    errors.push_back((final_state(traj) - final_state(reference)).max_abs());
    out.metrics["error(" + ::dispersive::detail::format_g(dt) + ")"] = errors.back();
  }
  if (std::all_of(errors.begin(), errors.end(), [](double e) { return e < 1e-12; })) {
    out.metrics["exact"] = 1.0;
    out.outcome = Outcome::pass;
    return out;
  }
  std::vector<double> orders;
  for (std::size_t i = 0; i + 1 < errors.size(); ++i) orders.push_back(std::log2(errors[i] / errors[i + 1]));
  std::sort(orders.begin(), orders.end());
  const std::size_t k = orders.size();
  const double median = k % 2 ? orders[k / 2] : 0.5 * (orders[k / 2 - 1] + orders[k / 2]);
  out.metrics["order"] = median;
  out.outcome = std::abs(median - declared_order) <= 0.3 ? Outcome::pass : Outcome::fail;
  return out;
}

/// Drift of mass, L2 and Hamiltonian between the first and the last record.
/// Thresholds are per unit time: 1e-13 absolute mass, 1e-8 relative L2,
/// 1e-6 relative Hamiltonian.
inline ExperimentReport run_conservation_audit(const EvolutionProblem& prob, const SolverConfig& cfg) {
  ExperimentReport out;
  out.name = "conservation";
  const auto traj = evolve(prob, cfg);
  out.parameters["termination"] = to_string(traj.termination);
  if (traj.termination != Termination::completed) {
    out.note = "run ended early";
    return out;
  }
  const auto& first = traj.diagnostics.rows.front();
  const auto& last = traj.diagnostics.rows.back();
  auto rel = [](double a, double b) { return b != 0.0 ? std::abs(a - b) / std::abs(b) : std::abs(a - b); };
  const double scale = std::max(1.0, cfg.t_end);
  out.metrics["mass_drift"] = std::abs(last.mass - first.mass);
  out.metrics["l2_rel_drift"] = rel(last.l2, first.l2);
  out.metrics["hamiltonian_rel_drift"] = rel(last.hamiltonian, first.hamiltonian);
  const bool ok = out.metrics["mass_drift"] < 1e-13 * scale && out.metrics["l2_rel_drift"] < 1e-8 * scale &&
                  out.metrics["hamiltonian_rel_drift"] < 1e-6 * scale;
  out.outcome = ok ? Outcome::pass : Outcome::fail;
  return out;
}

/// Growth of the H^{s - max(1, l+1)} norm of u_t along a run, relative to t = 0.
/// Passes when the run completes and the ratio stays at most 10.
inline ExperimentReport run_time_derivative_audit(const EvolutionProblem& prob, const SolverConfig& cfg) {
  ExperimentReport out;
  out.name = "time_derivative";
  out.parameters["symbol"] = prob.symbol().name();
  const auto traj = evolve(prob, cfg);
  out.parameters["termination"] = to_string(traj.termination);
  out.metrics["sobolev_index"] = traj.diagnostics.s_time_derivative;
  if (traj.termination != Termination::completed) {
    out.note = "run ended early";
    return out;
  }
  const double initial = traj.diagnostics.rows.front().hs_minus_norm;
  double worst = 0.0;
  for (const auto& r : traj.diagnostics.rows) worst = std::max(worst, r.hs_minus_norm);
  out.metrics["growth"] = initial > 0.0 ? worst / initial : (worst == 0.0 ? 1.0 : INFINITY);
  out.outcome = out.metrics["growth"] <= 10.0 ? Outcome::pass : Outcome::fail;
  return out;
}

}  // namespace dispersive::lab
