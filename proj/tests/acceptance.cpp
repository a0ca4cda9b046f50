// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "dispersive/equation.hpp"
#include "dispersive/function_spaces.hpp"
#include "dispersive/initial_data.hpp"
#include "dispersive/property_lab.hpp"
#include "dispersive/timestepping.hpp"

using namespace dispersive;
using namespace dispersive::lab;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string fmt(const char* f, double a, double b) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

RealField smooth_gauss(const PeriodicGrid& g) {
  InitialSpec spec;
  spec.params = {{"a", 0.3}, {"kappa", 4.0}};
  return make_initial(spec, g);
}

RealField breaking_gauss(const PeriodicGrid& g) {
  InitialSpec spec;
  spec.params = {{"a", 1.0}, {"kappa", 1.0}};
  return make_initial(spec, g);
}

EvolutionProblem smooth_problem(DispersionSymbol m = symbols::whitham(), std::size_t n = 256) {
  const auto g = make_grid(n, 1);
  return EvolutionProblem(g, std::move(m), nonlinearities::power(2), smooth_gauss(g), 2.0);
}

SolverConfig solver(Method m, double dt, double t_end) {
  SolverConfig c;
  c.method = m;
  c.dt = dt;
  c.t_end = t_end;
  return c;
}

DispersionSymbol symbol_by_name(const std::string& name) {
  if (name == "fractional") return builtin_symbol(name, {{"alpha", 0.5}});
  if (name == "constant") return builtin_symbol(name, {{"c", 1.0}});
  return builtin_symbol(name);
}

Verdict unitary_group() {
  const auto g = make_grid(256, 1);
  const auto U = forward_transform(random_trig_polynomial(120, 42, 1.0).sample(g));
  double worst = 0.0;
  for (const auto& name : builtin_symbol_names())
    for (double s : {0.0, 1.75, 3.0})
      for (double t : {0.1, 1.0, 10.0}) {
        const double before = sobolev_norm(U, s);
        const double after = sobolev_norm(propagate(U, symbol_by_name(name), t), s);
        worst = std::max(worst, std::abs(after - before) / before);
      }
  return {worst < 1e-12, fmt("max relative H^s drift %.2e over %g symbols", worst,
                             static_cast<double>(builtin_symbol_names().size()))};
}

Verdict formulation_equivalence() {
  const auto prob = smooth_problem();
  const auto direct = evolve(prob, solver(Method::rk4_direct, 1e-3, 1.0));
  const auto lawson = evolve(prob, solver(Method::ifrk4_transformed, 1e-3, 1.0));
  if (direct.termination != Termination::completed || lawson.termination != Termination::completed)
    return {false, "a run did not complete"};
  const double d = (final_state(direct) - final_state(lawson)).max_abs();
  return {d < 1e-6, fmt("max |u_direct(T) - u_lawson(T)| = %.2e", d)};
}

Verdict convergence_order() {
  const auto prob = smooth_problem();
  bool ok = true;
  std::string detail;
  for (Method m : {Method::rk4_direct, Method::ifrk4_transformed}) {
    const auto r = convergence_study(prob, m, {4e-3, 2e-3, 1e-3, 5e-4}, 1.0, 4.0);
    const double order = r.metrics.count("order") ? r.metrics.at("order") : std::nan("");
    ok = ok && r.outcome == Outcome::pass && std::abs(order - 4.0) <= 0.3;
    detail += to_string(m) + fmt(" order %.3f; ", order);
  }
  return {ok, detail};
}

Verdict conservation() {
  const auto prob = smooth_problem();
  bool ok = true;
  std::string detail;
  for (Method m : {Method::rk4_direct, Method::ifrk4_transformed}) {
    const auto traj = evolve(prob, solver(m, 1e-3, 1.0));
    const auto& rows = traj.diagnostics.rows;
    double dm = 0.0, dl = 0.0, dh = 0.0;
    for (const auto& r : rows) {
      dm = std::max(dm, std::abs(r.mass - rows.front().mass));
      dl = std::max(dl, std::abs(r.l2 - rows.front().l2) / rows.front().l2);
      dh = std::max(dh, std::abs(r.hamiltonian - rows.front().hamiltonian) / std::abs(rows.front().hamiltonian));
    }
    ok = ok && traj.termination == Termination::completed && dm < 1e-13 && dl < 1e-8 && dh < 1e-6;
    detail += to_string(m) + fmt(" mass %.1e l2 %.1e", dm, dl) + fmt(" H %.1e; ", dh);
  }
  return {ok, detail};
}

Verdict norm_identity() {
  const auto fam = random_family(20, 32, 1000);
  bool ok = true;
  std::string detail;
  for (double s : {1.75, 2.0, 2.5}) {
    const auto r = check_norm_equivalence(fam, s, 256);
    ok = ok && equivalence_holds(r);
    detail += fmt("s=%g [%.3f, ", s, r.min_ratio()) + fmt("%.3f]; ", r.max_ratio);
  }
  return {ok, detail};
}

Verdict second_difference_identity() {
  const auto g = make_grid(256, 1);
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<long> shift(-128, 128);
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto f = random_trig_polynomial(32, 5000 + seed, 1.0).sample(g);
    const long j = shift(rng);
    const auto lhs = 2.0 * difference(f, j, 1);
    const auto rhs = difference(f, 2 * j, 1) - difference(f, j, 2);
    worst = std::max(worst, (lhs - rhs).max_abs());
  }
  return {worst <= 1e-14, fmt("max defect %.2e over 100 fields", worst)};
}

Verdict localizing() {
  auto fam = sine_family(8);
  fam.push_back(constant_member(1.0));
  for (auto& m : random_family(4, 32, 2000)) fam.push_back(m);
  bool ok = true;
  std::string detail;
  for (const auto& idx : {BesovIndex(1.5, 2, 2), BesovIndex(2, 2, 2), BesovIndex(2, 4, 3), BesovIndex(1.75, 2, kInf)}) {
    const auto r = check_localizing(CutoffFunction(2.0), fam, idx);
    ok = ok && r.bounded_and_stable();
    detail += fmt("(%g,%g,", idx.s, idx.p) + (std::isinf(idx.q) ? std::string("inf") : fmt("%g", idx.q)) +
              fmt(") max %.3f->%.3f; ", r.max_ratio, r.refined_max_ratio);
  }
  return {ok, detail};
}

Verdict composition() {
  const auto fam = random_family(8, 32, 3000, {0.5, 1.0, 1.5, 2.0}, 2.0);
  const std::vector<std::pair<ScalarFunction, BesovIndex>> cases{
      {functions::square(), BesovIndex(2, 2, 2)},     {functions::cube(), BesovIndex(2, 2, 2)},
      {functions::square(), BesovIndex(1.75, 2, 2)},  {functions::cube(), BesovIndex(1.75, 2, 2)},
      {functions::abs_times(), BesovIndex(1.75, 2, 2)},
  };
  bool ok = true;
  std::string detail;
  for (const auto& [f, idx] : cases) {
    const auto r = check_composition_bound(f, fam, idx);
    ok = ok && r.bounded_and_stable();
    detail += f.name + fmt(" s=%g max %.3f", idx.s, r.max_ratio) + fmt("->%.3f; ", r.refined_max_ratio);
  }
  return {ok, detail};
}

Verdict continuous_dependence() {
  const auto g = make_grid(128, 1);
  const auto w = random_trig_polynomial(8, 77, 1.0).sample(g);
  const std::vector<double> eps{1e-2, 1e-3, 1e-4};
  const EvolutionProblem linear(g, symbols::whitham(), nonlinearities::zero(), smooth_gauss(g), 2.0);
  const auto lin = run_continuous_dependence(linear, eps, w, solver(Method::ifrk4_transformed, 1e-2, 1.0));
  double oracle_err = 0.0;
  for (double e : eps)
    oracle_err = std::max(oracle_err, std::abs(lin.metrics.at("d(" + ::dispersive::detail::format_g(e) + ")") -
                                               e * sobolev_norm(w, 2.0)));
  const EvolutionProblem nonlinear(g, symbols::whitham(), nonlinearities::power(2), smooth_gauss(g), 2.0);
  const auto nl = run_continuous_dependence(nonlinear, eps, w, solver(Method::ifrk4_transformed, 2e-3, 1.0));
  const double spread = nl.metrics.count("spread") ? nl.metrics.at("spread") : std::nan("");
  return {oracle_err < 1e-10 && nl.outcome == Outcome::pass && spread <= 4.0,
          fmt("linear oracle error %.2e, nonlinear spread %.3f", oracle_err, spread)};
}

Verdict wave_breaking_contrast() {
  const auto g = make_grid(1024, 1);
  const auto u0 = breaking_gauss(g);
  auto cfg = solver(Method::ifrk4_transformed, 2.5e-4, 1.5);
  cfg.snapshot_stride = 400;
  const auto whitham = run_wave_breaking(EvolutionProblem(g, symbols::whitham(), nonlinearities::power(2), u0, 2.0), cfg);
  const auto kdv = run_wave_breaking(EvolutionProblem(g, symbols::kdv(), nonlinearities::power(2), u0, 2.0), cfg);
  const double wg = whitham.metrics.at("gradient_ratio");
  const double kg = kdv.metrics.at("gradient_ratio");
  const bool kdv_tripped = kg >= kBreakingGradientRatio || kdv.metrics.count("breaking_time");
  return {whitham.outcome == Outcome::pass && !kdv_tripped,
          fmt("whitham gradient ratio %.1f ", wg) + to_string(whitham.outcome) +
              fmt(", kdv gradient ratio %.2f (", kg) + kdv.note + ")"};
}

Verdict time_derivative_regularity() {
  bool ok = true;
  std::string detail;
  for (const auto& [name, m] : {std::pair{"whitham", symbols::whitham()}, std::pair{"kdv", symbols::kdv()}}) {
    const auto r = run_time_derivative_audit(smooth_problem(m), solver(Method::ifrk4_transformed, 1e-3, 1.0));
    ok = ok && r.outcome == Outcome::pass && r.metrics.at("growth") <= 10.0;
    detail += std::string(name) + fmt(" H^%g growth %.3f; ", r.metrics.at("sobolev_index"), r.metrics.at("growth"));
  }
  return {ok, detail};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"unitary group preserves H^s", unitary_group},
      {"direct and transformed formulations agree", formulation_equivalence},
      {"fourth-order convergence of both integrators", convergence_order},
      {"conservation of mass, l2 and hamiltonian", conservation},
      {"H^s and B^s_22 norms are equivalent", norm_identity},
      {"second-difference identity", second_difference_identity},
      {"localizing bound", localizing},
      {"periodic composition bound", composition},
      {"continuous dependence on initial data", continuous_dependence},
      {"wave-breaking contrast whitham vs kdv", wave_breaking_contrast},
      {"u_t regularity class", time_derivative_regularity},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    while (!v.detail.empty() && (v.detail.back() == ' ' || v.detail.back() == ';')) v.detail.pop_back();
    std::printf("%s [%zu] %s: %s (%.1fs)\n", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                v.detail.c_str(), secs);
    std::fflush(stdout);
    failures += v.pass ? 0 : 1;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
