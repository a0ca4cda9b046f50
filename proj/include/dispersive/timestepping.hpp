#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dispersive/equation.hpp"
#include "dispersive/function_spaces.hpp"
#include "dispersive/grid.hpp"

namespace dispersive {

enum class Method { rk4_direct, ifrk4_transformed };
enum class Termination { completed, blowup_detected, resolution_lost };

inline std::string to_string(Method m) { return m == Method::rk4_direct ? "rk4_direct" : "ifrk4_transformed"; }

inline std::string to_string(Termination t) {
  switch (t) {
    case Termination::completed: return "completed";
    case Termination::blowup_detected: return "blowup_detected";
    case Termination::resolution_lost: return "resolution_lost";
  }
  return "unknown";
}

struct SolverConfig {
  Method method = Method::ifrk4_transformed;
  double dt = 1e-3;
  double t_end = 1.0;
  bool dealias = true;
  double blowup_gradient_factor = 1e4;
  std::size_t snapshot_stride = 10;

  void validate() const {
    if (!(dt > 0.0)) throw std::invalid_argument("SolverConfig: dt must be positive");
    if (!(t_end > 0.0)) throw std::invalid_argument("SolverConfig: t_end must be positive");
    if (!(blowup_gradient_factor > 1.0)) throw std::invalid_argument("SolverConfig: blowup_gradient_factor must exceed 1");
    if (snapshot_stride == 0) throw std::invalid_argument("SolverConfig: snapshot_stride must be positive");
  }
};

inline bool is_finite(double v) { return std::isfinite(v); }

/// One classical four-stage Runge-Kutta step for du/dt = rhs(t, u). State
/// needs `+`, scalar `*` and an `is_finite` overload.
template <class State, class Rhs>
State step_rk4(const State& u, double t, double dt, Rhs&& rhs) {
  if (!(dt > 0.0)) throw std::invalid_argument("step_rk4: dt must be positive");
  auto stage = [&](double ts, const State& y) {
    State k = rhs(ts, y);
    if (!is_finite(k)) throw NonFiniteError("step_rk4: non-finite stage");
    return k;
  };
  const double half = 0.5 * dt;
  const State k1 = stage(t, u);
  const State k2 = stage(t + half, u + half * k1);
  const State k3 = stage(t + half, u + half * k2);
  const State k4 = stage(t + dt, u + dt * k3);
  State out = u + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  if (!is_finite(out)) throw NonFiniteError("step_rk4: non-finite update");
  return out;
}

/// Lawson (integrating-factor) RK4 on v = exp(t L d/dx) u: classical RK4 on the
/// transformed equation, whose right-hand side already carries the exact
/// linear flow. With n = 0 the step is the identity.
inline RealField step_ifrk4(const RealField& v, double t, double dt, const EvolutionProblem& prob,
                            bool use_dealias = true) {
  return step_rk4(v, t, dt, [&](double ts, const RealField& y) { return rhs_transformed(y, ts, prob, use_dealias); });
}

inline RealField step_rk4_direct(const RealField& u, double t, double dt, const EvolutionProblem& prob,
                                 bool use_dealias = true) {
  return step_rk4(u, t, dt, [&](double, const RealField& y) { return rhs_direct(y, prob, use_dealias); });
}

/// One diagnostics row.
struct DiagnosticsRecord {
  double time = 0.0;
  double hs_norm = 0.0;
  double hs_minus_norm = 0.0;  ///< H^{s - max(1, l+1)} norm of u_t = rhs_direct(u)
  double sup_ux = 0.0;
  double mass = 0.0;
  double l2 = 0.0;
  double hamiltonian = 0.0;
};

struct DiagnosticsSeries {
  double s_index = 0.0;
  double s_time_derivative = 0.0;  ///< s - max(1, l+1)
  std::vector<DiagnosticsRecord> rows;
};

/// Running extremes over every accepted step, used by the wave-breaking lab.
struct BreakingMonitor {
  double initial_sup_ux = 0.0;
  double initial_sup_u = 0.0;
  double max_gradient_ratio = 1.0;
  double max_amplitude_ratio = 1.0;
  std::optional<double> trigger_time;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<RealField> snapshots;
  DiagnosticsSeries diagnostics;
  Termination termination = Termination::completed;
  double final_time = 0.0;
  BreakingMonitor monitor;
};

inline double sup_gradient(const SpectralField& U) { return inverse_transform(derivative(U)).max_abs(); }

/// Share of spectral energy in the top third of the active band. The active
/// band is |k| <= N/3 with dealiasing and |k| <= N/2 without.
inline double upper_band_energy_fraction(const SpectralField& U, bool dealiased) {
  const double n = static_cast<double>(U.size());
  const double band = dealiased ? n / 3.0 : n / 2.0;
  const double lower = 2.0 * band / 3.0;
  double total = 0.0;
  double upper = 0.0;
  for (std::size_t j = 0; j < U.size(); ++j) {
    const double e = std::norm(U[j]);
    total += e;
    const double k = std::abs(static_cast<double>(U.grid().mode(j)));
    if (k > lower && k <= band) upper += e;
  }
  return total > 0.0 ? upper / total : 0.0;
}

inline constexpr double kResolutionEnergyFraction = 0.01;

inline DiagnosticsRecord diagnose(const RealField& u, double t, const EvolutionProblem& prob, bool use_dealias) {
  const auto U = forward_transform(u);
  const double s_minus = prob.s_index() - std::max(1.0, prob.symbol().growth_order() + 1.0);
  const auto inv = invariants(u, prob);
  DiagnosticsRecord r;
  r.time = t;
  r.hs_norm = sobolev_norm(U, prob.s_index());
  r.hs_minus_norm = sobolev_norm(rhs_direct(u, prob, use_dealias), s_minus);
  r.sup_ux = sup_gradient(U);
  r.mass = inv.mass;
  r.l2 = inv.l2;
  r.hamiltonian = inv.hamiltonian;
  return r;
}

/// Fixed-step integration from u0 to t_end. Every accepted step is checked for
/// resolution loss (upper-band energy above 1%) and wave breaking
/// (sup|u_x| > factor * sup|u0_x|); either ends the run. Diagnostics and
/// snapshots are taken every `snapshot_stride` steps and at the final step.
inline Trajectory evolve(const EvolutionProblem& prob, const SolverConfig& cfg) {
  cfg.validate();
  Trajectory traj;
  traj.diagnostics.s_index = prob.s_index();
  traj.diagnostics.s_time_derivative = prob.s_index() - std::max(1.0, prob.symbol().growth_order() + 1.0);

  const auto U0 = forward_transform(prob.u0());
  traj.monitor.initial_sup_ux = sup_gradient(U0);
  traj.monitor.initial_sup_u = prob.u0().max_abs();
  const bool gradient_check = traj.monitor.initial_sup_ux > 0.0;

  auto record = [&](const RealField& u, double t) {
    traj.times.push_back(t);
    traj.snapshots.push_back(u);
    traj.diagnostics.rows.push_back(diagnose(u, t, prob, cfg.dealias));
  };
  record(prob.u0(), 0.0);

  const auto steps = static_cast<std::size_t>(std::ceil(cfg.t_end / cfg.dt - 1e-9));
  RealField state = prob.u0();
  for (std::size_t i = 0; i < steps; ++i) {
    const double t = static_cast<double>(i) * cfg.dt;
    const double t_next = i + 1 == steps ? cfg.t_end : static_cast<double>(i + 1) * cfg.dt;
    const double h = t_next - t;
    RealField u(prob.grid());
    try {
      state = cfg.method == Method::rk4_direct ? step_rk4_direct(state, t, h, prob, cfg.dealias)
                                               : step_ifrk4(state, t, h, prob, cfg.dealias);
      u = cfg.method == Method::rk4_direct ? state : prob.propagate(state, t_next);
    } catch (const NonFiniteError&) {
      traj.termination = Termination::blowup_detected;
      traj.monitor.trigger_time = t_next;
      traj.final_time = t;
      return traj;
    }
    traj.final_time = t_next;

    const auto U = forward_transform(u);
    if (upper_band_energy_fraction(U, cfg.dealias) > kResolutionEnergyFraction) {
      traj.termination = Termination::resolution_lost;
      traj.final_time = t;
      return traj;
    }
    const double grad = sup_gradient(U);
    if (gradient_check) {
      traj.monitor.max_gradient_ratio = std::max(traj.monitor.max_gradient_ratio, grad / traj.monitor.initial_sup_ux);
    }
    if (traj.monitor.initial_sup_u > 0.0)
      traj.monitor.max_amplitude_ratio =
          std::max(traj.monitor.max_amplitude_ratio, u.max_abs() / traj.monitor.initial_sup_u);

    const bool breaking = gradient_check && grad > cfg.blowup_gradient_factor * traj.monitor.initial_sup_ux;
    if (breaking || (i + 1) % cfg.snapshot_stride == 0 || i + 1 == steps) record(u, t_next);
    if (breaking) {
      traj.termination = Termination::blowup_detected;
      traj.monitor.trigger_time = t_next;
      return traj;
    }
  }
  return traj;
}

/// Final field of a trajectory.
inline const RealField& final_state(const Trajectory& traj) { return traj.snapshots.back(); }

}  // namespace dispersive
