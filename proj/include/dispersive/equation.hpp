#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dispersive/grid.hpp"

namespace dispersive {

/// Real, even Fourier symbol m(xi) of the dispersive operator L, together with
/// its declared growth order l (|m(xi)| <= C (1+|xi|)^l).
///
/// The evaluator is only ever called at xi != 0; the value at the origin is the
/// explicitly supplied limit, so removable singularities like sqrt(tanh(xi)/xi)
/// never hit the raw formula.
class DispersionSymbol {
 public:
  DispersionSymbol(std::string name, std::function<double(double)> eval, double growth_order, double limit_at_zero)
      : name_(std::move(name)), eval_(std::move(eval)), growth_order_(growth_order), limit_at_zero_(limit_at_zero) {}

  double operator()(double xi) const { return xi == 0.0 ? limit_at_zero_ : eval_(xi); }

  const std::string& name() const noexcept { return name_; }
  double growth_order() const noexcept { return growth_order_; }
  double limit_at_zero() const noexcept { return limit_at_zero_; }

 private:
  std::string name_;
  std::function<double(double)> eval_;
  double growth_order_;
  double limit_at_zero_;
};

using Params = std::map<std::string, double>;

namespace symbols {

// Every builtin evaluates at |xi| so evenness holds bit-for-bit.

inline DispersionSymbol constant(double c) {
  return {"constant", [c](double) { return c; }, 0.0, c};
}
inline DispersionSymbol identity() {
  return {"identity", [](double) { return 1.0; }, 0.0, 1.0};
}
/// Whitham: m(xi) = sqrt(tanh(xi)/xi), the full linear water-wave dispersion.
inline DispersionSymbol whitham() {
  return {"whitham",
          [](double xi) {
            const double a = std::abs(xi);
            return std::sqrt(std::tanh(a) / a);
          },
          -0.5, 1.0};
}
/// KdV: m(xi) = -xi^2, so L d/dx = d^3/dx^3.
inline DispersionSymbol kdv() {
  return {"kdv", [](double xi) { return -xi * xi; }, 2.0, 0.0};
}
/// Benjamin-Ono: m(xi) = |xi|, so L d/dx has symbol i xi |xi|.
inline DispersionSymbol bo() {
  return {"bo", [](double xi) { return std::abs(xi); }, 1.0, 0.0};
}
inline DispersionSymbol fractional(double alpha) {
  if (!(alpha > 0.0)) throw std::invalid_argument("fractional symbol needs alpha > 0");
  return {"fractional", [alpha](double xi) { return std::pow(std::abs(xi), alpha); }, alpha, 0.0};
}

}  // namespace symbols

inline const std::vector<std::string>& builtin_symbol_names() {
  static const std::vector<std::string> names{"identity", "whitham", "kdv", "bo", "fractional", "constant"};
  return names;
}

namespace detail {

inline std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : ", ") + s;
  return out;
}

inline void check_params(const std::string& what, const Params& params, const std::vector<std::string>& allowed) {
  for (const auto& [key, value] : params) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw std::invalid_argument(what + ": unknown parameter '" + key + "'");
    (void)value;
  }
}

inline double param_or(const Params& params, const std::string& key, double fallback) {
  auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

inline double required_param(const std::string& what, const Params& params, const std::string& key) {
  auto it = params.find(key);
  if (it == params.end()) throw std::invalid_argument(what + ": missing parameter '" + key + "'");
  return it->second;
}

}  // namespace detail

inline DispersionSymbol builtin_symbol(const std::string& name, const Params& params = {}) {
  if (name == "identity") {
    detail::check_params(name, params, {});
    return symbols::identity();
  }
  if (name == "whitham") {
    detail::check_params(name, params, {});
    return symbols::whitham();
  }
  if (name == "kdv") {
    detail::check_params(name, params, {});
    return symbols::kdv();
  }
  if (name == "bo") {
    detail::check_params(name, params, {});
    return symbols::bo();
  }
  if (name == "fractional") {
    detail::check_params(name, params, {"alpha"});
    return symbols::fractional(detail::required_param(name, params, "alpha"));
  }
  if (name == "constant") {
    detail::check_params(name, params, {"c"});
    return symbols::constant(detail::required_param(name, params, "c"));
  }
  throw std::invalid_argument("unknown symbol '" + name + "'; expected one of: " + detail::join(builtin_symbol_names()));
}

/// max over grid frequencies of |m(xi)| / (1+|xi|)^l.
inline double growth_constant(const DispersionSymbol& m, const PeriodicGrid& grid) {
  double c = 0.0;
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const double xi = grid.wavenumber(j);
    c = std::max(c, std::abs(m(xi)) / std::pow(1.0 + std::abs(xi), m.growth_order()));
  }
  return c;
}

/// max over grid frequencies of |m(xi) - m(-xi)|.
inline double evenness_defect(const DispersionSymbol& m, const PeriodicGrid& grid) {
  double d = 0.0;
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const double xi = grid.wavenumber(j);
    d = std::max(d, std::abs(m(xi) - m(-xi)));
  }
  return d;
}

/// Local regularity of a nonlinearity: smooth, or H^r_loc for a finite r.
struct Regularity {
  bool smooth = true;
  double r = std::numeric_limits<double>::infinity();

  std::string describe() const { return smooth ? "smooth" : "H^" + std::to_string(r) + "_loc"; }
};

/// Nonlinearity n with derivatives n', n'' and antiderivative N (N' = n, N(0) = 0).
struct Nonlinearity {
  std::string name;
  std::function<double(double)> n;
  std::function<double(double)> n1;
  std::function<double(double)> n2;
  std::function<double(double)> antiderivative;
  Regularity regularity;
  bool identically_zero = false;
};

namespace nonlinearities {

inline Nonlinearity zero() {
  auto z = [](double) { return 0.0; };
  return {"zero", z, z, z, z, {}, true};
}

/// n(u) = u^p, p >= 2 integer.
inline Nonlinearity power(int p) {
  if (p < 2) throw std::invalid_argument("power nonlinearity needs integer p >= 2");
  return {"power",
          [p](double u) { return std::pow(u, p); },
          [p](double u) { return p * std::pow(u, p - 1); },
          [p](double u) { return p == 2 ? 2.0 : p * (p - 1) * std::pow(u, p - 2); },
          [p](double u) { return std::pow(u, p + 1) / (p + 1); },
          {},
          false};
}

/// n(u) = |u|^(p-1) u, p >= 2 real. Only finitely smooth at u = 0.
inline Nonlinearity signed_power(double p) {
  if (!(p >= 2.0)) throw std::invalid_argument("signed_power nonlinearity needs p >= 2");
  return {"signed_power",
          [p](double u) { return std::pow(std::abs(u), p - 1.0) * u; },
          [p](double u) { return p * std::pow(std::abs(u), p - 1.0); },
          [p](double u) {
            if (u == 0.0) return 0.0;
            return p * (p - 1.0) * std::pow(std::abs(u), p - 2.0) * (u > 0.0 ? 1.0 : -1.0);
          },
          [p](double u) { return std::pow(std::abs(u), p + 1.0) / (p + 1.0); },
          {false, p + 0.5},
          false};
}

/// n(u) = e^u - 1 - u, vanishing to second order at 0.
inline Nonlinearity exponential() {
  return {"exponential",
          [](double u) { return std::expm1(u) - u; },
          [](double u) { return std::expm1(u); },
          [](double u) { return std::exp(u); },
          [](double u) { return std::expm1(u) - u - 0.5 * u * u; },
          {},
          false};
}

/// n(u) = sum_j c_j u^j.
inline Nonlinearity polynomial(std::vector<double> coeffs) {
  bool all_zero = true;
  for (double c : coeffs) all_zero = all_zero && c == 0.0;
  auto horner = [](const std::vector<double>& c, double u) {
    double acc = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * u + *it;
    return acc;
  };
  std::vector<double> d1, d2, anti{0.0};
  for (std::size_t j = 1; j < coeffs.size(); ++j) d1.push_back(static_cast<double>(j) * coeffs[j]);
  for (std::size_t j = 1; j < d1.size(); ++j) d2.push_back(static_cast<double>(j) * d1[j]);
  for (std::size_t j = 0; j < coeffs.size(); ++j) anti.push_back(coeffs[j] / static_cast<double>(j + 1));
  return {"custom",
          [horner, coeffs](double u) { return horner(coeffs, u); },
          [horner, d1](double u) { return horner(d1, u); },
          [horner, d2](double u) { return horner(d2, u); },
          [horner, anti](double u) { return horner(anti, u); },
          {},
          all_zero};
}

}  // namespace nonlinearities

inline const std::vector<std::string>& builtin_nonlinearity_names() {
  static const std::vector<std::string> names{"power", "signed_power", "exponential", "custom", "zero"};
  return names;
}

/// `custom` takes its polynomial coefficients through `coeffs`.
inline Nonlinearity builtin_nonlinearity(const std::string& name, const Params& params = {},
                                         const std::vector<double>& coeffs = {}) {
  if (name == "power") {
    detail::check_params(name, params, {"p"});
    const double p = detail::required_param(name, params, "p");
    if (p != std::floor(p)) throw std::invalid_argument("power nonlinearity needs an integer p");
    return nonlinearities::power(static_cast<int>(p));
  }
  if (name == "signed_power") {
    detail::check_params(name, params, {"p"});
    return nonlinearities::signed_power(detail::required_param(name, params, "p"));
  }
  if (name == "exponential") {
    detail::check_params(name, params, {});
    return nonlinearities::exponential();
  }
  if (name == "custom") {
    detail::check_params(name, params, {});
    return nonlinearities::polynomial(coeffs);
  }
  if (name == "zero") {
    detail::check_params(name, params, {});
    return nonlinearities::zero();
  }
  throw std::invalid_argument("unknown nonlinearity '" + name + "'; expected one of: " +
                              detail::join(builtin_nonlinearity_names()));
}

/// Grid, symbol, nonlinearity, initial datum and the Sobolev index used for
/// diagnostics. The dispersion relation xi m(xi) is tabulated once here.
class EvolutionProblem {
 public:
  EvolutionProblem(PeriodicGrid grid, DispersionSymbol symbol, Nonlinearity nonlinearity, RealField u0,
                   double s_index)
      : grid_(grid),
        symbol_(std::move(symbol)),
        nonlinearity_(std::move(nonlinearity)),
        u0_(std::move(u0)),
        s_index_(s_index) {
    if (!(s_index_ > 1.5)) throw std::invalid_argument("EvolutionProblem: s_index must exceed 3/2");
    if (!(u0_.grid() == grid_)) throw std::invalid_argument("EvolutionProblem: u0 lives on a different grid");
    if (!u0_.is_finite()) throw std::invalid_argument("EvolutionProblem: u0 is not finite");
    omega_ = dispersion_relation(grid_, symbol_);
    m_.resize(grid_.size());
    for (std::size_t j = 0; j < grid_.size(); ++j) m_[j] = symbol_(grid_.wavenumber(j));
  }

  const PeriodicGrid& grid() const noexcept { return grid_; }
  const DispersionSymbol& symbol() const noexcept { return symbol_; }
  const Nonlinearity& nonlinearity() const noexcept { return nonlinearity_; }
  const RealField& u0() const noexcept { return u0_; }
  double s_index() const noexcept { return s_index_; }

  /// m(xi_k) per storage slot.
  std::span<const double> symbol_values() const noexcept { return m_; }
  /// xi_k m(xi_k) per storage slot.
  std::span<const double> frequencies() const noexcept { return omega_; }

  /// Same problem with a different initial datum.
  EvolutionProblem with_initial(RealField u0) const {
    EvolutionProblem copy = *this;
    if (!(u0.grid() == grid_)) throw std::invalid_argument("with_initial: grid mismatch");
    copy.u0_ = std::move(u0);
    return copy;
  }

  /// exp(-t L d/dx) applied to a spectral state.
  SpectralField propagate(const SpectralField& U, double t) const {
    return detail::propagate_with_frequencies(U, omega_, t);
  }
  RealField propagate(const RealField& u, double t) const {
    return inverse_transform(propagate(forward_transform(u), t));
  }

 private:
  PeriodicGrid grid_;
  DispersionSymbol symbol_;
  Nonlinearity nonlinearity_;
  RealField u0_;
  double s_index_;
  std::vector<double> omega_;
  std::vector<double> m_;
};

/// Two-thirds rule: zeroes every mode with |k| >= N/3, so products of two
/// retained fields are alias-free on the retained band.
inline SpectralField dealias(const SpectralField& U) {
  SpectralField out = U;
  const double cutoff = static_cast<double>(U.size()) / 3.0;
  for (std::size_t j = 0; j < out.size(); ++j)
    if (std::abs(static_cast<double>(U.grid().mode(j))) >= cutoff) out[j] = 0.0;
  return out;
}

namespace detail {

template <class F>
RealField pointwise(const RealField& u, F&& f, const char* what) {
  RealField out(u.grid());
  for (std::size_t j = 0; j < u.size(); ++j) {
    out[j] = f(u[j]);
    if (!std::isfinite(out[j])) throw NonFiniteError(std::string(what) + " overflowed");
  }
  return out;
}

}  // namespace detail

/// u_t = -(n(u))_x - L u_x, evaluated spectrally.
inline RealField rhs_direct(const RealField& u, const EvolutionProblem& prob, bool use_dealias = true) {
  const auto U = forward_transform(u);
  SpectralField NL(u.grid());
  if (!prob.nonlinearity().identically_zero) {
    NL = forward_transform(detail::pointwise(u, prob.nonlinearity().n, "n(u)"));
    if (use_dealias) NL = dealias(NL);
  }
  const auto& grid = u.grid();
  const auto m = prob.symbol_values();
  SpectralField out(grid);
  for (std::size_t j = 0; j < out.size(); ++j) {
    if (j == grid.nyquist_index()) continue;
    out[j] = Complex(0.0, -grid.wavenumber(j)) * (NL[j] + m[j] * U[j]);
  }
  return inverse_transform(out);
}

/// v_t = -exp(t L d/dx) [ n'(w) w_x ],  w = exp(-t L d/dx) v.
inline RealField rhs_transformed(const RealField& v, double t, const EvolutionProblem& prob, bool use_dealias = true) {
  if (prob.nonlinearity().identically_zero) return RealField(v.grid());
  const auto W = prob.propagate(forward_transform(v), t);
  const auto w = inverse_transform(W);
  const auto wx = inverse_transform(derivative(W));
  auto z = detail::pointwise(w, prob.nonlinearity().n1, "n'(w)");
  for (std::size_t j = 0; j < z.size(); ++j) z[j] *= wx[j];
  auto Z = forward_transform(z);
  if (use_dealias) Z = dealias(Z);
  // n'(w) w_x = (n(w))_x is a total derivative.
  Z[0] = 0.0;
  auto out = inverse_transform(prob.propagate(Z, -t));
  out *= -1.0;
  return out;
}

struct Invariants {
  double mass = 0.0;
  double l2 = 0.0;
  double hamiltonian = 0.0;
};

/// mass = mean(u), l2 = mean(u^2), hamiltonian = mean(N(u) + u Lu / 2).
inline Invariants invariants(const RealField& u, const EvolutionProblem& prob) {
  if (!u.is_finite()) throw NonFiniteError("invariants: non-finite field");
  const auto m = prob.symbol_values();
  auto Lu_hat = forward_transform(u);
  for (std::size_t j = 0; j < Lu_hat.size(); ++j) Lu_hat[j] *= m[j];
  const auto Lu = inverse_transform(Lu_hat);
  Invariants out;
  const auto& N = prob.nonlinearity().antiderivative;
  for (std::size_t j = 0; j < u.size(); ++j) {
    out.mass += u[j];
    out.l2 += u[j] * u[j];
    out.hamiltonian += N(u[j]) + 0.5 * u[j] * Lu[j];
  }
  const double n = static_cast<double>(u.size());
  out.mass /= n;
  out.l2 /= n;
  out.hamiltonian /= n;
  return out;
}

}  // namespace dispersive
