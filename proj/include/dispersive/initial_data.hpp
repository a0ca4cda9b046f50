#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "dispersive/equation.hpp"
#include "dispersive/grid.hpp"

namespace dispersive {

/// mean + sum_k a_k cos(k x / P) + b_k sin(k x / P), evaluable anywhere so the
/// same function can be sampled on any grid or on a line box.
struct TrigPolynomial {
  struct Mode {
    int k;
    double a;
    double b;
  };

  int period_multiple = 1;
  double mean = 0.0;
  std::vector<Mode> modes;

  double operator()(double x) const {
    double v = mean;
    for (const auto& m : modes) {
      const double arg = m.k * x / period_multiple;
      v += m.a * std::cos(arg) + m.b * std::sin(arg);
    }
    return v;
  }

  RealField sample(const PeriodicGrid& grid) const {
    return RealField::sample(grid, [this](double x) { return (*this)(x); });
  }

  int max_mode() const {
    int k = 0;
    for (const auto& m : modes) k = std::max(k, m.k);
    return k;
  }

  TrigPolynomial scaled(double factor) const {
    TrigPolynomial out = *this;
    out.mean *= factor;
    for (auto& m : out.modes) {
      m.a *= factor;
      m.b *= factor;
    }
    return out;
  }

  /// Max of |f| on a fixed 4096 P point scan, independent of any solver grid.
  double reference_sup() const {
    const int n = 4096 * period_multiple;
    const double dx = 2.0 * std::numbers::pi * period_multiple / n;
    double m = 0.0;
    for (int i = 0; i < n; ++i) m = std::max(m, std::abs((*this)(i * dx)));
    return m;
  }
};

namespace detail {
// Uniform in [-1, 1) from the raw 64-bit Mersenne Twister stream, which is
// fully specified by the standard (distributions are not).
inline double signed_unit(std::mt19937_64& gen) {
  return 2.0 * static_cast<double>(gen() >> 11) * 0x1.0p-53 - 1.0;
}
}  // namespace detail

/// Random zero-mean trigonometric polynomial with modes 1..kmax, amplitudes
/// decaying like (1+k)^-decay, scaled so its reference sup-norm equals `sup`.
inline TrigPolynomial random_trig_polynomial(int kmax, std::uint64_t seed, double sup, double decay = 1.0,
                                             int period_multiple = 1) {
  if (kmax < 1) throw std::invalid_argument("random_trig_polynomial: kmax must be >= 1");
  std::mt19937_64 gen(seed);
  TrigPolynomial poly;
  poly.period_multiple = period_multiple;
  for (int k = 1; k <= kmax; ++k) {
    const double amp = std::pow(1.0 + k, -decay);
    const double a = amp * detail::signed_unit(gen);
    const double b = amp * detail::signed_unit(gen);
    poly.modes.push_back({k, a, b});
  }
  const double current = poly.reference_sup();
  return current > 0.0 ? poly.scaled(sup / current) : poly;
}

/// Periodic distance from x to x0 on a circle of length L.
inline double periodic_distance(double x, double x0, double length) {
  double d = std::fmod(x - x0, length);
  if (d < 0) d += length;
  return std::min(d, length - d);
}

/// Named initial datum with numeric parameters. Presets:
///   gauss(a, kappa[, x0])    a exp(-kappa d(x, x0)^2), x0 defaults to pi P
///   sech2(a, kappa[, x0])    a sech^2(kappa d(x, x0))
///   sine(a, k)               a sin(k x / P)
///   two_mode(a1, k1, a2, k2) a1 cos(k1 x / P) + a2 sin(k2 x / P)
///   random(a, kmax[, decay]) random_trig_polynomial with the run seed
///   coeffs                   sum_k cos[k] cos(k x / P) + sin[k] sin(k x / P)
struct InitialSpec {
  std::string preset = "gauss";
  Params params{{"a", 0.3}, {"kappa", 4.0}};
  std::vector<double> cos_coeffs;
  std::vector<double> sin_coeffs;
};

inline const std::vector<std::string>& initial_preset_names() {
  static const std::vector<std::string> names{"gauss", "sech2", "sine", "two_mode", "random", "coeffs"};
  return names;
}

inline RealField make_initial(const InitialSpec& spec, const PeriodicGrid& grid, std::uint64_t seed = 0) {
  const auto& p = spec.params;
  const double length = grid.length();
  const double P = grid.period_multiple();
  const std::string& name = spec.preset;
  if (name == "gauss" || name == "sech2") {
    detail::check_params(name, p, {"a", "kappa", "x0"});
    const double a = detail::required_param(name, p, "a");
    const double kappa = detail::required_param(name, p, "kappa");
    const double x0 = detail::param_or(p, "x0", std::numbers::pi * P);
    if (name == "gauss")
      return RealField::sample(grid, [=](double x) {
        const double d = periodic_distance(x, x0, length);
        return a * std::exp(-kappa * d * d);
      });
    return RealField::sample(grid, [=](double x) {
      const double c = std::cosh(kappa * periodic_distance(x, x0, length));
      return a / (c * c);
    });
  }
  if (name == "sine") {
    detail::check_params(name, p, {"a", "k"});
    const double a = detail::required_param(name, p, "a");
    const double k = detail::required_param(name, p, "k");
    return RealField::sample(grid, [=](double x) { return a * std::sin(k * x / P); });
  }
  if (name == "two_mode") {
    detail::check_params(name, p, {"a1", "k1", "a2", "k2"});
    const double a1 = detail::required_param(name, p, "a1");
    const double k1 = detail::required_param(name, p, "k1");
    const double a2 = detail::required_param(name, p, "a2");
    const double k2 = detail::required_param(name, p, "k2");
    return RealField::sample(grid, [=](double x) { return a1 * std::cos(k1 * x / P) + a2 * std::sin(k2 * x / P); });
  }
  if (name == "random") {
    detail::check_params(name, p, {"a", "kmax", "decay"});
    const auto poly = random_trig_polynomial(static_cast<int>(detail::required_param(name, p, "kmax")), seed,
                                             detail::required_param(name, p, "a"), detail::param_or(p, "decay", 1.0),
                                             grid.period_multiple());
    return poly.sample(grid);
  }
  if (name == "coeffs") {
    detail::check_params(name, p, {});
    TrigPolynomial poly;
    poly.period_multiple = grid.period_multiple();
    const std::size_t n = std::max(spec.cos_coeffs.size(), spec.sin_coeffs.size());
    for (std::size_t k = 0; k < n; ++k) {
      const double a = k < spec.cos_coeffs.size() ? spec.cos_coeffs[k] : 0.0;
      const double b = k < spec.sin_coeffs.size() ? spec.sin_coeffs[k] : 0.0;
      if (k == 0)
        poly.mean = a;
      else
        poly.modes.push_back({static_cast<int>(k), a, b});
    }
    return poly.sample(grid);
  }
  throw std::invalid_argument("unknown initial preset '" + name + "'; expected one of: " +
                              detail::join(initial_preset_names()));
}

}  // namespace dispersive
