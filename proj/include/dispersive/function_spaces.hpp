#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dispersive/grid.hpp"

namespace dispersive {

/// Besov smoothness/integrability triple (s, p, q) with the split
/// s = s_floor + s_frac, s_floor integer and s_frac in (0, 1]. Integer s gives
/// s_floor = s - 1 and s_frac = 1. q may be +infinity.
struct BesovIndex {
  double s;
  double p;
  double q;
  int s_floor;
  double s_frac;

  BesovIndex(double s_, double p_, double q_) : s(s_), p(p_), q(q_) {
    if (!(s > 0.0)) throw std::invalid_argument("BesovIndex: s must be positive");
    if (!(p > 1.0) || !std::isfinite(p)) throw std::invalid_argument("BesovIndex: p must lie in (1, inf)");
    if (!(q > 1.0)) throw std::invalid_argument("BesovIndex: q must lie in (1, inf]");
    s_floor = static_cast<int>(std::ceil(s)) - 1;
    s_frac = s - s_floor;
  }

  bool q_infinite() const noexcept { return std::isinf(q); }
  BesovIndex with_s(double new_s) const { return {new_s, p, q}; }
};

inline constexpr double kInf = std::numeric_limits<double>::infinity();

namespace detail {

template <class Range>
double lp_norm(const Range& values, double dx, double p) {
  double acc = 0.0;
  for (double v : values) acc += std::pow(std::abs(v), p);
  return std::pow(acc * dx, 1.0 / p);
}

// Spectral derivative on a periodic box of length `length`.
inline std::vector<double> box_derivative(const std::vector<double>& f, double length, int order) {
  if (order == 0) return f;
  const std::size_t n = f.size();
  std::vector<Complex> buf(n);
  fft::forward_real(f, buf);
  const double base = 2.0 * std::numbers::pi / length;
  for (std::size_t j = 0; j < n; ++j) {
    const long k = j < n / 2 ? static_cast<long>(j) : static_cast<long>(j) - static_cast<long>(n);
    if (j == n / 2 && order % 2 != 0) {
      buf[j] = 0.0;
      continue;
    }
    buf[j] *= std::pow(Complex(0.0, base * static_cast<double>(k)), order);
  }
  std::vector<double> out(n);
  fft::backward_real(buf, out);
  for (auto& v : out) v /= static_cast<double>(n);
  return out;
}

// || Delta_{j dx}^2 g ||_p on a periodic sample vector.
inline double periodic_second_difference_norm(const std::vector<double>& g, std::size_t shift, double dx, double p) {
  const std::size_t n = g.size();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = g[(i + 2 * shift) % n] - 2.0 * g[(i + shift) % n] + g[i];
    acc += std::pow(std::abs(d), p);
  }
  return std::pow(acc * dx, 1.0 / p);
}

// Same with zero padding beyond the last sample (line case).
inline double padded_second_difference_norm(const std::vector<double>& g, std::size_t shift, double dx, double p) {
  const std::size_t n = g.size();
  auto at = [&](std::size_t i) { return i < n ? g[i] : 0.0; };
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = at(i + 2 * shift) - 2.0 * at(i + shift) + g[i];
    acc += std::pow(std::abs(d), p);
  }
  return std::pow(acc * dx, 1.0 / p);
}

// The difference seminorm of the Besov norm with shifts h_j = j dx,
// j = 1..max_shift: trapezoid rule in h with the vanishing h = 0 endpoint,
// doubled for negative shifts. q = inf takes the maximum instead.
template <class DiffNorm>
double difference_seminorm(DiffNorm&& diff_norm, std::size_t max_shift, double dx, const BesovIndex& idx) {
  if (idx.q_infinite()) {
    double sup = 0.0;
    for (std::size_t j = 1; j <= max_shift; ++j) {
      const double h = static_cast<double>(j) * dx;
      sup = std::max(sup, std::pow(h, -idx.s_frac) * diff_norm(j));
    }
    return sup;
  }
  double integral = 0.0;
  for (std::size_t j = 1; j <= max_shift; ++j) {
    const double h = static_cast<double>(j) * dx;
    const double weight = (j == max_shift ? 0.5 : 1.0) * dx;
    integral += weight * std::pow(h, -idx.s_frac * idx.q - 1.0) * std::pow(diff_norm(j), idx.q);
  }
  return std::pow(2.0 * integral, 1.0 / idx.q);
}

}  // namespace detail

/// L_p norm over one period, (int |f|^p dx)^(1/p) without normalization.
inline double lp_norm(const RealField& f, double p) {
  return detail::lp_norm(f.samples(), f.grid().dx(), p);
}

/// Order-1 or order-2 forward difference with shift h = j dx, periodic wraparound.
inline RealField difference(const RealField& f, long shift, int order) {
  if (order != 1 && order != 2) throw std::invalid_argument("difference: order must be 1 or 2");
  const long n = static_cast<long>(f.size());
  auto at = [&](long i) { return f[static_cast<std::size_t>(((i % n) + n) % n)]; };
  RealField out(f.grid());
  for (long i = 0; i < n; ++i) {
    out[static_cast<std::size_t>(i)] =
        order == 1 ? at(i + shift) - at(i) : at(i + 2 * shift) - 2.0 * at(i + shift) + at(i);
  }
  return out;
}

/// sqrt( sum_k (1 + xi_k^2)^s |u_k|^2 ). Negative s gives the dual-scale norm.
inline double sobolev_norm(const SpectralField& U, double s) {
  double acc = 0.0;
  for (std::size_t j = 0; j < U.size(); ++j) {
    const double xi = U.grid().wavenumber(j);
    acc += std::pow(1.0 + xi * xi, s) * std::norm(U[j]);
  }
  return std::sqrt(acc);
}

inline double sobolev_norm(const RealField& u, double s) { return sobolev_norm(forward_transform(u), s); }

/// Periodic Besov norm through the derivative-difference characterization:
///
///   ||f||_{W^{s_floor}_p} + ( int |h|^{-s_frac q} ||Delta_h^2 f^{(s_floor)}||_p^q dh/|h| )^{1/q}
///
/// Derivatives are spectral, differences use exact grid shifts and h runs over
/// (0, pi P] (or (0, max_shift_length] when restricted).
inline double besov_norm_torus(const RealField& u, const BesovIndex& idx,
                               std::optional<double> max_shift_length = std::nullopt) {
  const auto& grid = u.grid();
  const double dx = grid.dx();
  const auto U = forward_transform(u);
  double w_part = 0.0;
  std::vector<double> top;
  for (int alpha = 0; alpha <= idx.s_floor; ++alpha) {
    const auto d = inverse_transform(derivative(U, alpha));
    w_part += lp_norm(d, idx.p);
    if (alpha == idx.s_floor) top.assign(d.samples().begin(), d.samples().end());
  }
  std::size_t max_shift = grid.size() / 2;
  if (max_shift_length) {
    max_shift = std::min(max_shift, static_cast<std::size_t>(std::floor(*max_shift_length / dx + 1e-9)));
    if (max_shift == 0) throw std::invalid_argument("besov_norm_torus: shift bound below grid spacing");
  }
  const double diff_part = detail::difference_seminorm(
      [&](std::size_t j) { return detail::periodic_second_difference_norm(top, j, dx, idx.p); }, max_shift, dx, idx);
  return w_part + diff_part;
}

/// Compactly supported function sampled on the box [-A, A) with M samples,
/// x_i = -A + i dx. Samples outside [support_lo, support_hi] are zero.
class LineField {
 public:
  LineField(double half_width, std::size_t samples, double support_lo, double support_hi, std::vector<double> values)
      : half_width_(half_width), lo_(support_lo), hi_(support_hi), values_(std::move(values)) {
    if (values_.size() != samples || samples < 8 || samples % 2 != 0)
      throw std::invalid_argument("LineField: need an even sample count >= 8");
    if (!(support_lo < support_hi) || support_lo < -half_width || support_hi > half_width)
      throw std::invalid_argument("LineField: support must lie inside the box");
    for (std::size_t i = 0; i < values_.size(); ++i)
      if (!in_support(x(i))) values_[i] = 0.0;
  }

  template <class F>
  static LineField sample(double half_width, std::size_t samples, double support_lo, double support_hi, F&& f) {
    std::vector<double> v(samples, 0.0);
    const double dx = 2.0 * half_width / static_cast<double>(samples);
    for (std::size_t i = 0; i < samples; ++i) {
      const double xi = -half_width + static_cast<double>(i) * dx;
      if (xi >= support_lo && xi <= support_hi) v[i] = f(xi);
    }
    return LineField(half_width, samples, support_lo, support_hi, std::move(v));
  }

  double half_width() const noexcept { return half_width_; }
  double dx() const noexcept { return 2.0 * half_width_ / static_cast<double>(values_.size()); }
  double x(std::size_t i) const noexcept { return -half_width_ + static_cast<double>(i) * dx(); }
  double support_lo() const noexcept { return lo_; }
  double support_hi() const noexcept { return hi_; }
  bool in_support(double xv) const noexcept {
    const double eps = 1e-9 * dx();
    return xv >= lo_ - eps && xv <= hi_ + eps;
  }
  std::size_t size() const noexcept { return values_.size(); }
  const std::vector<double>& values() const noexcept { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

 private:
  double half_width_;
  double lo_;
  double hi_;
  std::vector<double> values_;
};

inline double lp_norm(const LineField& f, double p) { return detail::lp_norm(f.values(), f.dx(), p); }

/// Line difference with zero padding; the shifted support must stay in the box.
inline LineField difference(const LineField& f, long shift, int order) {
  if (order != 1 && order != 2) throw std::invalid_argument("difference: order must be 1 or 2");
  const double reach = static_cast<double>(order * shift) * f.dx();
  const double lo = f.support_lo() - std::max(0.0, reach);
  const double hi = f.support_hi() - std::min(0.0, reach);
  if (lo < -f.half_width() || hi > f.half_width())
    throw std::out_of_range("difference: shifted support leaves the box");
  const long n = static_cast<long>(f.size());
  auto at = [&](long i) { return i >= 0 && i < n ? f[static_cast<std::size_t>(i)] : 0.0; };
  std::vector<double> out(f.size());
  for (long i = 0; i < n; ++i)
    out[static_cast<std::size_t>(i)] =
        order == 1 ? at(i + shift) - at(i) : at(i + 2 * shift) - 2.0 * at(i + shift) + at(i);
  return LineField(f.half_width(), f.size(), lo, hi, std::move(out));
}

inline constexpr double kLineShiftBound = 0.25;

/// Besov norm on the line with the shift integral restricted to 0 < |h| <= delta.
/// Requires the support to sit at least 2 delta inside the box.
inline double besov_norm_line(const LineField& f, const BesovIndex& idx, double delta = kLineShiftBound) {
  const double a = f.half_width();
  if (f.support_lo() < -a + 2.0 * delta || f.support_hi() > a - 2.0 * delta)
    throw std::out_of_range("besov_norm_line: support is closer than 2*delta to the box edge");
  const double dx = f.dx();
  double w_part = 0.0;
  std::vector<double> top;
  for (int alpha = 0; alpha <= idx.s_floor; ++alpha) {
    auto d = detail::box_derivative(f.values(), 2.0 * a, alpha);
    w_part += detail::lp_norm(d, dx, idx.p);
    if (alpha == idx.s_floor) top = std::move(d);
  }
  const auto max_shift = static_cast<std::size_t>(std::floor(delta / dx + 1e-9));
  if (max_shift == 0) throw std::invalid_argument("besov_norm_line: delta below grid spacing");
  const double diff_part = detail::difference_seminorm(
      [&](std::size_t j) { return detail::padded_second_difference_norm(top, j, dx, idx.p); }, max_shift, dx, idx);
  return w_part + diff_part;
}

namespace detail {

// C^8 smoothstep, the normalized integral of t^8 (1-t)^8. In Bernstein form
// S(t) = sum_{j=9}^{17} C(17, j) t^j (1-t)^(17-j) every term is positive, so
// there is no cancellation near either end.
inline double smoothstep(double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  const double u = 1.0 - t;
  double acc = 0.0;
  double binom = 1.0;  // C(17, j), built downward from j = 17
  for (int j = 17; j >= 9; --j) {
    acc += binom * std::pow(t, j) * std::pow(u, 17 - j);
    binom = binom * j / (18 - j);
  }
  return acc;
}

inline double smoothstep_derivative(double t) {
  if (t <= 0.0 || t >= 1.0) return 0.0;
  const double w = t * (1.0 - t);
  const double w2 = w * w;
  const double w4 = w2 * w2;
  return 218790.0 * w4 * w4;
}

}  // namespace detail

/// Base bump: 1 on [-1, 1], 0 outside (-2, 2), C^8 smoothstep in between.
inline double bump(double x) {
  const double ax = std::abs(x);
  return 1.0 - detail::smoothstep(ax - 1.0);
}

inline double bump_derivative(double x) {
  const double ax = std::abs(x);
  const double d = -detail::smoothstep_derivative(ax - 1.0);
  return x < 0.0 ? -d : d;
}

/// phi_a(x) = bump(x / a): 1 on [-a, a], supported in [-2a, 2a].
class CutoffFunction {
 public:
  explicit CutoffFunction(double a) : a_(a) {
    if (!(a > 0.0)) throw std::invalid_argument("CutoffFunction: dilation must be positive");
  }
  double dilation() const noexcept { return a_; }
  double support_radius() const noexcept { return 2.0 * a_; }
  double operator()(double x) const { return bump(x / a_); }
  double derivative(double x) const { return bump_derivative(x / a_) / a_; }

  LineField sample(double half_width, std::size_t samples) const {
    return LineField::sample(half_width, samples, -support_radius(), support_radius(),
                             [this](double x) { return (*this)(x); });
  }

 private:
  double a_;
};

inline CutoffFunction cutoff_dilate(double a) { return CutoffFunction(a); }

}  // namespace dispersive
