#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstddef>
#include <functional>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dispersive/errors.hpp"
#include "dispersive/fft.hpp"

namespace dispersive {

using Complex = std::complex<double>;

/// Uniform grid on [0, 2*pi*P) with N samples. Modes are stored in FFT order:
/// index j holds integer mode j for j < N/2 and j - N otherwise, so the
/// Nyquist slot j = N/2 carries mode -N/2 and modes cover [-N/2, N/2).
class PeriodicGrid {
 public:
  PeriodicGrid(std::size_t n, int period_multiple) : n_(n), p_(period_multiple) {
    if (n < 8 || n % 2 != 0)
      throw std::invalid_argument("PeriodicGrid: N must be even and >= 8, got " + std::to_string(n));
    if (period_multiple < 1)
      throw std::invalid_argument("PeriodicGrid: P must be >= 1, got " + std::to_string(period_multiple));
  }

  std::size_t size() const noexcept { return n_; }
  int period_multiple() const noexcept { return p_; }
  double length() const noexcept { return 2.0 * std::numbers::pi * p_; }
  double dx() const noexcept { return length() / static_cast<double>(n_); }
  double x(std::size_t j) const noexcept { return static_cast<double>(j) * dx(); }

  /// Integer mode k of storage slot `index`.
  long mode(std::size_t index) const noexcept {
    const long i = static_cast<long>(index);
    const long n = static_cast<long>(n_);
    return i < n / 2 ? i : i - n;
  }
  /// Angular frequency k/P of storage slot `index`.
  double wavenumber(std::size_t index) const noexcept {
    return static_cast<double>(mode(index)) / static_cast<double>(p_);
  }
  std::size_t nyquist_index() const noexcept { return n_ / 2; }
  /// Storage slot of the conjugate partner mode -k.
  std::size_t partner(std::size_t index) const noexcept { return index == 0 ? 0 : n_ - index; }

  friend bool operator==(const PeriodicGrid&, const PeriodicGrid&) = default;

 private:
  std::size_t n_;
  int p_;
};

inline PeriodicGrid make_grid(std::size_t n, int period_multiple) {
  return PeriodicGrid(n, period_multiple);
}

namespace detail {
inline void require_same_grid(const PeriodicGrid& a, const PeriodicGrid& b) {
  if (!(a == b)) throw std::invalid_argument("field grids differ");
}

inline std::string format_g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}
}  // namespace detail

/// Real samples u(x_j) on a periodic grid.
class RealField {
 public:
  explicit RealField(PeriodicGrid grid) : grid_(grid), samples_(grid.size(), 0.0) {}
  RealField(PeriodicGrid grid, std::vector<double> samples) : grid_(grid), samples_(std::move(samples)) {
    if (samples_.size() != grid_.size()) throw std::invalid_argument("RealField: sample count does not match grid");
  }

  template <class F>
  static RealField sample(PeriodicGrid grid, F&& f) {
    RealField out(grid);
    for (std::size_t j = 0; j < grid.size(); ++j) out.samples_[j] = f(grid.x(j));
    return out;
  }

  const PeriodicGrid& grid() const noexcept { return grid_; }
  std::size_t size() const noexcept { return samples_.size(); }
  std::span<const double> samples() const noexcept { return samples_; }
  std::span<double> samples() noexcept { return samples_; }
  double operator[](std::size_t j) const { return samples_[j]; }
  double& operator[](std::size_t j) { return samples_[j]; }

  bool is_finite() const noexcept {
    return std::all_of(samples_.begin(), samples_.end(), [](double v) { return std::isfinite(v); });
  }
  double max_abs() const noexcept {
    double m = 0.0;
    for (double v : samples_) m = std::max(m, std::abs(v));
    return m;
  }
  double mean() const noexcept {
    double s = 0.0;
    for (double v : samples_) s += v;
    return s / static_cast<double>(samples_.size());
  }

  RealField& operator+=(const RealField& o) {
    detail::require_same_grid(grid_, o.grid_);
    for (std::size_t j = 0; j < samples_.size(); ++j) samples_[j] += o.samples_[j];
    return *this;
  }
  RealField& operator-=(const RealField& o) {
    detail::require_same_grid(grid_, o.grid_);
    for (std::size_t j = 0; j < samples_.size(); ++j) samples_[j] -= o.samples_[j];
    return *this;
  }
  RealField& operator*=(double a) noexcept {
    for (double& v : samples_) v *= a;
    return *this;
  }
  friend RealField operator+(RealField a, const RealField& b) { return a += b; }
  friend RealField operator-(RealField a, const RealField& b) { return a -= b; }
  friend RealField operator*(double a, RealField b) { return b *= a; }
  friend RealField operator*(RealField b, double a) { return b *= a; }

 private:
  PeriodicGrid grid_;
  std::vector<double> samples_;
};

inline bool is_finite(const RealField& u) { return u.is_finite(); }

/// Fourier coefficients u_k = (1/N) sum_j u(x_j) exp(-i k x_j / P), FFT order.
class SpectralField {
 public:
  explicit SpectralField(PeriodicGrid grid) : grid_(grid), coeffs_(grid.size(), Complex{}) {}
  SpectralField(PeriodicGrid grid, std::vector<Complex> coeffs) : grid_(grid), coeffs_(std::move(coeffs)) {
    if (coeffs_.size() != grid_.size()) throw std::invalid_argument("SpectralField: coefficient count does not match grid");
  }

  const PeriodicGrid& grid() const noexcept { return grid_; }
  std::size_t size() const noexcept { return coeffs_.size(); }
  std::span<const Complex> coeffs() const noexcept { return coeffs_; }
  std::span<Complex> coeffs() noexcept { return coeffs_; }
  const Complex& operator[](std::size_t j) const { return coeffs_[j]; }
  Complex& operator[](std::size_t j) { return coeffs_[j]; }

  /// Coefficient of integer mode k in [-N/2, N/2).
  Complex mode(long k) const {
    const long n = static_cast<long>(coeffs_.size());
    return coeffs_[static_cast<std::size_t>((k % n + n) % n)];
  }

  double max_abs() const noexcept {
    double m = 0.0;
    for (const auto& c : coeffs_) m = std::max(m, std::abs(c));
    return m;
  }

  /// Largest violation of c_{-k} = conj(c_k), relative to the largest coefficient.
  double hermitian_defect() const noexcept {
    const double scale = max_abs();
    if (scale == 0.0) return 0.0;
    double worst = 0.0;
    for (std::size_t j = 0; j < coeffs_.size(); ++j)
      worst = std::max(worst, std::abs(coeffs_[grid_.partner(j)] - std::conj(coeffs_[j])));
    return worst / scale;
  }

  SpectralField& operator+=(const SpectralField& o) {
    detail::require_same_grid(grid_, o.grid_);
    for (std::size_t j = 0; j < coeffs_.size(); ++j) coeffs_[j] += o.coeffs_[j];
    return *this;
  }
  SpectralField& operator*=(Complex a) noexcept {
    for (auto& c : coeffs_) c *= a;
    return *this;
  }
  friend SpectralField operator+(SpectralField a, const SpectralField& b) { return a += b; }
  friend SpectralField operator*(Complex a, SpectralField b) { return b *= a; }

 private:
  PeriodicGrid grid_;
  std::vector<Complex> coeffs_;
};

inline constexpr double kHermitianTolerance = 1e-10;

inline SpectralField forward_transform(const RealField& u) {
  if (!u.is_finite()) throw NonFiniteError("forward_transform: non-finite samples");
  const std::size_t n = u.size();
  std::vector<Complex> buf(n);
  fft::forward_real(u.samples(), buf);
  const double scale = 1.0 / static_cast<double>(n);
  for (auto& c : buf) c *= scale;
  return SpectralField(u.grid(), std::move(buf));
}

inline RealField inverse_transform(const SpectralField& U) {
  if (U.hermitian_defect() > kHermitianTolerance)
    throw SymmetryError("inverse_transform: coefficients are not conjugate-symmetric (defect " +
                        detail::format_g(U.hermitian_defect()) + ")");
  std::vector<double> re(U.size());
  fft::backward_real(U.coeffs(), re);
  return RealField(U.grid(), std::move(re));
}

/// Multiplies every coefficient by sigma(xi_k). The unpaired Nyquist mode is
/// zeroed whenever sigma is not real there (odd content such as i*xi), so a
/// Hermitian symbol keeps real fields real.
template <class Symbol>
SpectralField apply_multiplier(const SpectralField& U, Symbol&& sigma) {
  SpectralField out = U;
  const auto& grid = U.grid();
  for (std::size_t j = 0; j < out.size(); ++j) {
    const Complex s = sigma(grid.wavenumber(j));
    if (!std::isfinite(s.real()) || !std::isfinite(s.imag()))
      throw std::domain_error("apply_multiplier: symbol is not finite at xi = " + std::to_string(grid.wavenumber(j)));
    out[j] *= s;
    if (j == grid.nyquist_index() && s.imag() != 0.0) out[j] = 0.0;
  }
  return out;
}

inline SpectralField derivative(const SpectralField& U, int order = 1) {
  return apply_multiplier(U, [order](double xi) { return std::pow(Complex(0.0, xi), order); });
}

inline RealField derivative(const RealField& u, int order = 1) {
  if (order == 0) return u;
  return inverse_transform(derivative(forward_transform(u), order));
}

namespace detail {

// Applies exp(-i t omega_k) with omega_k = xi_k m(xi_k) precomputed per slot.
inline SpectralField propagate_with_frequencies(const SpectralField& U, std::span<const double> omega, double t) {
  SpectralField out = U;
  const std::size_t nyq = U.grid().nyquist_index();
  for (std::size_t j = 0; j < out.size(); ++j) {
    const double phase = -t * omega[j];
    if (j == nyq) {
      if (std::sin(phase) != 0.0) out[j] = 0.0;
      continue;
    }
    out[j] *= Complex(std::cos(phase), std::sin(phase));
  }
  return out;
}

}  // namespace detail

/// Dispersion relation omega(xi) = xi m(xi) at every storage slot. Checks
/// that m is finite and even on the grid.
template <class Symbol>
std::vector<double> dispersion_relation(const PeriodicGrid& grid, Symbol&& m) {
  std::vector<double> omega(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const double xi = grid.wavenumber(j);
    const double plus = m(xi);
    const double minus = m(-xi);
    if (!std::isfinite(plus) || !std::isfinite(minus))
      throw std::domain_error("symbol is not finite at xi = " + std::to_string(xi));
    if (std::abs(plus - minus) > 1e-14 * std::max(1.0, std::abs(plus)))
      throw std::domain_error("symbol is not even at xi = " + std::to_string(xi));
    omega[j] = xi * plus;
  }
  return omega;
}

/// Exact linear flow exp(-t L d/dx): coefficient k is multiplied by
/// exp(-i t xi_k m(xi_k)). Norm-preserving in every H^s.
template <class Symbol>
SpectralField propagate(const SpectralField& U, Symbol&& m, double t) {
  const auto omega = dispersion_relation(U.grid(), m);
  return detail::propagate_with_frequencies(U, omega, t);
}

template <class Symbol>
RealField propagate(const RealField& u, Symbol&& m, double t) {
  return inverse_transform(propagate(forward_transform(u), m, t));
}

}  // namespace dispersive
