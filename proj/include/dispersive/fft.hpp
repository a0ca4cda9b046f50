#pragma once

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <map>
#include <mutex>
#include <span>
#include <vector>

namespace dispersive::fft {

namespace detail {

struct RealPlans {
  fftw_plan r2c;
  fftw_plan c2r;
};

// FFTW planning is not thread-safe; execution of an existing plan on new
// arrays is. Plans are created once per length under a lock and reused.
class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  RealPlans plans(std::size_t n) {
    std::lock_guard lock(mutex_);
    auto it = plans_.find(n);
    if (it != plans_.end()) return it->second;

    // FFTW_ESTIMATE never touches the planning buffers.
    auto* real = fftw_alloc_real(n);
    auto* half = fftw_alloc_complex(n / 2 + 1);
    const int len = static_cast<int>(n);
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    RealPlans p{fftw_plan_dft_r2c_1d(len, real, half, flags), fftw_plan_dft_c2r_1d(len, half, real, flags)};
    fftw_free(half);
    fftw_free(real);
    return plans_.emplace(n, p).first->second;
  }

  PlanCache(const PlanCache&) = delete;
  PlanCache& operator=(const PlanCache&) = delete;

 private:
  PlanCache() = default;
  ~PlanCache() {
    for (auto& [n, p] : plans_) {
      fftw_destroy_plan(p.r2c);
      fftw_destroy_plan(p.c2r);
    }
  }

  std::mutex mutex_;
  std::map<std::size_t, RealPlans> plans_;
};

}  // namespace detail

/// Unnormalized forward DFT of real data, out_k = sum_j in_j exp(-2 pi i j k / n),
/// written for all n slots. The upper half is filled by conjugation, so the
/// result is exactly conjugate-symmetric.
inline void forward_real(std::span<const double> in, std::span<std::complex<double>> out) {
  const std::size_t n = in.size();
  auto plans = detail::PlanCache::instance().plans(n);
  std::vector<double> src(in.begin(), in.end());
  fftw_execute_dft_r2c(plans.r2c, src.data(), reinterpret_cast<fftw_complex*>(out.data()));
  for (std::size_t k = n / 2 + 1; k < n; ++k) out[k] = std::conj(out[n - k]);
}

/// Unnormalized backward DFT to real data, out_j = sum_k in_k exp(+2 pi i j k / n).
/// Only slots 0..n/2 are read; the input is assumed conjugate-symmetric.
inline void backward_real(std::span<const std::complex<double>> in, std::span<double> out) {
  const std::size_t n = out.size();
  auto plans = detail::PlanCache::instance().plans(n);
  std::vector<std::complex<double>> half(in.begin(), in.begin() + static_cast<std::ptrdiff_t>(n / 2 + 1));
  // The imaginary parts of the self-conjugate slots are ignored by c2r.
  fftw_execute_dft_c2r(plans.c2r, reinterpret_cast<fftw_complex*>(half.data()), out.data());
}

}  // namespace dispersive::fft
