#pragma once

#include <algorithm>
#include <complex>
#include <cstddef>
#include <cstring>
#include <mutex>
#include <span>
#include <vector>

#include <fftw3.h>

#include "frontcast/errors.hpp"

namespace frontcast {

/// Thin RAII wrapper over FFTW's real-to-complex transforms for a fixed
/// length. FFTW's planner is not thread-safe, so planning is serialized;
/// executing distinct instances concurrently is fine.
class RealFft {
 public:
  explicit RealFft(std::size_t n) : n_(n) {
    if (n < 2) throw ConfigError("fft: length must be >= 2");
    std::lock_guard<std::mutex> lock(plan_mutex());
    real_ = fftw_alloc_real(n_);
    freq_ = fftw_alloc_complex(bins());
    if (!real_ || !freq_) throw NumericError("fft: allocation failed");
    fwd_ = fftw_plan_dft_r2c_1d(static_cast<int>(n_), real_, freq_, FFTW_ESTIMATE);
    inv_ = fftw_plan_dft_c2r_1d(static_cast<int>(n_), freq_, real_, FFTW_ESTIMATE);
  }

  ~RealFft() {
    std::lock_guard<std::mutex> lock(plan_mutex());
    if (fwd_) fftw_destroy_plan(fwd_);
    if (inv_) fftw_destroy_plan(inv_);
    if (real_) fftw_free(real_);
    if (freq_) fftw_free(freq_);
  }

  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  std::size_t size() const { return n_; }
  std::size_t bins() const { return n_ / 2 + 1; }

  /// x -> half spectrum (bins 0..n/2, bin j at angular frequency 2*pi*j/n).
  std::vector<std::complex<double>> forward(std::span<const double> x) {
    if (x.size() != n_) throw ConfigError("fft: input length mismatch");
    std::copy(x.begin(), x.end(), real_);
    fftw_execute(fwd_);
    std::vector<std::complex<double>> out(bins());
    for (std::size_t j = 0; j < bins(); ++j) out[j] = {freq_[j][0], freq_[j][1]};
    return out;
  }

  /// Half spectrum -> signal, scaled by 1/n so inverse(forward(x)) == x.
  std::vector<double> inverse(std::span<const std::complex<double>> spectrum) {
    if (spectrum.size() != bins()) throw ConfigError("fft: spectrum length mismatch");
    for (std::size_t j = 0; j < bins(); ++j) {
      freq_[j][0] = spectrum[j].real();
      freq_[j][1] = spectrum[j].imag();
    }
    fftw_execute(inv_);
    std::vector<double> out(n_);
    const double scale = 1.0 / static_cast<double>(n_);
    for (std::size_t i = 0; i < n_; ++i) out[i] = real_[i] * scale;
    return out;
  }

 private:
  static std::mutex& plan_mutex() {
    static std::mutex m;
    return m;
  }

  std::size_t n_ = 0;
  double* real_ = nullptr;
  fftw_complex* freq_ = nullptr;
  fftw_plan fwd_ = nullptr;
  fftw_plan inv_ = nullptr;
};

/// Magnitude half-spectrum of x, zero-padded to `padded_length` when that is
/// larger than the signal (finer sampling of the same discrete-time Fourier
/// transform).
inline std::vector<double> magnitude_spectrum(std::span<const double> x,
                                              std::size_t padded_length = 0) {
  const std::size_t p = std::max(padded_length, x.size());
  std::vector<double> buf(p, 0.0);
  std::copy(x.begin(), x.end(), buf.begin());
  RealFft fft(p);
  const auto spec = fft.forward(buf);
  std::vector<double> mag(spec.size());
  for (std::size_t j = 0; j < spec.size(); ++j) mag[j] = std::abs(spec[j]);
  return mag;
}

}  // namespace frontcast
