// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace doakit {

/// Real-to-complex FFT of a fixed size, backed by FFTW.
///
/// Plans are created with FFTW_ESTIMATE so results do not depend on timing
/// measurements. Plan creation is serialized internally; execution on
/// distinct instances is thread-safe.
class RealFft {
 public:
  explicit RealFft(std::size_t n);
  ~RealFft();
  RealFft(RealFft&&) noexcept;
  RealFft& operator=(RealFft&&) noexcept;
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  std::size_t size() const { return n_; }

  /// `in` has size() samples, `out` receives size()/2 + 1 bins.
  void forward(std::span<const double> in, std::span<std::complex<double>> out);

  /// Unnormalized inverse: forward followed by inverse scales by size().
  void inverse(std::span<const std::complex<double>> in, std::span<double> out);

 private:
  struct Impl;
  std::size_t n_;
  std::unique_ptr<Impl> impl_;
};

std::size_t next_pow2(std::size_t n);

/// Full linear convolution (length a.size() + b.size() - 1) by FFT.
std::vector<double> fft_convolve(std::span<const double> a, std::span<const double> b);

/// Convolves one signal with several kernels of equal length, sharing the
/// signal transform.
std::vector<std::vector<double>> fft_convolve_many(std::span<const double> signal,
                                                   std::span<const std::vector<double>> kernels);

}  // namespace doakit
