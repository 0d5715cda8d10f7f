// SPDX-License-Identifier: Apache-2.0
#include "doakit/dsp.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cstring>
#include <mutex>
#include <stdexcept>

namespace doakit {
namespace {

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

struct RealFft::Impl {
  double* time = nullptr;
  fftw_complex* freq = nullptr;
  fftw_plan fwd = nullptr;
  fftw_plan inv = nullptr;

  explicit Impl(std::size_t n) {
    std::lock_guard lock(planner_mutex());
    time = fftw_alloc_real(n);
    freq = fftw_alloc_complex(n / 2 + 1);
    const int ni = static_cast<int>(n);
    fwd = fftw_plan_dft_r2c_1d(ni, time, freq, FFTW_ESTIMATE);
    inv = fftw_plan_dft_c2r_1d(ni, freq, time, FFTW_ESTIMATE);
    if (!fwd || !inv) throw std::runtime_error("FFTW plan creation failed");
  }
  ~Impl() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(inv);
    fftw_free(time);
    fftw_free(freq);
  }
};

RealFft::RealFft(std::size_t n) : n_(n) {
  if (n < 2 || n % 2 != 0) throw std::invalid_argument("FFT size must be even and >= 2");
  impl_ = std::make_unique<Impl>(n);
}
RealFft::~RealFft() = default;
RealFft::RealFft(RealFft&&) noexcept = default;
RealFft& RealFft::operator=(RealFft&&) noexcept = default;

void RealFft::forward(std::span<const double> in, std::span<std::complex<double>> out) {
  if (in.size() != n_ || out.size() != n_ / 2 + 1) throw std::invalid_argument("FFT size mismatch");
  std::copy(in.begin(), in.end(), impl_->time);
  fftw_execute(impl_->fwd);
  std::memcpy(static_cast<void*>(out.data()), impl_->freq, out.size() * sizeof(fftw_complex));
}

void RealFft::inverse(std::span<const std::complex<double>> in, std::span<double> out) {
  if (out.size() != n_ || in.size() != n_ / 2 + 1) throw std::invalid_argument("FFT size mismatch");
  std::memcpy(impl_->freq, in.data(), in.size() * sizeof(fftw_complex));
  fftw_execute(impl_->inv);
  std::copy(impl_->time, impl_->time + n_, out.begin());
}

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

std::vector<std::vector<double>> fft_convolve_many(std::span<const double> signal,
                                                   std::span<const std::vector<double>> kernels) {
  std::vector<std::vector<double>> out;
  if (signal.empty() || kernels.empty()) return out;
  const std::size_t klen = kernels.front().size();
  for (const auto& k : kernels) {
    if (k.size() != klen || klen == 0) throw std::invalid_argument("kernels must share a length");
  }
  const std::size_t len = signal.size() + klen - 1;
  const std::size_t n = std::max<std::size_t>(next_pow2(len), 2);
  RealFft fft(n);
  std::vector<double> buf(n, 0.0);
  std::vector<std::complex<double>> sig_spec(n / 2 + 1), ker_spec(n / 2 + 1);
  std::copy(signal.begin(), signal.end(), buf.begin());
  fft.forward(buf, sig_spec);
  const double scale = 1.0 / static_cast<double>(n);
  for (const auto& k : kernels) {
    std::fill(buf.begin(), buf.end(), 0.0);
    std::copy(k.begin(), k.end(), buf.begin());
    fft.forward(buf, ker_spec);
    for (std::size_t i = 0; i < ker_spec.size(); ++i) ker_spec[i] *= sig_spec[i] * scale;
    fft.inverse(ker_spec, buf);
    out.emplace_back(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(len));
  }
  return out;
}

std::vector<double> fft_convolve(std::span<const double> a, std::span<const double> b) {
  std::vector<std::vector<double>> k{std::vector<double>(b.begin(), b.end())};
  auto r = fft_convolve_many(a, k);
  return r.empty() ? std::vector<double>{} : std::move(r.front());
}

}  // namespace doakit
