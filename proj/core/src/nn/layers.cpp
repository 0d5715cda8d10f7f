// SPDX-License-Identifier: Apache-2.0
#include "doakit/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Core>

#include "doakit/parallel.hpp"

namespace doakit::nn {

namespace {

template <class T>
T activate(Activation a, T x) {
  switch (a) {
    case Activation::kLinear:
      return x;
    case Activation::kRelu:
      return x > T(0) ? x : T(0);
    case Activation::kSigmoid:
      return T(1) / (T(1) + std::exp(-x));
    case Activation::kTanh:
      return std::tanh(x);
  }
  return x;
}

// Derivative expressed through the activation output y.
template <class T>
T activate_grad(Activation a, T y) {
  switch (a) {
    case Activation::kLinear:
      return T(1);
    case Activation::kRelu:
      return y > T(0) ? T(1) : T(0);
    case Activation::kSigmoid:
      return y * (T(1) - y);
    case Activation::kTanh:
      return T(1) - y * y;
  }
  return T(1);
}

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::kLinear:
      return "linear";
    case Activation::kRelu:
      return "relu";
    case Activation::kSigmoid:
      return "sigmoid";
    case Activation::kTanh:
      return "tanh";
  }
  return "?";
}

// Row-major C = alpha * op(A) op(B) + beta * C with op(A) m x k, op(B) k x n.
template <class T>
void gemm(bool ta, bool tb, std::size_t m, std::size_t n, std::size_t k, T alpha, const T* a, const T* b, T beta,
          T* c) {
  using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using ConstMap = Eigen::Map<const Matrix>;
  const auto em = static_cast<Eigen::Index>(m), en = static_cast<Eigen::Index>(n), ek = static_cast<Eigen::Index>(k);
  Eigen::Map<Matrix> cm(c, em, en);
  if (beta == T(0)) {
    cm.setZero();
  } else if (beta != T(1)) {
    cm *= beta;
  }
  const ConstMap am(a, ta ? ek : em, ta ? em : ek);
  const ConstMap bm(b, tb ? en : ek, tb ? ek : en);
  if (ta && tb) {
    cm.noalias() += alpha * am.transpose() * bm.transpose();
  } else if (ta) {
    cm.noalias() += alpha * am.transpose() * bm;
  } else if (tb) {
    cm.noalias() += alpha * am * bm.transpose();
  } else {
    cm.noalias() += alpha * am * bm;
  }
}

void require_batch(bool ok, const std::string& layer, const std::string& what) {
  if (!ok) throw std::invalid_argument(layer + ": " + what);
}

}  // namespace

template <class T>
void init_uniform_fan_in(std::vector<T>& values, std::size_t fan_in, Rng& rng) {
  const double limit = std::sqrt(3.0 / static_cast<double>(std::max<std::size_t>(fan_in, 1)));
  for (auto& v : values) v = static_cast<T>(rng.uniform(-limit, limit));
}

// ---------------------------------------------------------------- Conv2d

template <class T>
Conv2d<T>::Conv2d(std::string name, std::size_t in_channels, std::size_t out_channels, Activation activation)
    : in_(in_channels),
      out_(out_channels),
      activation_(activation),
      weight_(name + "/kernel", {3, 3, in_channels, out_channels}),
      bias_(name + "/bias", {out_channels}) {
  if (in_ == 0 || out_ == 0) throw std::invalid_argument("conv2d: channel counts must be positive");
}

template <class T>
void Conv2d<T>::initialize(Rng& rng) {
  init_uniform_fan_in(weight_.value, 9 * in_, rng);
  std::fill(bias_.value.begin(), bias_.value.end(), T(0));
}

template <class T>
void Conv2d<T>::collect(std::vector<Param<T>*>& out) {
  out.push_back(&weight_);
  out.push_back(&bias_);
}

template <class T>
std::string Conv2d<T>::describe() const {
  return "conv2d 3x3 " + std::to_string(in_) + "->" + std::to_string(out_) + " " + activation_name(activation_);
}

// Row p of `cols` holds the 3x3 neighbourhood of pixel p, [kt][kf][in],
// zeros outside the map.
template <class T>
void im2col(const Tensor<T>& x, std::vector<T>& cols) {
  const std::size_t nt = x.shape().time, nf = x.shape().freq, ci = x.shape().chan;
  const std::size_t k_n = 9 * ci;
  cols.assign(nt * nf * k_n, T(0));
  const T* xd = x.data();
  for (std::size_t t = 0; t < nt; ++t) {
    for (std::size_t f = 0; f < nf; ++f) {
      T* row = cols.data() + (t * nf + f) * k_n;
      for (std::size_t kt = 0; kt < 3; ++kt) {
        if (t + kt < 1 || t + kt - 1 >= nt) continue;
        for (std::size_t kf = 0; kf < 3; ++kf) {
          if (f + kf < 1 || f + kf - 1 >= nf) continue;
          const T* src = xd + ((t + kt - 1) * nf + (f + kf - 1)) * ci;
          std::copy(src, src + ci, row + (kt * 3 + kf) * ci);
        }
      }
    }
  }
}

template <class T>
void col2im_add(const std::vector<T>& cols, Tensor<T>& gx) {
  const std::size_t nt = gx.shape().time, nf = gx.shape().freq, ci = gx.shape().chan;
  const std::size_t k_n = 9 * ci;
  T* gd = gx.data();
  for (std::size_t t = 0; t < nt; ++t) {
    for (std::size_t f = 0; f < nf; ++f) {
      const T* row = cols.data() + (t * nf + f) * k_n;
      for (std::size_t kt = 0; kt < 3; ++kt) {
        if (t + kt < 1 || t + kt - 1 >= nt) continue;
        for (std::size_t kf = 0; kf < 3; ++kf) {
          if (f + kf < 1 || f + kf - 1 >= nf) continue;
          T* dst = gd + ((t + kt - 1) * nf + (f + kf - 1)) * ci;
          const T* src = row + (kt * 3 + kf) * ci;
          for (std::size_t c = 0; c < ci; ++c) dst[c] += src[c];
        }
      }
    }
  }
}

template <class T>
Batch<T> Conv2d<T>::forward(const Batch<T>& input, Phase phase) {
  for (const auto& x : input) {
    require_batch(x.shape().chan == in_, weight_.name,
                  "expected " + std::to_string(in_) + " channels, got " + to_string(x.shape()));
  }
  Batch<T> output(input.size());
  const std::size_t co_n = out_, k_n = 9 * in_;
  parallel_for(input.size(), workers_, [&](std::size_t item) {
    const Tensor<T>& x = input[item];
    const std::size_t pixels = x.shape().time * x.shape().freq;
    std::vector<T> cols;
    im2col(x, cols);
    Tensor<T> y({x.shape().time, x.shape().freq, co_n});
    for (std::size_t p = 0; p < pixels; ++p) std::copy(bias_.value.begin(), bias_.value.end(), y.data() + p * co_n);
    gemm(false, false, pixels, co_n, k_n, T(1), cols.data(), weight_.value.data(), T(1), y.data());
    if (activation_ != Activation::kLinear) {
      for (auto& v : y.values()) v = activate(activation_, v);
    }
    output[item] = std::move(y);
  });
  if (phase == Phase::kTrain) {
    input_cache_ = input;
    output_cache_ = output;
  } else {
    input_cache_.clear();
    output_cache_.clear();
  }
  return output;
}

template <class T>
Batch<T> Conv2d<T>::backward(const Batch<T>& grad_output) {
  require_batch(grad_output.size() == input_cache_.size(), weight_.name, "backward without matching forward");
  const std::size_t co_n = out_, k_n = 9 * in_;
  const std::size_t n = grad_output.size();
  Batch<T> grad_input(n);
  std::vector<std::vector<T>> gw(n), gb(n);
  parallel_for(n, workers_, [&](std::size_t item) {
    const Tensor<T>& x = input_cache_[item];
    const Tensor<T>& y = output_cache_[item];
    require_batch(grad_output[item].shape() == y.shape(), weight_.name, "gradient shape mismatch");
    const std::size_t pixels = x.shape().time * x.shape().freq;
    std::vector<T> g(grad_output[item].values());
    if (activation_ != Activation::kLinear) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] *= activate_grad(activation_, y.values()[i]);
    }
    gb[item].assign(co_n, T(0));
    for (std::size_t p = 0; p < pixels; ++p) {
      for (std::size_t co = 0; co < co_n; ++co) gb[item][co] += g[p * co_n + co];
    }
    std::vector<T> cols;
    im2col(x, cols);
    gw[item].assign(k_n * co_n, T(0));
    // dW = cols^T g, dcols = g W^T
    gemm(true, false, k_n, co_n, pixels, T(1), cols.data(), g.data(), T(0), gw[item].data());
    Tensor<T> gx(x.shape());
    if (input_gradient_) {
      gemm(false, true, pixels, k_n, co_n, T(1), g.data(), weight_.value.data(), T(0), cols.data());
      col2im_add(cols, gx);
    }
    grad_input[item] = std::move(gx);
  });
  for (std::size_t item = 0; item < n; ++item) {
    for (std::size_t i = 0; i < gw[item].size(); ++i) weight_.grad[i] += gw[item][i];
    for (std::size_t i = 0; i < co_n; ++i) bias_.grad[i] += gb[item][i];
  }
  input_cache_.clear();
  output_cache_.clear();
  return grad_input;
}

// ------------------------------------------------------------- BatchNorm

template <class T>
BatchNorm<T>::BatchNorm(std::string name, std::size_t channels, double momentum, double epsilon)
    : channels_(channels),
      momentum_(momentum),
      epsilon_(epsilon),
      gamma_(name + "/gamma", {channels}),
      beta_(name + "/beta", {channels}),
      running_mean_(name + "/moving_mean", {channels}, false),
      running_var_(name + "/moving_variance", {channels}, false) {
  if (channels == 0) throw std::invalid_argument("batch_norm: channel count must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("batch_norm: momentum must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw std::invalid_argument("batch_norm: epsilon must be positive");
  std::fill(gamma_.value.begin(), gamma_.value.end(), T(1));
  std::fill(running_var_.value.begin(), running_var_.value.end(), T(1));
}

template <class T>
void BatchNorm<T>::collect(std::vector<Param<T>*>& out) {
  out.push_back(&gamma_);
  out.push_back(&beta_);
  out.push_back(&running_mean_);
  out.push_back(&running_var_);
}

template <class T>
std::string BatchNorm<T>::describe() const {
  return "batch_norm " + std::to_string(channels_);
}

template <class T>
Batch<T> BatchNorm<T>::forward(const Batch<T>& input, Phase phase) {
  const std::size_t c_n = channels_;
  for (const auto& x : input) {
    require_batch(x.shape().chan == c_n, gamma_.name, "channel mismatch " + to_string(x.shape()));
  }
  Batch<T> output;
  output.reserve(input.size());
  if (phase == Phase::kInfer) {
    std::vector<T> scale(c_n), shift(c_n);
    for (std::size_t c = 0; c < c_n; ++c) {
      const double inv = 1.0 / std::sqrt(static_cast<double>(running_var_.value[c]) + epsilon_);
      scale[c] = static_cast<T>(gamma_.value[c] * inv);
      shift[c] = static_cast<T>(beta_.value[c] - gamma_.value[c] * running_mean_.value[c] * inv);
    }
    for (const auto& x : input) {
      Tensor<T> y(x.shape());
      const T* __restrict xp = x.data();
      T* __restrict yp = y.data();
      for (std::size_t p = 0, pixels = x.size() / c_n; p < pixels; ++p, xp += c_n, yp += c_n) {
        for (std::size_t c = 0; c < c_n; ++c) yp[c] = xp[c] * scale[c] + shift[c];
      }
      output.push_back(std::move(y));
    }
    normalized_cache_.clear();
    return output;
  }

  // Two-pass statistics in double with a fixed summation order.
  std::vector<double> mean(c_n, 0.0), var(c_n, 0.0);
  std::size_t count = 0;
  for (const auto& x : input) {
    const std::size_t pixels = x.size() / c_n;
    count += pixels;
    const T* __restrict xp = x.data();
    double* __restrict m = mean.data();
    for (std::size_t p = 0; p < pixels; ++p, xp += c_n) {
      for (std::size_t c = 0; c < c_n; ++c) m[c] += xp[c];
    }
  }
  require_batch(count > 0, gamma_.name, "empty batch");
  for (auto& m : mean) m /= static_cast<double>(count);
  for (const auto& x : input) {
    const std::size_t pixels = x.size() / c_n;
    const T* __restrict xp = x.data();
    const double* __restrict m = mean.data();
    double* __restrict v = var.data();
    for (std::size_t p = 0; p < pixels; ++p, xp += c_n) {
      for (std::size_t c = 0; c < c_n; ++c) {
        const double d = xp[c] - m[c];
        v[c] += d * d;
      }
    }
  }
  for (auto& v : var) v /= static_cast<double>(count);

  inv_std_cache_.assign(c_n, T(0));
  for (std::size_t c = 0; c < c_n; ++c) inv_std_cache_[c] = static_cast<T>(1.0 / std::sqrt(var[c] + epsilon_));

  const bool keep = phase == Phase::kTrain;
  normalized_cache_.clear();
  if (keep) normalized_cache_.reserve(input.size());
  std::vector<T> mean_t(mean.begin(), mean.end());
  for (const auto& x : input) {
    Tensor<T> xhat(x.shape());
    Tensor<T> y(x.shape());
    const T* __restrict xp = x.data();
    T* __restrict hp = xhat.data();
    T* __restrict yp = y.data();
    const T* __restrict inv = inv_std_cache_.data();
    for (std::size_t p = 0, pixels = x.size() / c_n; p < pixels; ++p, xp += c_n, hp += c_n, yp += c_n) {
      for (std::size_t c = 0; c < c_n; ++c) {
        const T h = (xp[c] - mean_t[c]) * inv[c];
        hp[c] = h;
        yp[c] = gamma_.value[c] * h + beta_.value[c];
      }
    }
    if (keep) normalized_cache_.push_back(std::move(xhat));
    output.push_back(std::move(y));
  }

  const double unbias = count > 1 ? static_cast<double>(count) / static_cast<double>(count - 1) : 1.0;
  if (phase == Phase::kCalibrate) {
    if (calib_mean_.size() != c_n) throw std::logic_error(gamma_.name + ": calibrate forward outside a calibration");
    for (std::size_t c = 0; c < c_n; ++c) {
      calib_mean_[c] += mean[c] * static_cast<double>(count);
      calib_var_[c] += var[c] * unbias * static_cast<double>(count);
    }
    calib_count_ += count;
    return output;
  }
  for (std::size_t c = 0; c < c_n; ++c) {
    if (running_initialized_) {
      running_mean_.value[c] = static_cast<T>(momentum_ * running_mean_.value[c] + (1.0 - momentum_) * mean[c]);
      running_var_.value[c] =
          static_cast<T>(momentum_ * running_var_.value[c] + (1.0 - momentum_) * var[c] * unbias);
    } else {
      running_mean_.value[c] = static_cast<T>(mean[c]);
      running_var_.value[c] = static_cast<T>(var[c] * unbias);
    }
  }
  running_initialized_ = true;
  return output;
}

template <class T>
void BatchNorm<T>::begin_calibration() {
  calib_mean_.assign(channels_, 0.0);
  calib_var_.assign(channels_, 0.0);
  calib_count_ = 0;
}

template <class T>
void BatchNorm<T>::end_calibration() {
  if (calib_mean_.size() != channels_) throw std::logic_error(gamma_.name + ": end_calibration without begin");
  if (calib_count_ > 0) {
    for (std::size_t c = 0; c < channels_; ++c) {
      running_mean_.value[c] = static_cast<T>(calib_mean_[c] / static_cast<double>(calib_count_));
      running_var_.value[c] = static_cast<T>(calib_var_[c] / static_cast<double>(calib_count_));
    }
    running_initialized_ = true;
  }
  calib_mean_.clear();
  calib_var_.clear();
  calib_count_ = 0;
}

template <class T>
Batch<T> BatchNorm<T>::backward(const Batch<T>& grad_output) {
  require_batch(grad_output.size() == normalized_cache_.size(), gamma_.name, "backward without train forward");
  const std::size_t c_n = channels_;
  std::vector<double> sum_g(c_n, 0.0), sum_gx(c_n, 0.0);
  std::size_t count = 0;
  for (std::size_t item = 0; item < grad_output.size(); ++item) {
    const auto& g = grad_output[item].values();
    const auto& h = normalized_cache_[item].values();
    require_batch(g.size() == h.size(), gamma_.name, "gradient shape mismatch");
    const std::size_t pixels = g.size() / c_n;
    count += pixels;
    const T* __restrict gp = g.data();
    const T* __restrict hp = h.data();
    double* __restrict sg = sum_g.data();
    double* __restrict sgx = sum_gx.data();
    for (std::size_t p = 0; p < pixels; ++p, gp += c_n, hp += c_n) {
      for (std::size_t c = 0; c < c_n; ++c) {
        sg[c] += gp[c];
        sgx[c] += static_cast<double>(gp[c]) * hp[c];
      }
    }
  }
  for (std::size_t c = 0; c < c_n; ++c) {
    gamma_.grad[c] += static_cast<T>(sum_gx[c]);
    beta_.grad[c] += static_cast<T>(sum_g[c]);
  }
  // dx = gamma * inv_std * (g - mean(g) - xhat * mean(g * xhat))
  const double inv_n = 1.0 / static_cast<double>(count);
  Batch<T> grad_input;
  grad_input.reserve(grad_output.size());
  std::vector<T> k(c_n), mg(c_n), mgx(c_n);
  for (std::size_t c = 0; c < c_n; ++c) {
    k[c] = static_cast<T>(gamma_.value[c] * inv_std_cache_[c]);
    mg[c] = static_cast<T>(sum_g[c] * inv_n);
    mgx[c] = static_cast<T>(sum_gx[c] * inv_n);
  }
  for (std::size_t item = 0; item < grad_output.size(); ++item) {
    const T* __restrict gp = grad_output[item].data();
    const T* __restrict hp = normalized_cache_[item].data();
    Tensor<T> gx(grad_output[item].shape());
    T* __restrict op = gx.data();
    for (std::size_t p = 0, pixels = gx.size() / c_n; p < pixels; ++p, gp += c_n, hp += c_n, op += c_n) {
      for (std::size_t c = 0; c < c_n; ++c) op[c] = k[c] * (gp[c] - mg[c] - hp[c] * mgx[c]);
    }
    grad_input.push_back(std::move(gx));
  }
  normalized_cache_.clear();
  return grad_input;
}

// ----------------------------------------------------------- MaxPoolFreq

template <class T>
MaxPoolFreq<T>::MaxPoolFreq(std::size_t pool) : pool_(pool) {
  if (pool == 0) throw std::invalid_argument("maxpool_freq: pool must be positive");
}

template <class T>
std::string MaxPoolFreq<T>::describe() const {
  return "maxpool_freq " + std::to_string(pool_);
}

template <class T>
Batch<T> MaxPoolFreq<T>::forward(const Batch<T>& input, Phase phase) {
  Batch<T> output;
  output.reserve(input.size());
  argmax_.assign(phase == Phase::kTrain ? input.size() : 0, {});
  for (std::size_t item = 0; item < input.size(); ++item) {
    const Tensor<T>& x = input[item];
    const Shape s = x.shape();
    if (s.freq % pool_ != 0) {
      throw std::invalid_argument("maxpool_freq: frequency size " + std::to_string(s.freq) +
                                  " is not divisible by " + std::to_string(pool_));
    }
    input_shape_ = s;
    const std::size_t nf = s.freq / pool_;
    Tensor<T> y({s.time, nf, s.chan});
    std::vector<std::uint32_t> arg(phase == Phase::kTrain ? y.size() : 0);
    for (std::size_t t = 0; t < s.time; ++t) {
      for (std::size_t f = 0; f < nf; ++f) {
        for (std::size_t c = 0; c < s.chan; ++c) {
          std::size_t best = f * pool_;
          T value = x.at(t, best, c);
          for (std::size_t k = 1; k < pool_; ++k) {
            const T v = x.at(t, f * pool_ + k, c);
            if (v > value) {
              value = v;
              best = f * pool_ + k;
            }
          }
          y.at(t, f, c) = value;
          if (!arg.empty()) arg[(t * nf + f) * s.chan + c] = static_cast<std::uint32_t>(best);
        }
      }
    }
    if (phase == Phase::kTrain) argmax_[item] = std::move(arg);
    output.push_back(std::move(y));
  }
  return output;
}

template <class T>
Batch<T> MaxPoolFreq<T>::backward(const Batch<T>& grad_output) {
  require_batch(grad_output.size() == argmax_.size(), "maxpool_freq", "backward without train forward");
  Batch<T> grad_input;
  grad_input.reserve(grad_output.size());
  for (std::size_t item = 0; item < grad_output.size(); ++item) {
    const Tensor<T>& g = grad_output[item];
    const Shape s = g.shape();
    Tensor<T> gx({s.time, s.freq * pool_, s.chan});
    const auto& arg = argmax_[item];
    require_batch(arg.size() == g.size(), "maxpool_freq", "gradient shape mismatch");
    for (std::size_t t = 0; t < s.time; ++t) {
      for (std::size_t f = 0; f < s.freq; ++f) {
        for (std::size_t c = 0; c < s.chan; ++c) {
          const std::size_t i = (t * s.freq + f) * s.chan + c;
          gx.at(t, arg[i], c) += g.values()[i];
        }
      }
    }
    grad_input.push_back(std::move(gx));
  }
  argmax_.clear();
  return grad_input;
}

// --------------------------------------------------------------- Dropout

template <class T>
Dropout<T>::Dropout(double rate, std::uint64_t seed) : rate_(rate), rng_(seed) {
  if (!(rate >= 0.0 && rate < 1.0)) throw std::invalid_argument("dropout: rate must lie in [0, 1)");
}

template <class T>
std::string Dropout<T>::describe() const {
  return "dropout " + std::to_string(rate_);
}

template <class T>
Batch<T> Dropout<T>::forward(const Batch<T>& input, Phase phase) {
  active_ = phase == Phase::kTrain && rate_ > 0.0;
  if (!active_) return input;
  const T scale = static_cast<T>(1.0 / (1.0 - rate_));
  masks_.assign(input.size(), {});
  Batch<T> output;
  output.reserve(input.size());
  for (std::size_t item = 0; item < input.size(); ++item) {
    auto& mask = masks_[item];
    mask.resize(input[item].size());
    Tensor<T> y(input[item].shape());
    for (std::size_t i = 0; i < mask.size(); ++i) {
      mask[i] = rng_.uniform() < rate_ ? T(0) : scale;
      y.values()[i] = input[item].values()[i] * mask[i];
    }
    output.push_back(std::move(y));
  }
  return output;
}

template <class T>
Batch<T> Dropout<T>::backward(const Batch<T>& grad_output) {
  if (!active_) return grad_output;
  require_batch(grad_output.size() == masks_.size(), "dropout", "backward without train forward");
  Batch<T> grad_input;
  grad_input.reserve(grad_output.size());
  for (std::size_t item = 0; item < grad_output.size(); ++item) {
    require_batch(grad_output[item].size() == masks_[item].size(), "dropout", "gradient shape mismatch");
    Tensor<T> gx(grad_output[item].shape());
    for (std::size_t i = 0; i < gx.size(); ++i) gx.values()[i] = grad_output[item].values()[i] * masks_[item][i];
    grad_input.push_back(std::move(gx));
  }
  masks_.clear();
  return grad_input;
}

// ----------------------------------------------------------------- Dense

template <class T>
Dense<T>::Dense(std::string name, std::size_t in, std::size_t out, Activation activation)
    : in_(in), out_(out), activation_(activation), weight_(name + "/kernel", {in, out}), bias_(name + "/bias", {out}) {
  if (in == 0 || out == 0) throw std::invalid_argument("dense: sizes must be positive");
}

template <class T>
void Dense<T>::initialize(Rng& rng) {
  init_uniform_fan_in(weight_.value, in_, rng);
  std::fill(bias_.value.begin(), bias_.value.end(), T(0));
}

template <class T>
void Dense<T>::collect(std::vector<Param<T>*>& out) {
  out.push_back(&weight_);
  out.push_back(&bias_);
}

template <class T>
std::string Dense<T>::describe() const {
  return "dense " + std::to_string(in_) + "->" + std::to_string(out_) + " " + activation_name(activation_);
}

template <class T>
Batch<T> Dense<T>::forward(const Batch<T>& input, Phase phase) {
  Batch<T> output;
  output.reserve(input.size());
  for (const auto& x : input) {
    require_batch(x.shape().row() == in_, weight_.name,
                  "expected rows of " + std::to_string(in_) + ", got " + to_string(x.shape()));
    const std::size_t nt = x.shape().time;
    Tensor<T> y({nt, 1, out_});
    for (std::size_t t = 0; t < nt; ++t) {
      T* __restrict o = y.data() + t * out_;
      const T* __restrict xi = x.data() + t * in_;
      std::copy(bias_.value.begin(), bias_.value.end(), o);
      for (std::size_t i = 0; i < in_; ++i) {
        const T xv = xi[i];
        if (xv == T(0)) continue;
        const T* __restrict wr = weight_.value.data() + i * out_;
        for (std::size_t j = 0; j < out_; ++j) o[j] += xv * wr[j];
      }
      if (activation_ != Activation::kLinear) {
        for (std::size_t j = 0; j < out_; ++j) o[j] = activate(activation_, o[j]);
      }
    }
    output.push_back(std::move(y));
  }
  if (phase == Phase::kTrain) {
    input_cache_ = input;
    output_cache_ = output;
  } else {
    input_cache_.clear();
    output_cache_.clear();
  }
  return output;
}

template <class T>
Batch<T> Dense<T>::backward(const Batch<T>& grad_output) {
  require_batch(grad_output.size() == input_cache_.size(), weight_.name, "backward without train forward");
  Batch<T> grad_input;
  grad_input.reserve(grad_output.size());
  std::vector<T> g(out_);
  for (std::size_t item = 0; item < grad_output.size(); ++item) {
    const Tensor<T>& x = input_cache_[item];
    const Tensor<T>& y = output_cache_[item];
    require_batch(grad_output[item].shape() == y.shape(), weight_.name, "gradient shape mismatch");
    Tensor<T> gx(x.shape());
    for (std::size_t t = 0; t < x.shape().time; ++t) {
      const T* go = grad_output[item].data() + t * out_;
      const T* yo = y.data() + t * out_;
      for (std::size_t j = 0; j < out_; ++j) g[j] = go[j] * activate_grad(activation_, yo[j]);
      for (std::size_t j = 0; j < out_; ++j) bias_.grad[j] += g[j];
      const T* xi = x.data() + t * in_;
      T* gxi = gx.data() + t * in_;
      for (std::size_t i = 0; i < in_; ++i) {
        const T* __restrict wr = weight_.value.data() + i * out_;
        T* __restrict gwr = weight_.grad.data() + i * out_;
        const T xv = xi[i];
        T acc = T(0);
        for (std::size_t j = 0; j < out_; ++j) {
          acc += wr[j] * g[j];
          gwr[j] += xv * g[j];
        }
        gxi[i] = acc;
      }
    }
    grad_input.push_back(std::move(gx));
  }
  input_cache_.clear();
  output_cache_.clear();
  return grad_input;
}

// --------------------------------------------------------- Reshape / pad

template <class T>
std::string Reshape<T>::describe() const {
  return "reshape (" + std::to_string(freq_) + ", " + std::to_string(chan_) + ")";
}

template <class T>
Batch<T> Reshape<T>::forward(const Batch<T>& input, Phase) {
  Batch<T> output;
  output.reserve(input.size());
  for (const auto& x : input) {
    input_shape_ = x.shape();
    output.push_back(x.reshaped({x.shape().time, freq_, chan_}));
  }
  return output;
}

template <class T>
Batch<T> Reshape<T>::backward(const Batch<T>& grad_output) {
  Batch<T> grad_input;
  grad_input.reserve(grad_output.size());
  for (const auto& g : grad_output) grad_input.push_back(g.reshaped({g.shape().time, input_shape_.freq, input_shape_.chan}));
  return grad_input;
}

template <class T>
std::string EdgePadFreq<T>::describe() const {
  return "edge_pad_freq " + std::to_string(width_);
}

template <class T>
Batch<T> EdgePadFreq<T>::forward(const Batch<T>& input, Phase) {
  Batch<T> output;
  output.reserve(input.size());
  for (const auto& x : input) {
    const Shape s = x.shape();
    if (s.freq == 0 || s.freq > width_) {
      throw std::invalid_argument("edge_pad_freq: cannot pad " + to_string(s) + " to width " + std::to_string(width_));
    }
    input_shape_ = s;
    Tensor<T> y({s.time, width_, s.chan});
    for (std::size_t t = 0; t < s.time; ++t) {
      for (std::size_t f = 0; f < width_; ++f) {
        const std::size_t src = std::min(f, s.freq - 1);
        for (std::size_t c = 0; c < s.chan; ++c) y.at(t, f, c) = x.at(t, src, c);
      }
    }
    output.push_back(std::move(y));
  }
  return output;
}

template <class T>
Batch<T> EdgePadFreq<T>::backward(const Batch<T>& grad_output) {
  Batch<T> grad_input;
  grad_input.reserve(grad_output.size());
  for (const auto& g : grad_output) {
    const Shape s = g.shape();
    Tensor<T> gx({s.time, input_shape_.freq, s.chan});
    for (std::size_t t = 0; t < s.time; ++t) {
      for (std::size_t f = 0; f < s.freq; ++f) {
        const std::size_t dst = std::min(f, input_shape_.freq - 1);
        for (std::size_t c = 0; c < s.chan; ++c) gx.at(t, dst, c) += g.at(t, f, c);
      }
    }
    grad_input.push_back(std::move(gx));
  }
  return grad_input;
}

template void init_uniform_fan_in<float>(std::vector<float>&, std::size_t, Rng&);
template void init_uniform_fan_in<double>(std::vector<double>&, std::size_t, Rng&);

#define DOAKIT_INSTANTIATE(cls) \
  template class cls<float>;    \
  template class cls<double>;
DOAKIT_INSTANTIATE(Conv2d)
DOAKIT_INSTANTIATE(BatchNorm)
DOAKIT_INSTANTIATE(MaxPoolFreq)
DOAKIT_INSTANTIATE(Dropout)
DOAKIT_INSTANTIATE(Dense)
DOAKIT_INSTANTIATE(Reshape)
DOAKIT_INSTANTIATE(EdgePadFreq)
#undef DOAKIT_INSTANTIATE

}  // namespace doakit::nn
