// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "doakit/nn/tensor.hpp"
#include "doakit/rng.hpp"

namespace doakit::nn {

enum class Activation { kLinear, kRelu, kSigmoid, kTanh };

/// Uniform(-a, a) with a = sqrt(3 / fan_in): unit output variance for unit
/// input variance in a linear layer.
template <class T>
void init_uniform_fan_in(std::vector<T>& values, std::size_t fan_in, Rng& rng);

/// 3x3 convolution over (time, frequency), stride 1, zero padding, followed
/// by an optional activation. Weights are stored [kt][kf][in][out].
template <class T>
class Conv2d final : public Layer<T> {
 public:
  Conv2d(std::string name, std::size_t in_channels, std::size_t out_channels,
         Activation activation = Activation::kRelu);

  Batch<T> forward(const Batch<T>& input, Phase phase) override;
  Batch<T> backward(const Batch<T>& grad_output) override;
  void collect(std::vector<Param<T>*>& out) override;
  std::string describe() const override;

  Param<T>& weight() { return weight_; }
  Param<T>& bias() { return bias_; }
  void initialize(Rng& rng);
  /// Items of a batch are processed on up to this many threads. Results do
  /// not depend on the value: per-item gradients are reduced in item order.
  void set_workers(std::size_t workers) { workers_ = workers == 0 ? 1 : workers; }
  /// A network's first layer has no use for the input gradient; skipping it
  /// saves a third of the backward GEMM work. backward then returns zeros.
  void set_input_gradient(bool enabled) { input_gradient_ = enabled; }

  static std::size_t parameter_count(std::size_t in, std::size_t out) { return 9 * in * out + out; }

 private:
  std::size_t in_, out_;
  Activation activation_;
  Param<T> weight_, bias_;
  std::size_t workers_ = 1;
  bool input_gradient_ = true;
  Batch<T> input_cache_, output_cache_;
};

/// Per-channel normalization with learned scale and shift. Statistics span
/// every item, frame and frequency bin of the batch.
template <class T>
class BatchNorm final : public Layer<T> {
 public:
  BatchNorm(std::string name, std::size_t channels, double momentum = 0.99, double epsilon = 1e-5);

  Batch<T> forward(const Batch<T>& input, Phase phase) override;
  Batch<T> backward(const Batch<T>& grad_output) override;
  void collect(std::vector<Param<T>*>& out) override;
  std::string describe() const override;

  Param<T>& gamma() { return gamma_; }
  Param<T>& beta() { return beta_; }
  Param<T>& running_mean() { return running_mean_; }
  Param<T>& running_var() { return running_var_; }
  /// Call after loading stored statistics.
  void mark_running_initialized() { running_initialized_ = true; }

  /// Calibrate-phase forwards between these two calls replace the running
  /// statistics by the count-weighted average of the batch statistics.
  void begin_calibration();
  void end_calibration();

  static std::size_t parameter_count(std::size_t channels) { return 2 * channels; }

 private:
  std::size_t channels_;
  double momentum_, epsilon_;
  Param<T> gamma_, beta_, running_mean_, running_var_;
  // The first training batch seeds the running statistics instead of
  // blending into (0, 1); with momentum 0.99 the defaults would otherwise
  // dominate inference for hundreds of steps.
  bool running_initialized_ = false;
  Batch<T> normalized_cache_;
  std::vector<T> inv_std_cache_;
  std::vector<double> calib_mean_, calib_var_;
  std::size_t calib_count_ = 0;
};

/// Non-overlapping max pooling along frequency only.
template <class T>
class MaxPoolFreq final : public Layer<T> {
 public:
  explicit MaxPoolFreq(std::size_t pool);

  Batch<T> forward(const Batch<T>& input, Phase phase) override;
  Batch<T> backward(const Batch<T>& grad_output) override;
  std::string describe() const override;

 private:
  std::size_t pool_;
  Shape input_shape_{};
  std::vector<std::vector<std::uint32_t>> argmax_;
};

/// Inverted dropout: kept activations are scaled by 1 / (1 - rate) during
/// training; identity at inference.
template <class T>
class Dropout final : public Layer<T> {
 public:
  Dropout(double rate, std::uint64_t seed);

  Batch<T> forward(const Batch<T>& input, Phase phase) override;
  Batch<T> backward(const Batch<T>& grad_output) override;
  std::string describe() const override;

  double rate() const { return rate_; }

 private:
  double rate_;
  Rng rng_;
  bool active_ = false;
  std::vector<std::vector<T>> masks_;
};

/// Time-distributed affine map over each frame's flattened row.
template <class T>
class Dense final : public Layer<T> {
 public:
  Dense(std::string name, std::size_t in, std::size_t out, Activation activation = Activation::kLinear);

  Batch<T> forward(const Batch<T>& input, Phase phase) override;
  Batch<T> backward(const Batch<T>& grad_output) override;
  void collect(std::vector<Param<T>*>& out) override;
  std::string describe() const override;

  Param<T>& weight() { return weight_; }
  Param<T>& bias() { return bias_; }
  void initialize(Rng& rng);

  static std::size_t parameter_count(std::size_t in, std::size_t out) { return in * out + out; }

 private:
  std::size_t in_, out_;
  Activation activation_;
  Param<T> weight_, bias_;
  Batch<T> input_cache_, output_cache_;
};

/// Changes (freq, chan) while keeping time; the data is untouched.
template <class T>
class Reshape final : public Layer<T> {
 public:
  Reshape(std::size_t freq, std::size_t chan) : freq_(freq), chan_(chan) {}

  Batch<T> forward(const Batch<T>& input, Phase phase) override;
  Batch<T> backward(const Batch<T>& grad_output) override;
  std::string describe() const override;

 private:
  std::size_t freq_, chan_;
  Shape input_shape_{};
};

/// Extends the frequency axis to `width` by repeating the last bin.
template <class T>
class EdgePadFreq final : public Layer<T> {
 public:
  explicit EdgePadFreq(std::size_t width) : width_(width) {}

  Batch<T> forward(const Batch<T>& input, Phase phase) override;
  Batch<T> backward(const Batch<T>& grad_output) override;
  std::string describe() const override;

 private:
  std::size_t width_;
  Shape input_shape_{};
};

}  // namespace doakit::nn
