// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace doakit::nn {

/// Up to three axes: time, frequency, channel. Row-major with channel
/// fastest, so a time slice is a contiguous vector of freq * chan values and
/// an L x F x C map reshapes to L x (F * C) for free.
struct Shape {
  std::size_t time = 0;
  std::size_t freq = 1;
  std::size_t chan = 1;

  std::size_t size() const { return time * freq * chan; }
  std::size_t row() const { return freq * chan; }
  friend bool operator==(const Shape&, const Shape&) = default;
};

std::string to_string(const Shape& s);

template <class T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0)) : shape_(shape), data_(shape.size(), fill) {}
  Tensor(Shape shape, std::vector<T> data);

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& values() { return data_; }
  const std::vector<T>& values() const { return data_; }

  T& at(std::size_t t, std::size_t f, std::size_t c) { return data_[(t * shape_.freq + f) * shape_.chan + c]; }
  T at(std::size_t t, std::size_t f, std::size_t c) const {
    return data_[(t * shape_.freq + f) * shape_.chan + c];
  }
  std::span<T> row(std::size_t t) { return std::span(data_).subspan(t * shape_.row(), shape_.row()); }
  std::span<const T> row(std::size_t t) const {
    return std::span(data_).subspan(t * shape_.row(), shape_.row());
  }

  /// Same data, new axes; total size must match.
  Tensor reshaped(Shape shape) const&;
  Tensor reshaped(Shape shape) &&;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_{};
  std::vector<T> data_;
};

template <class T>
using Batch = std::vector<Tensor<T>>;

// kCalibrate runs like inference (no dropout, no caches) except that batch
// norm normalizes with, and accumulates, the statistics of each batch.
enum class Phase { kTrain, kInfer, kCalibrate };

/// A trainable array with its gradient accumulator.
template <class T>
struct Param {
  std::string name;
  std::vector<std::size_t> dims;
  std::vector<T> value;
  std::vector<T> grad;
  /// Non-trainable state (batch-norm running statistics) is persisted but
  /// skipped by the optimizer.
  bool trainable = true;

  Param() = default;
  Param(std::string n, std::vector<std::size_t> d, bool train = true);
  std::size_t size() const { return value.size(); }
  void zero_grad();
};

template <class T>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Batch<T> forward(const Batch<T>& input, Phase phase) = 0;
  /// Consumes the gradient w.r.t. the last forward output, accumulates
  /// parameter gradients and returns the gradient w.r.t. that input.
  virtual Batch<T> backward(const Batch<T>& grad_output) = 0;
  virtual void collect(std::vector<Param<T>*>& /*out*/) {}
  virtual std::string describe() const = 0;
};

}  // namespace doakit::nn
