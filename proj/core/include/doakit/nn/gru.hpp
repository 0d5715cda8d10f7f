// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "doakit/nn/tensor.hpp"
#include "doakit/rng.hpp"

namespace doakit::nn {

/// One GRU direction with zero initial state. Gates are packed as
/// [update | reset | candidate] along the last axis:
///   z = sigmoid(W_z x + U_z h + b_z)
///   r = sigmoid(W_r x + U_r h + b_r)
///   n = tanh(W_n x + U_n (r * h) + b_n)
///   h' = z * h + (1 - z) * n
template <class T>
class GruCell {
 public:
  /// Activations of one sequence, kept for backpropagation through time.
  struct Cache {
    std::size_t frames = 0;
    bool reverse = false;
    std::vector<T> x, h_prev, z, r, n;
  };

  GruCell(std::string name, std::size_t in, std::size_t hidden);

  /// frames x in -> frames x hidden, indexed by original frame; `reverse`
  /// runs from the last frame to the first. Fills `cache` when non-null.
  std::vector<T> forward(const std::vector<T>& x, std::size_t frames, bool reverse, Cache* cache) const;
  /// Gradient w.r.t. every output of the cached sequence -> gradient w.r.t.
  /// its input; parameter gradients accumulate.
  std::vector<T> backward(const Cache& cache, const std::vector<T>& grad_h);

  void initialize(Rng& rng);
  void collect(std::vector<Param<T>*>& out);

  Param<T>& input_weight() { return w_; }
  Param<T>& recurrent_weight() { return u_; }
  Param<T>& bias() { return b_; }

  static std::size_t parameter_count(std::size_t in, std::size_t hidden) {
    return 3 * hidden * (in + hidden + 1);
  }

 private:
  std::size_t in_, hidden_;
  Param<T> w_, u_, b_;  // [in][3H], [H][3H], [3H]
};

/// Forward and backward GRU over time with outputs concatenated
/// [forward | backward] per frame: (frames, *, *) -> (frames, 1, 2 * hidden).
template <class T>
class BiGru final : public Layer<T> {
 public:
  BiGru(std::string name, std::size_t in, std::size_t hidden);

  Batch<T> forward(const Batch<T>& input, Phase phase) override;
  Batch<T> backward(const Batch<T>& grad_output) override;
  void collect(std::vector<Param<T>*>& out) override;
  std::string describe() const override;

  void initialize(Rng& rng);
  GruCell<T>& forward_cell() { return fwd_; }
  GruCell<T>& backward_cell() { return bwd_; }

  static std::size_t parameter_count(std::size_t in, std::size_t hidden) {
    return 2 * GruCell<T>::parameter_count(in, hidden);
  }

 private:
  std::string name_;
  std::size_t in_, hidden_;
  GruCell<T> fwd_, bwd_;
  std::vector<typename GruCell<T>::Cache> fwd_cache_, bwd_cache_;
  std::vector<Shape> input_shapes_;
};

}  // namespace doakit::nn
