// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>

#include "doakit/nn/tensor.hpp"

namespace doakit::nn {

inline constexpr double kProbabilityClamp = 1e-7;

struct LossValue {
  double mse = 0.0;
  double bce = 0.0;
  double total = 0.0;
};

/// Mean squared error over the first valid_frames[i] frames of every item.
/// When `grad` is non-null it receives d(mse)/d(pred), zero on padding.
template <class T>
double mse_loss(const Batch<T>& pred, const Batch<T>& target, std::span<const std::size_t> valid_frames,
                Batch<T>* grad = nullptr);

/// Binary cross entropy with probabilities clamped to [1e-7, 1 - 1e-7];
/// clamped entries get zero gradient.
template <class T>
double bce_loss(const Batch<T>& pred, const Batch<T>& target, std::span<const std::size_t> valid_frames,
                Batch<T>* grad = nullptr);

struct LossWeights {
  double sps = 1.0;
  double doa = 1.0;
};

/// total = w_sps * MSE(sps) + w_doa * BCE(doa); gradients are scaled by
/// the weights.
template <class T>
LossValue combined_loss(const Batch<T>& sps_pred, const Batch<T>& sps_target, const Batch<T>& doa_pred,
                        const Batch<T>& doa_target, std::span<const std::size_t> valid_frames,
                        const LossWeights& weights = {}, Batch<T>* grad_sps = nullptr, Batch<T>* grad_doa = nullptr);

}  // namespace doakit::nn
