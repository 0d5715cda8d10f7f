// SPDX-License-Identifier: Apache-2.0
#include "doakit/nn/loss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace doakit::nn {

namespace {

template <class T>
std::size_t check_pair(const Batch<T>& pred, const Batch<T>& target, std::span<const std::size_t> valid,
                       const char* what) {
  if (pred.size() != target.size() || pred.size() != valid.size()) {
    throw std::invalid_argument(std::string(what) + ": batch size mismatch");
  }
  std::size_t count = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i].shape() != target[i].shape()) {
      throw std::invalid_argument(std::string(what) + ": shape mismatch " + to_string(pred[i].shape()) + " vs " +
                                  to_string(target[i].shape()));
    }
    if (valid[i] > pred[i].shape().time) throw std::invalid_argument(std::string(what) + ": valid frames exceed length");
    count += valid[i] * pred[i].shape().row();
  }
  if (count == 0) throw std::invalid_argument(std::string(what) + ": no valid elements");
  return count;
}

template <class T>
void prepare_grad(const Batch<T>& pred, Batch<T>* grad) {
  if (!grad) return;
  grad->clear();
  for (const auto& p : pred) grad->emplace_back(p.shape());
}

}  // namespace

template <class T>
double mse_loss(const Batch<T>& pred, const Batch<T>& target, std::span<const std::size_t> valid_frames,
                Batch<T>* grad) {
  const std::size_t count = check_pair(pred, target, valid_frames, "mse");
  prepare_grad(pred, grad);
  const double scale = 2.0 / static_cast<double>(count);
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const std::size_t n = valid_frames[i] * pred[i].shape().row();
    for (std::size_t k = 0; k < n; ++k) {
      const double d = static_cast<double>(pred[i].values()[k]) - target[i].values()[k];
      sum += d * d;
      if (grad) (*grad)[i].values()[k] = static_cast<T>(scale * d);
    }
  }
  return sum / static_cast<double>(count);
}

template <class T>
double bce_loss(const Batch<T>& pred, const Batch<T>& target, std::span<const std::size_t> valid_frames,
                Batch<T>* grad) {
  const std::size_t count = check_pair(pred, target, valid_frames, "bce");
  prepare_grad(pred, grad);
  const double inv = 1.0 / static_cast<double>(count);
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const std::size_t n = valid_frames[i] * pred[i].shape().row();
    for (std::size_t k = 0; k < n; ++k) {
      const double raw = pred[i].values()[k];
      const double p = std::clamp(raw, kProbabilityClamp, 1.0 - kProbabilityClamp);
      const double y = target[i].values()[k];
      sum -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
      if (grad && raw == p) (*grad)[i].values()[k] = static_cast<T>(inv * ((1.0 - y) / (1.0 - p) - y / p));
    }
  }
  return sum * inv;
}

template <class T>
LossValue combined_loss(const Batch<T>& sps_pred, const Batch<T>& sps_target, const Batch<T>& doa_pred,
                        const Batch<T>& doa_target, std::span<const std::size_t> valid_frames,
                        const LossWeights& weights, Batch<T>* grad_sps, Batch<T>* grad_doa) {
  LossValue v;
  v.mse = mse_loss(sps_pred, sps_target, valid_frames, grad_sps);
  v.bce = bce_loss(doa_pred, doa_target, valid_frames, grad_doa);
  v.total = weights.sps * v.mse + weights.doa * v.bce;
  auto scale = [](Batch<T>* g, double w) {
    if (!g || w == 1.0) return;
    for (auto& t : *g) {
      for (auto& x : t.values()) x = static_cast<T>(x * w);
    }
  };
  scale(grad_sps, weights.sps);
  scale(grad_doa, weights.doa);
  return v;
}

#define DOAKIT_INSTANTIATE(T)                                                                                    \
  template double mse_loss<T>(const Batch<T>&, const Batch<T>&, std::span<const std::size_t>, Batch<T>*);     \
  template double bce_loss<T>(const Batch<T>&, const Batch<T>&, std::span<const std::size_t>, Batch<T>*);     \
  template LossValue combined_loss<T>(const Batch<T>&, const Batch<T>&, const Batch<T>&, const Batch<T>&,     \
                                      std::span<const std::size_t>, const LossWeights&, Batch<T>*, Batch<T>*);
DOAKIT_INSTANTIATE(float)
DOAKIT_INSTANTIATE(double)
#undef DOAKIT_INSTANTIATE

}  // namespace doakit::nn
