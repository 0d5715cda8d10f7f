// SPDX-License-Identifier: Apache-2.0
// Central finite-difference checks for Layer<double>. The probe loss is
// sum(w * forward(x)) with fixed random weights w, so backward(w) yields the
// analytic gradient of that loss.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "doakit/nn/tensor.hpp"
#include "doakit/rng.hpp"

namespace doakit::testing {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst;  // which entry produced the maximum
  std::size_t checked = 0;
};

/// Relative error with a small absolute floor so that entries whose true
/// gradient is zero are compared in absolute terms.
inline double relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / scale;
}

inline nn::Batch<double> random_batch(std::size_t items, nn::Shape shape, Rng& rng, double scale = 1.0) {
  nn::Batch<double> b;
  for (std::size_t i = 0; i < items; ++i) {
    nn::Tensor<double> t(shape);
    for (auto& v : t.values()) v = scale * rng.uniform(-1.0, 1.0);
    b.push_back(std::move(t));
  }
  return b;
}

inline double weighted_sum(const nn::Batch<double>& out, const nn::Batch<double>& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (std::size_t k = 0; k < out[i].size(); ++k) s += out[i].values()[k] * w[i].values()[k];
  }
  return s;
}

/// Checks input gradients and every trainable parameter. At most
/// `max_per_array` entries per array are probed (evenly spread).
inline GradCheckResult check_layer(nn::Layer<double>& layer, nn::Batch<double> x, Rng& rng,
                                   nn::Phase phase = nn::Phase::kTrain, double h = 1e-5,
                                   std::size_t max_per_array = 200) {
  auto out = layer.forward(x, phase);
  nn::Batch<double> w;
  for (const auto& o : out) {
    nn::Tensor<double> t(o.shape());
    for (auto& v : t.values()) v = rng.uniform(-1.0, 1.0);
    w.push_back(std::move(t));
  }
  std::vector<nn::Param<double>*> params;
  layer.collect(params);
  for (auto* p : params) p->zero_grad();
  const auto grad_x = layer.backward(w);

  auto loss = [&]() { return weighted_sum(layer.forward(x, phase), w); };
  GradCheckResult res;
  auto probe = [&](double& slot, double analytic, const std::string& label) {
    const double saved = slot;
    slot = saved + h;
    const double up = loss();
    slot = saved - h;
    const double down = loss();
    slot = saved;
    const double numeric = (up - down) / (2 * h);
    const double e = relative_error(analytic, numeric);
    ++res.checked;
    if (e > res.max_rel_error) {
      res.max_rel_error = e;
      res.worst = label + " analytic " + std::to_string(analytic) + " numeric " + std::to_string(numeric);
    }
  };
  for (std::size_t i = 0; i < x.size(); ++i) {
    const std::size_t n = x[i].size();
    const std::size_t stride = std::max<std::size_t>(1, n / max_per_array);
    for (std::size_t k = 0; k < n; k += stride) {
      probe(x[i].values()[k], grad_x[i].values()[k], "input[" + std::to_string(i) + "][" + std::to_string(k) + "]");
    }
  }
  for (auto* p : params) {
    if (!p->trainable) continue;
    const std::size_t n = p->size();
    const std::size_t stride = std::max<std::size_t>(1, n / max_per_array);
    for (std::size_t k = 0; k < n; k += stride) {
      probe(p->value[k], p->grad[k], p->name + "[" + std::to_string(k) + "]");
    }
  }
  return res;
}

}  // namespace doakit::testing
