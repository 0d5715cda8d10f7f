// SPDX-License-Identifier: Apache-2.0
#include "doakit/nn/gru.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "doakit/nn/layers.hpp"

namespace doakit::nn {

namespace {

template <class T>
T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

}  // namespace

template <class T>
GruCell<T>::GruCell(std::string name, std::size_t in, std::size_t hidden)
    : in_(in),
      hidden_(hidden),
      w_(name + "/kernel", {in, 3 * hidden}),
      u_(name + "/recurrent_kernel", {hidden, 3 * hidden}),
      b_(name + "/bias", {3 * hidden}) {
  if (in == 0 || hidden == 0) throw std::invalid_argument("gru: sizes must be positive");
}

template <class T>
void GruCell<T>::initialize(Rng& rng) {
  init_uniform_fan_in(w_.value, in_, rng);
  init_uniform_fan_in(u_.value, hidden_, rng);
  std::fill(b_.value.begin(), b_.value.end(), T(0));
}

template <class T>
void GruCell<T>::collect(std::vector<Param<T>*>& out) {
  out.push_back(&w_);
  out.push_back(&u_);
  out.push_back(&b_);
}

template <class T>
std::vector<T> GruCell<T>::forward(const std::vector<T>& x, std::size_t frames, bool reverse, Cache* cache) const {
  const std::size_t h_n = hidden_, g_n = 3 * hidden_;
  if (x.size() != frames * in_) throw std::invalid_argument(w_.name + ": input size mismatch");
  std::vector<T> out(frames * h_n);
  std::vector<T> h(h_n, T(0)), a(g_n), rh(h_n);
  if (cache) {
    cache->frames = frames;
    cache->reverse = reverse;
    cache->x.resize(frames * in_);
    cache->h_prev.resize(frames * h_n);
    cache->z.resize(frames * h_n);
    cache->r.resize(frames * h_n);
    cache->n.resize(frames * h_n);
  }
  const T* W = w_.value.data();
  const T* U = u_.value.data();
  for (std::size_t k = 0; k < frames; ++k) {
    const std::size_t t = reverse ? frames - 1 - k : k;
    const T* xt = x.data() + t * in_;
    std::copy(b_.value.begin(), b_.value.end(), a.begin());
    for (std::size_t i = 0; i < in_; ++i) {
      const T xv = xt[i];
      const T* row = W + i * g_n;
      for (std::size_t j = 0; j < g_n; ++j) a[j] += xv * row[j];
    }
    for (std::size_t i = 0; i < h_n; ++i) {
      const T hv = h[i];
      const T* row = U + i * g_n;
      for (std::size_t j = 0; j < 2 * h_n; ++j) a[j] += hv * row[j];
    }
    T* z = a.data();
    T* r = a.data() + h_n;
    for (std::size_t j = 0; j < 2 * h_n; ++j) a[j] = sigmoid(a[j]);
    for (std::size_t i = 0; i < h_n; ++i) rh[i] = r[i] * h[i];
    T* n = a.data() + 2 * h_n;
    for (std::size_t i = 0; i < h_n; ++i) {
      const T v = rh[i];
      const T* row = U + i * g_n + 2 * h_n;
      for (std::size_t j = 0; j < h_n; ++j) n[j] += v * row[j];
    }
    for (std::size_t j = 0; j < h_n; ++j) n[j] = std::tanh(n[j]);
    if (cache) {
      std::copy(xt, xt + in_, cache->x.begin() + k * in_);
      std::copy(h.begin(), h.end(), cache->h_prev.begin() + k * h_n);
      std::copy(z, z + h_n, cache->z.begin() + k * h_n);
      std::copy(r, r + h_n, cache->r.begin() + k * h_n);
      std::copy(n, n + h_n, cache->n.begin() + k * h_n);
    }
    for (std::size_t j = 0; j < h_n; ++j) h[j] = z[j] * h[j] + (T(1) - z[j]) * n[j];
    std::copy(h.begin(), h.end(), out.begin() + t * h_n);
  }
  return out;
}

template <class T>
std::vector<T> GruCell<T>::backward(const Cache& cache, const std::vector<T>& grad_h) {
  const std::size_t h_n = hidden_, g_n = 3 * hidden_, frames = cache.frames;
  if (grad_h.size() != frames * h_n) throw std::invalid_argument(w_.name + ": gradient size mismatch");
  std::vector<T> grad_x(frames * in_, T(0));
  std::vector<T> dh_next(h_n, T(0)), dh(h_n), dhp(h_n), da(g_n), drh(h_n), rh(h_n);
  const T* W = w_.value.data();
  const T* U = u_.value.data();
  T* dW = w_.grad.data();
  T* dU = u_.grad.data();
  for (std::size_t kk = frames; kk-- > 0;) {
    const std::size_t t = cache.reverse ? frames - 1 - kk : kk;
    const T* hp = cache.h_prev.data() + kk * h_n;
    const T* z = cache.z.data() + kk * h_n;
    const T* r = cache.r.data() + kk * h_n;
    const T* n = cache.n.data() + kk * h_n;
    const T* x = cache.x.data() + kk * in_;
    for (std::size_t j = 0; j < h_n; ++j) dh[j] = grad_h[t * h_n + j] + dh_next[j];

    T* daz = da.data();
    T* dar = da.data() + h_n;
    T* dan = da.data() + 2 * h_n;
    for (std::size_t j = 0; j < h_n; ++j) {
      const T dn = dh[j] * (T(1) - z[j]);
      const T dz = dh[j] * (hp[j] - n[j]);
      dhp[j] = dh[j] * z[j];
      dan[j] = dn * (T(1) - n[j] * n[j]);
      daz[j] = dz * z[j] * (T(1) - z[j]);
      rh[j] = r[j] * hp[j];
    }
    for (std::size_t i = 0; i < h_n; ++i) {
      const T* row = U + i * g_n + 2 * h_n;
      T* grow = dU + i * g_n + 2 * h_n;
      T acc = T(0);
      for (std::size_t j = 0; j < h_n; ++j) {
        acc += row[j] * dan[j];
        grow[j] += rh[i] * dan[j];
      }
      drh[i] = acc;
    }
    for (std::size_t i = 0; i < h_n; ++i) {
      const T dr = drh[i] * hp[i];
      dhp[i] += drh[i] * r[i];
      dar[i] = dr * r[i] * (T(1) - r[i]);
    }
    for (std::size_t i = 0; i < h_n; ++i) {
      const T* row = U + i * g_n;
      T* grow = dU + i * g_n;
      T acc = T(0);
      for (std::size_t j = 0; j < 2 * h_n; ++j) {
        acc += row[j] * da[j];
        grow[j] += hp[i] * da[j];
      }
      dhp[i] += acc;
    }
    for (std::size_t j = 0; j < g_n; ++j) b_.grad[j] += da[j];
    T* gx = grad_x.data() + t * in_;
    for (std::size_t i = 0; i < in_; ++i) {
      const T* row = W + i * g_n;
      T* grow = dW + i * g_n;
      T acc = T(0);
      for (std::size_t j = 0; j < g_n; ++j) {
        acc += row[j] * da[j];
        grow[j] += x[i] * da[j];
      }
      gx[i] = acc;
    }
    dh_next = dhp;
  }
  return grad_x;
}

template <class T>
BiGru<T>::BiGru(std::string name, std::size_t in, std::size_t hidden)
    : name_(name), in_(in), hidden_(hidden), fwd_(name + "/forward", in, hidden), bwd_(name + "/backward", in, hidden) {}

template <class T>
void BiGru<T>::initialize(Rng& rng) {
  fwd_.initialize(rng);
  bwd_.initialize(rng);
}

template <class T>
void BiGru<T>::collect(std::vector<Param<T>*>& out) {
  fwd_.collect(out);
  bwd_.collect(out);
}

template <class T>
std::string BiGru<T>::describe() const {
  return "bigru " + std::to_string(in_) + "->2x" + std::to_string(hidden_);
}

template <class T>
Batch<T> BiGru<T>::forward(const Batch<T>& input, Phase phase) {
  const bool keep = phase == Phase::kTrain;
  fwd_cache_.assign(keep ? input.size() : 0, {});
  bwd_cache_.assign(keep ? input.size() : 0, {});
  input_shapes_.clear();
  Batch<T> output;
  output.reserve(input.size());
  for (std::size_t item = 0; item < input.size(); ++item) {
    const Tensor<T>& x = input[item];
    if (x.shape().row() != in_) {
      throw std::invalid_argument(name_ + ": expected rows of " + std::to_string(in_) + ", got " + to_string(x.shape()));
    }
    const std::size_t frames = x.shape().time;
    if (keep) input_shapes_.push_back(x.shape());
    const auto hf = fwd_.forward(x.values(), frames, false, keep ? &fwd_cache_[item] : nullptr);
    const auto hb = bwd_.forward(x.values(), frames, true, keep ? &bwd_cache_[item] : nullptr);
    Tensor<T> y({frames, 1, 2 * hidden_});
    for (std::size_t t = 0; t < frames; ++t) {
      std::copy_n(hf.begin() + t * hidden_, hidden_, y.data() + t * 2 * hidden_);
      std::copy_n(hb.begin() + t * hidden_, hidden_, y.data() + t * 2 * hidden_ + hidden_);
    }
    output.push_back(std::move(y));
  }
  return output;
}

template <class T>
Batch<T> BiGru<T>::backward(const Batch<T>& grad_output) {
  if (grad_output.size() != fwd_cache_.size()) throw std::invalid_argument(name_ + ": backward without train forward");
  Batch<T> grad_input;
  grad_input.reserve(grad_output.size());
  for (std::size_t item = 0; item < grad_output.size(); ++item) {
    const Tensor<T>& g = grad_output[item];
    const std::size_t frames = fwd_cache_[item].frames;
    if (g.shape().time != frames || g.shape().row() != 2 * hidden_) {
      throw std::invalid_argument(name_ + ": gradient shape mismatch");
    }
    std::vector<T> gf(frames * hidden_), gb(frames * hidden_);
    for (std::size_t t = 0; t < frames; ++t) {
      std::copy_n(g.data() + t * 2 * hidden_, hidden_, gf.begin() + t * hidden_);
      std::copy_n(g.data() + t * 2 * hidden_ + hidden_, hidden_, gb.begin() + t * hidden_);
    }
    auto dx = fwd_.backward(fwd_cache_[item], gf);
    const auto dxb = bwd_.backward(bwd_cache_[item], gb);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dxb[i];
    grad_input.emplace_back(input_shapes_[item], std::move(dx));
  }
  fwd_cache_.clear();
  bwd_cache_.clear();
  return grad_input;
}

template class GruCell<float>;
template class GruCell<double>;
template class BiGru<float>;
template class BiGru<double>;

}  // namespace doakit::nn
