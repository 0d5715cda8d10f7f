// SPDX-License-Identifier: Apache-2.0
#include "doakit/nn/tensor.hpp"

#include <stdexcept>

namespace doakit::nn {

std::string to_string(const Shape& s) {
  return std::to_string(s.time) + "x" + std::to_string(s.freq) + "x" + std::to_string(s.chan);
}

template <class T>
Tensor<T>::Tensor(Shape shape, std::vector<T> data) : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape_.size()) throw std::invalid_argument("tensor data does not match shape " + to_string(shape));
}

template <class T>
Tensor<T> Tensor<T>::reshaped(Shape shape) const& {
  if (shape.size() != shape_.size()) {
    throw std::invalid_argument("cannot reshape " + to_string(shape_) + " to " + to_string(shape));
  }
  return Tensor(shape, data_);
}

template <class T>
Tensor<T> Tensor<T>::reshaped(Shape shape) && {
  if (shape.size() != shape_.size()) {
    throw std::invalid_argument("cannot reshape " + to_string(shape_) + " to " + to_string(shape));
  }
  return Tensor(shape, std::move(data_));
}

template <class T>
Param<T>::Param(std::string n, std::vector<std::size_t> d, bool train)
    : name(std::move(n)), dims(std::move(d)), trainable(train) {
  std::size_t count = 1;
  for (auto x : dims) count *= x;
  value.assign(count, T(0));
  grad.assign(count, T(0));
}

template <class T>
void Param<T>::zero_grad() {
  std::fill(grad.begin(), grad.end(), T(0));
}

template class Tensor<float>;
template class Tensor<double>;
template struct Param<float>;
template struct Param<double>;

}  // namespace doakit::nn
