// SPDX-License-Identifier: Apache-2.0
#include "doakit/ambisonics.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace doakit {
namespace {

const double kY00 = 1.0 / std::sqrt(4.0 * std::numbers::pi);
const double kY1 = std::sqrt(3.0 / (4.0 * std::numbers::pi));

}  // namespace

SteeringVector encode_unit_vector(const Vec3& u) {
  return {kY00, kY1 * u[1], kY1 * u[2], kY1 * u[0]};
}

SteeringVector encode_direction(const Direction& d) {
  // Y_1(-1) ~ cos(el) sin(az), Y_10 ~ sin(el), Y_11 ~ cos(el) cos(az).
  return encode_unit_vector(d.unit_vector());
}

double distance_gain(double distance_m, double max_distance_m) {
  if (!(max_distance_m > 0.0) || !(distance_m >= 0.0) || distance_m > max_distance_m) {
    throw std::invalid_argument("distance " + std::to_string(distance_m) +
                                " outside [0, " + std::to_string(max_distance_m) + "]");
  }
  return std::pow(10.0, -distance_m / (2.0 * max_distance_m));
}

AmbisonicBuffer::AmbisonicBuffer(std::size_t frames, int sample_rate)
    : frames_(frames), sample_rate_(sample_rate) {
  for (auto& c : channels_) c.assign(frames, 0.0f);
}

void AmbisonicBuffer::mix(const AmbisonicBuffer& other, std::size_t offset) {
  if (other.sample_rate_ != sample_rate_) {
    throw std::invalid_argument("cannot mix buffers with different sample rates");
  }
  if (offset >= frames_) return;
  const std::size_t n = std::min(other.frames_, frames_ - offset);
  for (std::size_t c = 0; c < kFoaChannels; ++c) {
    float* dst = channels_[c].data() + offset;
    const float* src = other.channels_[c].data();
    for (std::size_t i = 0; i < n; ++i) dst[i] += src[i];
  }
}

AmbisonicBuffer spatialize(std::span<const float> signal, const Direction& d, double gain) {
  const SteeringVector y = encode_direction(d);
  AmbisonicBuffer out(signal.size());
  for (std::size_t c = 0; c < kFoaChannels; ++c) {
    const double w = gain * y[c];
    auto dst = out.channel(c);
    for (std::size_t i = 0; i < signal.size(); ++i) {
      dst[i] = static_cast<float>(w * signal[i]);
    }
  }
  return out;
}

}  // namespace doakit
