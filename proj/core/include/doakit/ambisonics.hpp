// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "doakit/geometry.hpp"

namespace doakit {

inline constexpr std::size_t kFoaChannels = 4;
inline constexpr int kSampleRate = 44100;

/// Real orthonormalized (N3D) first-order spherical harmonics in ACN order:
/// [Y_00, Y_1(-1), Y_10, Y_11] = [W, Y, Z, X].
using SteeringVector = std::array<double, kFoaChannels>;

SteeringVector encode_direction(const Direction& d);

/// Same as encode_direction for an already normalised Cartesian vector.
SteeringVector encode_unit_vector(const Vec3& u);

/// sqrt(1 / 10^(d / d_max)). Throws std::invalid_argument outside [0, d_max].
double distance_gain(double distance_m, double max_distance_m = 10.0);

/// Four equal-length channels of FOA audio in ACN order.
class AmbisonicBuffer {
 public:
  AmbisonicBuffer() = default;
  AmbisonicBuffer(std::size_t frames, int sample_rate = kSampleRate);

  std::size_t frames() const { return frames_; }
  int sample_rate() const { return sample_rate_; }

  std::span<float> channel(std::size_t c) { return channels_[c]; }
  std::span<const float> channel(std::size_t c) const { return channels_[c]; }

  /// Sample-wise addition of `other` starting at `offset`; samples beyond
  /// the end of this buffer are dropped.
  void mix(const AmbisonicBuffer& other, std::size_t offset = 0);

  friend bool operator==(const AmbisonicBuffer&, const AmbisonicBuffer&) = default;

 private:
  std::size_t frames_ = 0;
  int sample_rate_ = kSampleRate;
  std::array<std::vector<float>, kFoaChannels> channels_;
};

/// Channel c = gain * signal * encode_direction(d)[c].
AmbisonicBuffer spatialize(std::span<const float> signal, const Direction& d, double gain = 1.0);

}  // namespace doakit
