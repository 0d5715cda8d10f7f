// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "doakit/ambisonics.hpp"
#include "doakit/geometry.hpp"

namespace doakit {

inline constexpr double kSpeedOfSound = 343.0;

enum class AbsorptionModel { kSabine, kEyring };

/// Shoebox room with frequency-independent walls of uniform reflectivity.
struct RoomSpec {
  Vec3 dimensions{10.0, 8.0, 4.0};
  Vec3 microphone{5.0, 4.0, 2.0};
  double target_t60 = 0.5;
  double max_image_time = 1.0;
  /// Pressure reflection coefficient shared by all six walls.
  double reflection = 0.0;

  double volume() const { return dimensions[0] * dimensions[1] * dimensions[2]; }
  double surface() const;
  void validate() const;
};

/// Pressure reflection coefficient giving `t60` in a room of the given size.
/// Sabine is the default: image-source responses of a shoebox decay more
/// slowly than the diffuse-field Eyring estimate, and Sabine's larger
/// absorption brings the measured T60 close to the target.
double reflection_for_t60(const Vec3& dimensions, double t60,
                          AbsorptionModel model = AbsorptionModel::kSabine);

/// Room presets: 1 = 10x8x4 m, 0.5 s; 2 = 8x8x4 m, 0.4 s; 3 = 8x6x4 m, 0.3 s.
/// The microphone sits in the centre; max_image_time is 2 * T60.
RoomSpec make_room(int preset, AbsorptionModel model = AbsorptionModel::kSabine);

struct ImageSource {
  Vec3 position;
  int reflection_order = 0;
  double delay_s = 0.0;
  double gain = 0.0;
  Direction direction;
};

/// Enumerates mirror images (Allen-Berkley) whose delay is at most
/// `max_time`. Gain is reflection^order / max(distance, 0.1 m). The direct
/// path comes first; the remaining order is deterministic but unspecified.
std::vector<ImageSource> compute_image_sources(const RoomSpec& room, const Vec3& source,
                                               double max_time);

/// Four-channel spatial impulse response: every image contributes a scaled
/// impulse at its nearest-sample delay, weighted by its steering vector.
/// Length is floor(max_image_time * fs) + 1 samples.
AmbisonicBuffer spatial_impulse_response(const RoomSpec& room, const Vec3& source,
                                         int sample_rate = kSampleRate);

}  // namespace doakit
