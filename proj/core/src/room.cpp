// SPDX-License-Identifier: Apache-2.0
#include "doakit/room.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace doakit {
namespace {

constexpr double kSabineConstant = 0.161;  // s/m, 24 ln(10) / c

}  // namespace

double RoomSpec::surface() const {
  const auto& d = dimensions;
  return 2.0 * (d[0] * d[1] + d[0] * d[2] + d[1] * d[2]);
}

void RoomSpec::validate() const {
  for (int k = 0; k < 3; ++k) {
    if (!(dimensions[k] > 0.0)) throw std::invalid_argument("room dimensions must be positive");
    if (!(microphone[k] > 0.0 && microphone[k] < dimensions[k])) {
      throw std::invalid_argument("microphone must lie strictly inside the room");
    }
  }
  if (!(target_t60 > 0.0)) throw std::invalid_argument("T60 must be positive");
  if (!(max_image_time > 0.0)) throw std::invalid_argument("max image time must be positive");
  if (!(reflection >= 0.0 && reflection <= 1.0)) {
    throw std::invalid_argument("reflection coefficient must lie in [0, 1]");
  }
}

double reflection_for_t60(const Vec3& d, double t60, AbsorptionModel model) {
  if (!(t60 > 0.0)) throw std::invalid_argument("T60 must be positive");
  const double volume = d[0] * d[1] * d[2];
  const double surface = 2.0 * (d[0] * d[1] + d[0] * d[2] + d[1] * d[2]);
  const double k = kSabineConstant * volume / (surface * t60);
  double alpha = model == AbsorptionModel::kSabine ? k : 1.0 - std::exp(-k);
  if (alpha > 1.0) throw std::invalid_argument("T60 too short for this room");
  return std::sqrt(1.0 - alpha);
}

RoomSpec make_room(int preset, AbsorptionModel model) {
  RoomSpec r;
  switch (preset) {
    case 1: r.dimensions = {10.0, 8.0, 4.0}; r.target_t60 = 0.5; break;
    case 2: r.dimensions = {8.0, 8.0, 4.0}; r.target_t60 = 0.4; break;
    case 3: r.dimensions = {8.0, 6.0, 4.0}; r.target_t60 = 0.3; break;
    default: throw std::invalid_argument("room preset must be 1, 2 or 3");
  }
  r.microphone = {r.dimensions[0] / 2, r.dimensions[1] / 2, r.dimensions[2] / 2};
  r.max_image_time = 2.0 * r.target_t60;
  r.reflection = reflection_for_t60(r.dimensions, r.target_t60, model);
  return r;
}

std::vector<ImageSource> compute_image_sources(const RoomSpec& room, const Vec3& source,
                                               double max_time) {
  room.validate();
  for (int k = 0; k < 3; ++k) {
    if (!(source[k] > 0.0 && source[k] < room.dimensions[k])) {
      throw std::invalid_argument("source must lie strictly inside the room");
    }
  }
  const double max_dist = max_time * kSpeedOfSound;
  const auto& L = room.dimensions;
  const auto& mic = room.microphone;
  int n_max[3];
  for (int k = 0; k < 3; ++k) n_max[k] = static_cast<int>(std::ceil(max_dist / (2.0 * L[k]))) + 1;

  std::vector<ImageSource> out;
  auto emit = [&](const Vec3& p, int order) {
    const double dx = p[0] - mic[0], dy = p[1] - mic[1], dz = p[2] - mic[2];
    const double dist = std::sqrt(dx * dx + dy * dy + dz * dz);
    if (dist > max_dist) return;
    ImageSource img;
    img.position = p;
    img.reflection_order = order;
    img.delay_s = dist / kSpeedOfSound;
    img.gain = std::pow(room.reflection, order) / std::max(dist, 0.1);
    img.direction = dist > 0.0 ? Direction::from_vector({dx, dy, dz}) : Direction(0.0, 0.0);
    out.push_back(img);
  };

  // Direct path first.
  emit(source, 0);
  for (int nx = -n_max[0]; nx <= n_max[0]; ++nx) {
    for (int ux = 0; ux <= 1; ++ux) {
      const double x = (1 - 2 * ux) * source[0] + 2.0 * nx * L[0];
      const int ox = std::abs(nx - ux) + std::abs(nx);
      if (std::abs(x - mic[0]) > max_dist) continue;
      for (int ny = -n_max[1]; ny <= n_max[1]; ++ny) {
        for (int uy = 0; uy <= 1; ++uy) {
          const double y = (1 - 2 * uy) * source[1] + 2.0 * ny * L[1];
          const int oy = std::abs(ny - uy) + std::abs(ny);
          if (std::abs(y - mic[1]) > max_dist) continue;
          for (int nz = -n_max[2]; nz <= n_max[2]; ++nz) {
            for (int uz = 0; uz <= 1; ++uz) {
              const int oz = std::abs(nz - uz) + std::abs(nz);
              const int order = ox + oy + oz;
              if (order == 0) continue;
              const double z = (1 - 2 * uz) * source[2] + 2.0 * nz * L[2];
              emit({x, y, z}, order);
            }
          }
        }
      }
    }
  }
  return out;
}

AmbisonicBuffer spatial_impulse_response(const RoomSpec& room, const Vec3& source,
                                         int sample_rate) {
  const auto images = compute_image_sources(room, source, room.max_image_time);
  const std::size_t len = static_cast<std::size_t>(std::floor(room.max_image_time * sample_rate)) + 1;
  std::vector<std::array<double, kFoaChannels>> acc(len, {0.0, 0.0, 0.0, 0.0});
  const auto& mic = room.microphone;
  for (const auto& img : images) {
    const auto n = static_cast<std::size_t>(std::llround(img.delay_s * sample_rate));
    if (n >= len) continue;
    Vec3 u{img.position[0] - mic[0], img.position[1] - mic[1], img.position[2] - mic[2]};
    const double r = std::sqrt(u[0] * u[0] + u[1] * u[1] + u[2] * u[2]);
    const SteeringVector y =
        r > 0.0 ? encode_unit_vector({u[0] / r, u[1] / r, u[2] / r}) : encode_direction({});
    for (std::size_t c = 0; c < kFoaChannels; ++c) acc[n][c] += img.gain * y[c];
  }
  AmbisonicBuffer ir(len, sample_rate);
  for (std::size_t c = 0; c < kFoaChannels; ++c) {
    auto ch = ir.channel(c);
    for (std::size_t i = 0; i < len; ++i) ch[i] = static_cast<float>(acc[i][c]);
  }
  return ir;
}

}  // namespace doakit
