// SPDX-License-Identifier: Apache-2.0
#include "doakit/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <stdexcept>
#include <string>

namespace doakit {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr double kAngleTol = 1e-9;

bool divides(double whole, double part) {
  const double q = whole / part;
  return std::abs(q - std::round(q)) < 1e-9;
}

void check_resolution(double r) {
  if (!(r > 0.0) || !divides(360.0, r) || !divides(180.0, r)) {
    throw std::invalid_argument("grid resolution must divide 360 and 180 evenly, got " +
                                std::to_string(r));
  }
}

}  // namespace

Direction::Direction(double azimuth_deg, double elevation_deg) {
  if (!std::isfinite(azimuth_deg) || !std::isfinite(elevation_deg) ||
      elevation_deg < -90.0 - kAngleTol || elevation_deg > 90.0 + kAngleTol) {
    throw std::invalid_argument("direction out of range: elevation " +
                                std::to_string(elevation_deg));
  }
  elevation_ = std::clamp(elevation_deg, -90.0, 90.0);
  if (std::abs(std::abs(elevation_) - 90.0) < kAngleTol) {
    elevation_ = std::copysign(90.0, elevation_);
    azimuth_ = 0.0;
    return;
  }
  double az = std::fmod(azimuth_deg, 360.0);
  if (az < 0.0) az += 360.0;
  if (az >= 360.0 - kAngleTol) az = 0.0;
  azimuth_ = az + 0.0;  // folds -0.0
}

Direction Direction::from_vector(const Vec3& v) {
  const double r = std::hypot(v[0], v[1], v[2]);
  if (!(r > 0.0)) throw std::invalid_argument("zero vector has no direction");
  const double el = std::asin(std::clamp(v[2] / r, -1.0, 1.0)) / kDeg;
  const double az = std::atan2(v[1], v[0]) / kDeg;
  return Direction(az, el);
}

Vec3 Direction::unit_vector() const {
  const double az = azimuth_ * kDeg;
  const double el = elevation_ * kDeg;
  return {std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el)};
}

std::ostream& operator<<(std::ostream& os, const Direction& d) {
  return os << '(' << d.azimuth_deg() << ", " << d.elevation_deg() << ')';
}

double angular_distance(const Direction& a, const Direction& b) {
  const Vec3 u = a.unit_vector();
  const Vec3 v = b.unit_vector();
  // atan2(|u x v|, u . v) is the same central angle as acos(u . v) but
  // keeps full precision for nearly coincident or antipodal directions.
  const double dot = u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
  const double cx = u[1] * v[2] - u[2] * v[1];
  const double cy = u[2] * v[0] - u[0] * v[2];
  const double cz = u[0] * v[1] - u[1] * v[0];
  return std::atan2(std::hypot(cx, cy, cz), dot) / kDeg;
}

std::size_t DirectionGrid::ring_start(std::size_t ring) const {
  return (south_pole_ ? 1 : 0) + ring * azimuth_count_;
}

std::optional<std::size_t> DirectionGrid::find(const Direction& d) const {
  const double el = d.elevation_deg();
  if (std::abs(el + 90.0) < kAngleTol) {
    if (south_pole_) return 0;
    return std::nullopt;
  }
  if (std::abs(el - 90.0) < kAngleTol) {
    if (north_pole_) return directions_.size() - 1;
    return std::nullopt;
  }
  const double ring_pos = (el - rings_.front()) / resolution_;
  const double az_pos = d.azimuth_deg() / resolution_;
  if (std::abs(ring_pos - std::round(ring_pos)) > 1e-6 ||
      std::abs(az_pos - std::round(az_pos)) > 1e-6) {
    return std::nullopt;
  }
  const long ring = std::lround(ring_pos);
  const long az = std::lround(az_pos) % static_cast<long>(azimuth_count_);
  if (ring < 0 || ring >= static_cast<long>(rings_.size())) return std::nullopt;
  return ring_start(static_cast<std::size_t>(ring)) + static_cast<std::size_t>(az);
}

std::size_t DirectionGrid::nearest(const Direction& d) const {
  std::size_t best = 0;
  double best_angle = 1e300;
  for (std::size_t i = 0; i < directions_.size(); ++i) {
    const double a = angular_distance(d, directions_[i]);
    if (a < best_angle) {
      best_angle = a;
      best = i;
    }
  }
  return best;
}

std::vector<std::size_t> DirectionGrid::neighbors(std::size_t index) const {
  if (index >= directions_.size()) {
    throw std::out_of_range("grid index " + std::to_string(index) + " out of range");
  }
  const std::size_t n_az = azimuth_count_;
  const std::size_t n_rings = rings_.size();
  std::vector<std::size_t> out;

  auto ring_all = [&](std::size_t ring) {
    for (std::size_t a = 0; a < n_az; ++a) out.push_back(ring_start(ring) + a);
  };
  if (south_pole_ && index == 0) {
    if (n_rings > 0) ring_all(0);
    else if (north_pole_) out.push_back(directions_.size() - 1);
    return out;
  }
  if (north_pole_ && index == directions_.size() - 1) {
    if (n_rings > 0) ring_all(n_rings - 1);
    else if (south_pole_) out.push_back(0);
    return out;
  }

  const std::size_t local = index - (south_pole_ ? 1 : 0);
  const std::size_t ring = local / n_az;
  const std::size_t az = local % n_az;
  auto push_unique = [&](std::size_t i) {
    if (i != index && std::find(out.begin(), out.end(), i) == out.end()) out.push_back(i);
  };
  auto ring_neighborhood = [&](std::size_t r, bool include_center) {
    const std::size_t left = (az + n_az - 1) % n_az;
    const std::size_t right = (az + 1) % n_az;
    push_unique(ring_start(r) + left);
    if (include_center) push_unique(ring_start(r) + az);
    push_unique(ring_start(r) + right);
  };

  if (ring > 0) ring_neighborhood(ring - 1, true);
  else if (south_pole_) push_unique(0);
  ring_neighborhood(ring, false);
  if (ring + 1 < n_rings) ring_neighborhood(ring + 1, true);
  else if (north_pole_) push_unique(directions_.size() - 1);
  std::sort(out.begin(), out.end());
  return out;
}

bool DirectionGrid::contains_all(const DirectionGrid& other) const {
  return std::all_of(other.directions_.begin(), other.directions_.end(),
                     [&](const Direction& d) { return find(d).has_value(); });
}

DirectionGrid build_sps_grid(double resolution_deg) {
  check_resolution(resolution_deg);
  DirectionGrid g;
  g.kind_ = GridKind::kSps;
  g.resolution_ = resolution_deg;
  g.azimuth_count_ = static_cast<std::size_t>(std::lround(360.0 / resolution_deg));
  const long n_rings = std::lround(180.0 / resolution_deg) - 1;
  for (long k = 1; k <= n_rings; ++k) g.rings_.push_back(-90.0 + k * resolution_deg);
  g.south_pole_ = true;
  g.north_pole_ = true;

  g.directions_.emplace_back(0.0, -90.0);
  for (double el : g.rings_) {
    for (std::size_t a = 0; a < g.azimuth_count_; ++a) {
      g.directions_.emplace_back(a * resolution_deg, el);
    }
  }
  g.directions_.emplace_back(0.0, 90.0);
  return g;
}

DirectionGrid build_doa_grid(double resolution_deg, double min_elevation_deg,
                             double max_elevation_deg) {
  check_resolution(resolution_deg);
  if (!(min_elevation_deg <= max_elevation_deg) || min_elevation_deg <= -90.0 ||
      max_elevation_deg >= 90.0 || !divides(min_elevation_deg, resolution_deg) ||
      !divides(max_elevation_deg, resolution_deg)) {
    throw std::invalid_argument("DOA grid elevation limits must be lattice rings inside (-90, 90)");
  }
  DirectionGrid g;
  g.kind_ = GridKind::kDoa;
  g.resolution_ = resolution_deg;
  g.azimuth_count_ = static_cast<std::size_t>(std::lround(360.0 / resolution_deg));
  const long n_rings = std::lround((max_elevation_deg - min_elevation_deg) / resolution_deg) + 1;
  for (long k = 0; k < n_rings; ++k) g.rings_.push_back(min_elevation_deg + k * resolution_deg);
  for (double el : g.rings_) {
    for (std::size_t a = 0; a < g.azimuth_count_; ++a) {
      g.directions_.emplace_back(a * resolution_deg, el);
    }
  }
  return g;
}

void write_grid_csv(std::ostream& os, const DirectionGrid& grid) {
  os << "index,azimuth_deg,elevation_deg\n";
  for (std::size_t i = 0; i < grid.size(); ++i) {
    os << i << ',' << grid[i].azimuth_deg() << ',' << grid[i].elevation_deg() << '\n';
  }
}

}  // namespace doakit
