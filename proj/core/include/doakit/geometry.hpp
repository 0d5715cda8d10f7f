// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <ostream>
#include <vector>

namespace doakit {

using Vec3 = std::array<double, 3>;

/// A direction on the unit sphere: azimuth in [0, 360), elevation in
/// [-90, 90], both in degrees. Azimuth is measured counter-clockwise from the
/// +x axis towards +y; elevation is positive towards +z. The poles carry the
/// canonical azimuth 0.
class Direction {
 public:
  Direction() = default;

  /// Normalizes azimuth; throws std::invalid_argument when the elevation is
  /// outside [-90, 90].
  Direction(double azimuth_deg, double elevation_deg);

  /// Direction of a non-zero Cartesian vector.
  static Direction from_vector(const Vec3& v);

  double azimuth_deg() const { return azimuth_; }
  double elevation_deg() const { return elevation_; }

  Vec3 unit_vector() const;

  friend bool operator==(const Direction&, const Direction&) = default;

 private:
  double azimuth_ = 0.0;
  double elevation_ = 0.0;
};

std::ostream& operator<<(std::ostream& os, const Direction& d);

/// Great-circle angle between two directions, in degrees within [0, 180].
double angular_distance(const Direction& a, const Direction& b);

enum class GridKind { kSps, kDoa };

/// Regular azimuth/elevation lattice.
///
/// Ordering is elevation-major ascending, azimuth ascending within a ring.
/// Pole points, when present, appear once each (south pole first, north pole
/// last). Network output nodes bind to this ordering.
class DirectionGrid {
 public:
  GridKind kind() const { return kind_; }
  double resolution_deg() const { return resolution_; }
  std::size_t size() const { return directions_.size(); }
  const std::vector<Direction>& directions() const { return directions_; }
  const Direction& operator[](std::size_t i) const { return directions_[i]; }

  std::size_t azimuth_count() const { return azimuth_count_; }
  const std::vector<double>& ring_elevations() const { return rings_; }
  bool has_south_pole() const { return south_pole_; }
  bool has_north_pole() const { return north_pole_; }

  /// Position of a direction that lies exactly on the lattice.
  std::optional<std::size_t> find(const Direction& d) const;

  /// Nearest lattice point by central angle.
  std::size_t nearest(const Direction& d) const;

  /// Lattice neighbours of a point: up to 8 for ring points; a pole neighbours
  /// its whole adjacent ring. Azimuth wraps modulo 360.
  std::vector<std::size_t> neighbors(std::size_t index) const;

  /// True when every direction of `other` is present in this grid.
  bool contains_all(const DirectionGrid& other) const;

 private:
  friend DirectionGrid build_sps_grid(double);
  friend DirectionGrid build_doa_grid(double, double, double);

  std::size_t ring_start(std::size_t ring) const;

  GridKind kind_ = GridKind::kSps;
  double resolution_ = 10.0;
  std::size_t azimuth_count_ = 0;
  std::vector<double> rings_;
  bool south_pole_ = false;
  bool north_pole_ = false;
  std::vector<Direction> directions_;
};

/// Full-sphere grid: (360/r)(180/r - 1) ring points plus both poles.
DirectionGrid build_sps_grid(double resolution_deg = 10.0);

/// Ring-only grid restricted to elevations [min_elevation, max_elevation].
/// The default range {-60, ..., 50} yields 36 x 12 = 432 directions at 10°.
DirectionGrid build_doa_grid(double resolution_deg = 10.0, double min_elevation_deg = -60.0,
                             double max_elevation_deg = 50.0);

/// Writes `index,azimuth_deg,elevation_deg` rows.
void write_grid_csv(std::ostream& os, const DirectionGrid& grid);

}  // namespace doakit
