// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "doakit/ambisonics.hpp"
#include "doakit/features.hpp"
#include "doakit/geometry.hpp"

namespace doakit {

using cdouble = std::complex<double>;

/// Dense square complex matrix, row-major.
struct ComplexMatrix {
  std::size_t n = 0;
  std::vector<cdouble> data;

  ComplexMatrix() = default;
  explicit ComplexMatrix(std::size_t size) : n(size), data(size * size) {}
  static ComplexMatrix identity(std::size_t size);

  cdouble& operator()(std::size_t r, std::size_t c) { return data[r * n + c]; }
  const cdouble& operator()(std::size_t r, std::size_t c) const { return data[r * n + c]; }

  double frobenius_norm() const;
};

/// Spatial covariance of one feature frame.
struct SpatialCovariance {
  ComplexMatrix matrix;
  std::size_t frame = 0;
  std::size_t first_frame = 0;  // averaging window, inclusive
  std::size_t last_frame = 0;
};

/// Mean of X X^H over all bins and frames [t - h, t + h] clipped to the
/// recording; the result is symmetrized.
SpatialCovariance frame_covariance(const ComplexSpectrogram& spec, std::size_t t,
                                   std::size_t half_window = 2);

/// frame_covariance for every frame, sharing per-frame sums.
std::vector<SpatialCovariance> all_frame_covariances(const ComplexSpectrogram& spec,
                                                     std::size_t half_window = 2);

struct EigenDecomposition {
  std::vector<double> values;  // descending
  ComplexMatrix vectors;       // column k is the eigenvector of values[k]
};

/// Cyclic complex Jacobi. Iterates until the off-diagonal Frobenius norm
/// drops below 1e-12 times the matrix norm. Throws std::invalid_argument if
/// the input deviates from Hermitian by more than 1e-10 relative.
EigenDecomposition eig_hermitian(const ComplexMatrix& a);

/// Per-frame nonnegative intensity over a direction grid, frames x size.
struct PseudoSpectrum {
  std::size_t frames = 0;
  std::size_t directions = 0;
  std::vector<float> values;

  std::span<const float> frame(std::size_t t) const {
    return std::span(values).subspan(t * directions, directions);
  }
  std::span<float> frame(std::size_t t) { return std::span(values).subspan(t * directions, directions); }
};

struct MusicOptions {
  std::size_t half_window = 2;
  /// Lower bound on the projection; values are capped at 1 / floor.
  double denominator_floor = 1e-9;
};

/// MUSIC pseudo-spectrum over a fixed grid with real FOA steering vectors.
class MusicEstimator {
 public:
  explicit MusicEstimator(DirectionGrid grid, MusicOptions options = {});

  const DirectionGrid& grid() const { return grid_; }
  const MusicOptions& options() const { return options_; }

  /// 1 / (y^T U_n U_n^H y) per direction, noise subspace = eigenvectors
  /// O..C-1. O = 0 uses the whole basis. Throws std::invalid_argument for
  /// O >= C.
  std::vector<double> spectrum(const EigenDecomposition& decomp, std::size_t sources) const;

  /// Runs covariance, eigendecomposition and the spectrum for every frame;
  /// `sources[t]` is the source count assumed at frame t.
  PseudoSpectrum run(const ComplexSpectrogram& spec, std::span<const std::size_t> sources) const;

 private:
  DirectionGrid grid_;
  MusicOptions options_;
  std::vector<SteeringVector> steering_;
};

/// Strict local maxima over grid neighbours, sorted by value (ties: lower
/// index first) and truncated to `count`; if fewer maxima exist the rest is
/// filled with the largest remaining values.
std::vector<std::size_t> pick_peaks(std::span<const float> values, const DirectionGrid& grid,
                                    std::size_t count);

void write_sps_file(const std::filesystem::path& path, const PseudoSpectrum& sps);
PseudoSpectrum read_sps_file(const std::filesystem::path& path);

/// Equirectangular 8-bit heatmap of one SPS frame: azimuth left to right,
/// north pole in the top row, each pole filling a whole row. Values are min-
/// max scaled (a constant frame maps to mid gray). `markers` are drawn as
/// black crosses. Each cell becomes a zoom x zoom block.
struct Heatmap {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<unsigned char> pixels;
};
Heatmap render_heatmap(std::span<const float> values, const DirectionGrid& grid,
                       std::span<const Direction> markers = {}, std::size_t zoom = 1);
void write_pgm(const std::filesystem::path& path, const Heatmap& image);

}  // namespace doakit
