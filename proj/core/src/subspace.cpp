// SPDX-License-Identifier: Apache-2.0
#include "doakit/subspace.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>

#include "doakit/container.hpp"

namespace doakit {

ComplexMatrix ComplexMatrix::identity(std::size_t size) {
  ComplexMatrix m(size);
  for (std::size_t i = 0; i < size; ++i) m(i, i) = 1.0;
  return m;
}

double ComplexMatrix::frobenius_norm() const {
  double s = 0.0;
  for (const auto& z : data) s += std::norm(z);
  return std::sqrt(s);
}

namespace {

ComplexMatrix frame_sum(const ComplexSpectrogram& spec, std::size_t t) {
  const std::size_t C = spec.channels();
  ComplexMatrix m(C);
  for (std::size_t b = 0; b < spec.bins(); ++b) {
    const auto x = spec.vector(t, b);
    for (std::size_t r = 0; r < C; ++r) {
      const cdouble xr(x[r]);
      for (std::size_t c = r; c < C; ++c) m(r, c) += xr * std::conj(cdouble(x[c]));
    }
  }
  for (std::size_t r = 0; r < C; ++r) {
    for (std::size_t c = 0; c < r; ++c) m(r, c) = std::conj(m(c, r));
  }
  return m;
}

void symmetrize(ComplexMatrix& m) {
  for (std::size_t r = 0; r < m.n; ++r) {
    m(r, r) = m(r, r).real();
    for (std::size_t c = r + 1; c < m.n; ++c) {
      const cdouble avg = 0.5 * (m(r, c) + std::conj(m(c, r)));
      m(r, c) = avg;
      m(c, r) = std::conj(avg);
    }
  }
}

SpatialCovariance average(const std::vector<ComplexMatrix>& sums, std::size_t t, std::size_t half,
                          std::size_t bins) {
  SpatialCovariance cov;
  cov.frame = t;
  cov.first_frame = t >= half ? t - half : 0;
  cov.last_frame = std::min(sums.size() - 1, t + half);
  const std::size_t C = sums.front().n;
  cov.matrix = ComplexMatrix(C);
  for (std::size_t k = cov.first_frame; k <= cov.last_frame; ++k) {
    for (std::size_t i = 0; i < C * C; ++i) cov.matrix.data[i] += sums[k].data[i];
  }
  const double count = static_cast<double>((cov.last_frame - cov.first_frame + 1) * bins);
  for (auto& z : cov.matrix.data) z /= count;
  symmetrize(cov.matrix);
  return cov;
}

}  // namespace

SpatialCovariance frame_covariance(const ComplexSpectrogram& spec, std::size_t t,
                                   std::size_t half_window) {
  if (t >= spec.frames()) throw std::out_of_range("frame index out of range");
  const std::size_t first = t >= half_window ? t - half_window : 0;
  const std::size_t last = std::min(spec.frames() - 1, t + half_window);
  std::vector<ComplexMatrix> sums(spec.frames());
  for (std::size_t k = first; k <= last; ++k) sums[k] = frame_sum(spec, k);
  for (auto& s : sums) {
    if (s.n == 0) s = ComplexMatrix(spec.channels());
  }
  return average(sums, t, half_window, spec.bins());
}

std::vector<SpatialCovariance> all_frame_covariances(const ComplexSpectrogram& spec,
                                                     std::size_t half_window) {
  std::vector<ComplexMatrix> sums(spec.frames());
  for (std::size_t t = 0; t < spec.frames(); ++t) sums[t] = frame_sum(spec, t);
  std::vector<SpatialCovariance> out;
  out.reserve(spec.frames());
  for (std::size_t t = 0; t < spec.frames(); ++t) out.push_back(average(sums, t, half_window, spec.bins()));
  return out;
}

EigenDecomposition eig_hermitian(const ComplexMatrix& input) {
  const std::size_t n = input.n;
  const double norm = input.frobenius_norm();
  double asym = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) asym += std::norm(input(r, c) - std::conj(input(c, r)));
  }
  if (std::sqrt(asym) > 1e-10 * std::max(norm, 1e-300)) {
    throw std::invalid_argument("matrix is not Hermitian");
  }

  ComplexMatrix a = input;
  symmetrize(a);
  ComplexMatrix v = ComplexMatrix::identity(n);

  auto off_norm = [&] {
    double s = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < n; ++c) {
        if (r != c) s += std::norm(a(r, c));
      }
    }
    return std::sqrt(s);
  };

  const double tol = 1e-12 * norm;
  for (int sweep = 0; sweep < 100 && norm > 0.0 && off_norm() > tol; ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double mag = std::abs(a(p, q));
        if (mag == 0.0) continue;
        // Phase-align a_pq to the positive real axis, then apply the real
        // symmetric Jacobi rotation.
        const cdouble phase = a(p, q) / mag;  // e^{i phi}
        const double tau = (a(q, q).real() - a(p, p).real()) / (2.0 * mag);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        // G = diag(1, e^{-i phi}) * [[c, s], [-s, c]] in the (p, q) plane.
        const cdouble g_pp = c, g_pq = s;
        const cdouble g_qp = -s * std::conj(phase), g_qq = c * std::conj(phase);
        for (std::size_t k = 0; k < n; ++k) {  // A <- A G
          const cdouble akp = a(k, p), akq = a(k, q);
          a(k, p) = akp * g_pp + akq * g_qp;
          a(k, q) = akp * g_pq + akq * g_qq;
        }
        for (std::size_t k = 0; k < n; ++k) {  // A <- G^H A
          const cdouble apk = a(p, k), aqk = a(q, k);
          a(p, k) = std::conj(g_pp) * apk + std::conj(g_qp) * aqk;
          a(q, k) = std::conj(g_pq) * apk + std::conj(g_qq) * aqk;
        }
        a(p, q) = a(q, p) = 0.0;
        a(p, p) = a(p, p).real();
        a(q, q) = a(q, q).real();
        for (std::size_t k = 0; k < n; ++k) {  // V <- V G
          const cdouble vkp = v(k, p), vkq = v(k, q);
          v(k, p) = vkp * g_pp + vkq * g_qp;
          v(k, q) = vkp * g_pq + vkq * g_qq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a(i, i).real() > a(j, j).real(); });
  EigenDecomposition out;
  out.vectors = ComplexMatrix(n);
  for (std::size_t k = 0; k < n; ++k) {
    out.values.push_back(a(order[k], order[k]).real());
    for (std::size_t r = 0; r < n; ++r) out.vectors(r, k) = v(r, order[k]);
  }
  return out;
}

MusicEstimator::MusicEstimator(DirectionGrid grid, MusicOptions options)
    : grid_(std::move(grid)), options_(options) {
  if (!(options_.denominator_floor > 0.0)) throw std::invalid_argument("denominator floor must be positive");
  steering_.reserve(grid_.size());
  for (const auto& d : grid_.directions()) steering_.push_back(encode_direction(d));
}

std::vector<double> MusicEstimator::spectrum(const EigenDecomposition& decomp,
                                             std::size_t sources) const {
  const std::size_t C = decomp.vectors.n;
  if (C != kFoaChannels) throw std::invalid_argument("MUSIC expects a 4-channel decomposition");
  if (sources >= C) {
    throw std::invalid_argument("MUSIC can resolve at most " + std::to_string(C - 1) + " sources");
  }
  std::vector<double> out(grid_.size());
  for (std::size_t i = 0; i < grid_.size(); ++i) {
    const SteeringVector& y = steering_[i];
    double denom = 0.0;  // sum_k |u_k^H y|^2 over noise eigenvectors
    for (std::size_t k = sources; k < C; ++k) {
      cdouble proj = 0.0;
      for (std::size_t r = 0; r < C; ++r) proj += std::conj(decomp.vectors(r, k)) * y[r];
      denom += std::norm(proj);
    }
    out[i] = 1.0 / std::max(denom, options_.denominator_floor);
  }
  return out;
}

PseudoSpectrum MusicEstimator::run(const ComplexSpectrogram& spec,
                                   std::span<const std::size_t> sources) const {
  if (sources.size() != spec.frames()) {
    throw std::invalid_argument("source counts must cover every frame");
  }
  const auto covs = all_frame_covariances(spec, options_.half_window);
  PseudoSpectrum sps;
  sps.frames = spec.frames();
  sps.directions = grid_.size();
  sps.values.resize(sps.frames * sps.directions);
  for (std::size_t t = 0; t < spec.frames(); ++t) {
    const auto vals = spectrum(eig_hermitian(covs[t].matrix), sources[t]);
    auto dst = sps.frame(t);
    for (std::size_t i = 0; i < vals.size(); ++i) dst[i] = static_cast<float>(vals[i]);
  }
  return sps;
}

std::vector<std::size_t> pick_peaks(std::span<const float> values, const DirectionGrid& grid,
                                    std::size_t count) {
  if (values.size() != grid.size()) throw std::invalid_argument("SPS frame does not match the grid");
  auto by_value = [&](std::size_t i, std::size_t j) {
    return values[i] > values[j] || (values[i] == values[j] && i < j);
  };
  std::vector<std::size_t> peaks, rest;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto nb = grid.neighbors(i);
    const bool is_peak = std::all_of(nb.begin(), nb.end(), [&](std::size_t j) { return values[i] > values[j]; });
    (is_peak ? peaks : rest).push_back(i);
  }
  std::sort(peaks.begin(), peaks.end(), by_value);
  if (peaks.size() >= count) {
    peaks.resize(count);
    return peaks;
  }
  std::sort(rest.begin(), rest.end(), by_value);
  for (std::size_t k = 0; peaks.size() < count && k < rest.size(); ++k) peaks.push_back(rest[k]);
  return peaks;
}

void write_sps_file(const std::filesystem::path& path, const PseudoSpectrum& sps) {
  write_container(path, kSpsMagic, static_cast<std::uint32_t>(sps.frames),
                  static_cast<std::uint32_t>(sps.directions), 1, static_cast<std::uint32_t>(sps.frames),
                  sps.values);
}

PseudoSpectrum read_sps_file(const std::filesystem::path& path) {
  ContainerData d = read_container(path, kSpsMagic);
  PseudoSpectrum sps;
  sps.frames = d.header.rows;
  sps.directions = d.header.columns;
  sps.values = std::move(d.values);
  return sps;
}

Heatmap render_heatmap(std::span<const float> values, const DirectionGrid& grid,
                       std::span<const Direction> markers, std::size_t zoom) {
  if (values.size() != grid.size()) throw std::invalid_argument("SPS frame does not match the grid");
  if (zoom == 0) throw std::invalid_argument("zoom must be positive");
  const std::size_t cols = grid.azimuth_count();
  const std::size_t rows = grid.ring_elevations().size() + (grid.has_south_pole() ? 1 : 0) +
                           (grid.has_north_pole() ? 1 : 0);
  // cell (row, col) -> grid index; row 0 is the highest elevation.
  auto cell_index = [&](std::size_t row, std::size_t col) -> std::size_t {
    std::size_t r = row;
    if (grid.has_north_pole()) {
      if (r == 0) return grid.size() - 1;
      --r;
    }
    const std::size_t n_rings = grid.ring_elevations().size();
    if (r < n_rings) {
      const std::size_t ring = n_rings - 1 - r;
      return (grid.has_south_pole() ? 1 : 0) + ring * cols + col;
    }
    return 0;  // south pole row
  };
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it, hi = *hi_it;
  std::vector<unsigned char> cells(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const double v = values[cell_index(r, c)];
      cells[r * cols + c] =
          hi > lo ? static_cast<unsigned char>(std::lround(255.0 * (v - lo) / (hi - lo))) : 128;
    }
  }
  for (const auto& m : markers) {
    const auto idx = grid.nearest(m);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        if (cell_index(r, c) != idx) continue;
        cells[r * cols + c] = 0;
        if (r > 0) cells[(r - 1) * cols + c] = 0;
        if (r + 1 < rows) cells[(r + 1) * cols + c] = 0;
        cells[r * cols + (c + cols - 1) % cols] = 0;
        cells[r * cols + (c + 1) % cols] = 0;
        r = rows;  // first matching cell only
        break;
      }
    }
  }
  Heatmap img;
  img.width = cols * zoom;
  img.height = rows * zoom;
  img.pixels.resize(img.width * img.height);
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) img.pixels[y * img.width + x] = cells[(y / zoom) * cols + x / zoom];
  }
  return img;
}

void write_pgm(const std::filesystem::path& path, const Heatmap& image) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "P5\n" << image.width << ' ' << image.height << "\n255\n";
  os.write(reinterpret_cast<const char*>(image.pixels.data()),
           static_cast<std::streamsize>(image.pixels.size()));
}

}  // namespace doakit
