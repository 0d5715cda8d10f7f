// SPDX-License-Identifier: Apache-2.0
// Random 4x4 complex matrices and eigendecomposition residuals.
#pragma once

#include <algorithm>
#include <cmath>
#include <utility>

#include "doakit/rng.hpp"
#include "doakit/subspace.hpp"

namespace doakit::testing {

inline ComplexMatrix random_unitary(Rng& rng) {
  // Gram-Schmidt on a random complex matrix, column by column.
  ComplexMatrix q(4);
  for (std::size_t c = 0; c < 4; ++c) {
    for (std::size_t r = 0; r < 4; ++r) q(r, c) = {rng.gaussian(), rng.gaussian()};
    for (std::size_t p = 0; p < c; ++p) {
      cdouble dot = 0;
      for (std::size_t r = 0; r < 4; ++r) dot += std::conj(q(r, p)) * q(r, c);
      for (std::size_t r = 0; r < 4; ++r) q(r, c) -= dot * q(r, p);
    }
    double n = 0;
    for (std::size_t r = 0; r < 4; ++r) n += std::norm(q(r, c));
    for (std::size_t r = 0; r < 4; ++r) q(r, c) /= std::sqrt(n);
  }
  return q;
}

inline ComplexMatrix random_hermitian(Rng& rng) {
  ComplexMatrix a(4);
  for (std::size_t r = 0; r < 4; ++r) {
    a(r, r) = rng.gaussian();
    for (std::size_t c = r + 1; c < 4; ++c) {
      a(r, c) = {rng.gaussian(), rng.gaussian()};
      a(c, r) = std::conj(a(r, c));
    }
  }
  return a;
}

/// max |A V - V diag(w)| / |A| and max |V^H V - I|.
inline std::pair<double, double> decomposition_errors(const ComplexMatrix& a, const EigenDecomposition& e) {
  double recon = 0, ortho = 0;
  for (std::size_t r = 0; r < 4; ++r) {
    for (std::size_t k = 0; k < 4; ++k) {
      cdouble av = 0;
      for (std::size_t m = 0; m < 4; ++m) av += a(r, m) * e.vectors(m, k);
      recon = std::max(recon, std::abs(av - e.values[k] * e.vectors(r, k)));
      cdouble g = 0;
      for (std::size_t m = 0; m < 4; ++m) g += std::conj(e.vectors(m, r)) * e.vectors(m, k);
      ortho = std::max(ortho, std::abs(g - (r == k ? 1.0 : 0.0)));
    }
  }
  return {recon / std::max(a.frobenius_norm(), 1e-300), ortho};
}

/// |A - V diag(w) V^H|_F / |A|_F.
inline double reconstruction_error(const ComplexMatrix& a, const EigenDecomposition& e) {
  double err = 0;
  for (std::size_t r = 0; r < 4; ++r) {
    for (std::size_t c = 0; c < 4; ++c) {
      cdouble v = 0;
      for (std::size_t k = 0; k < 4; ++k) v += e.vectors(r, k) * e.values[k] * std::conj(e.vectors(c, k));
      err += std::norm(a(r, c) - v);
    }
  }
  return std::sqrt(err) / std::max(a.frobenius_norm(), 1e-300);
}

}  // namespace doakit::testing
