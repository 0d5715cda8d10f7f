// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>

namespace doakit {

/// STFT frame layout shared by feature extraction and ground truth:
/// frame t covers samples [t * hop, t * hop + window).
struct FrameLayout {
  std::size_t window = 1764;  // 40 ms at 44.1 kHz
  std::size_t hop = 882;      // 50 % overlap
  std::size_t fft_size = 2048;

  /// 1 + floor((n - window) / hop), or 0 when one window does not fit.
  std::size_t frame_count(std::size_t samples) const {
    return samples < window ? 0 : 1 + (samples - window) / hop;
  }
  std::size_t frame_begin(std::size_t t) const { return t * hop; }
  std::size_t frame_end(std::size_t t) const { return t * hop + window; }
};

}  // namespace doakit
