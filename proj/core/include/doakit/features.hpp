// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "doakit/ambisonics.hpp"
#include "doakit/framing.hpp"

namespace doakit {

inline constexpr std::size_t kSpectrumBins = 1024;

/// Positive-frequency STFT without the DC bin: bin b is (b + 1) * fs / 2048.
/// Stored frame-major, then bin, then channel.
class ComplexSpectrogram {
 public:
  ComplexSpectrogram() = default;
  ComplexSpectrogram(std::size_t frames, std::size_t bins, std::size_t channels);

  std::size_t frames() const { return frames_; }
  std::size_t bins() const { return bins_; }
  std::size_t channels() const { return channels_; }

  std::complex<float>& at(std::size_t t, std::size_t b, std::size_t c) {
    return data_[(t * bins_ + b) * channels_ + c];
  }
  const std::complex<float>& at(std::size_t t, std::size_t b, std::size_t c) const {
    return data_[(t * bins_ + b) * channels_ + c];
  }
  /// The C-dimensional vector X(f, t).
  std::span<const std::complex<float>> vector(std::size_t t, std::size_t b) const {
    return std::span(data_).subspan((t * bins_ + b) * channels_, channels_);
  }

 private:
  std::size_t frames_ = 0, bins_ = 0, channels_ = 0;
  std::vector<std::complex<float>> data_;
};

/// Periodic Hamming window, 0.54 - 0.46 cos(2 pi n / N).
std::vector<double> hamming_window(std::size_t n);

/// Hamming-windowed frames of layout.window samples, zero-padded to
/// layout.fft_size, hop layout.hop, no centring. Throws
/// std::invalid_argument when the buffer is shorter than one window.
ComplexSpectrogram stft(const AmbisonicBuffer& buffer, const FrameLayout& layout = {});

/// L x bins x 2C network input: magnitudes of all channels, then phases in
/// (-pi, pi].
struct SpectrogramTensor {
  std::size_t length = 100;
  std::size_t bins = kSpectrumBins;
  std::size_t channels = 2 * kFoaChannels;
  std::size_t valid_frames = 0;
  std::vector<float> values;

  float& at(std::size_t t, std::size_t f, std::size_t c) { return values[(t * bins + f) * channels + c]; }
  float at(std::size_t t, std::size_t f, std::size_t c) const {
    return values[(t * bins + f) * channels + c];
  }
  friend bool operator==(const SpectrogramTensor&, const SpectrogramTensor&) = default;
};

/// Consecutive non-overlapping blocks of `length` frames; the final partial
/// block is zero-padded and records its valid length.
std::vector<SpectrogramTensor> assemble_sequences(const ComplexSpectrogram& spec,
                                                  std::size_t length = 100);

/// Number of sequences assemble_sequences produces for `frames`.
inline std::size_t sequence_count(std::size_t frames, std::size_t length = 100) {
  return (frames + length - 1) / length;
}

void write_feature_file(const std::filesystem::path& path, const SpectrogramTensor& tensor);
SpectrogramTensor read_feature_file(const std::filesystem::path& path);

/// Per-recording feature index: sequence,file,valid_frames.
struct FeatureIndexEntry {
  std::size_t sequence = 0;
  std::string file;
  std::size_t valid_frames = 0;
};
void write_feature_index(const std::filesystem::path& path,
                         const std::vector<FeatureIndexEntry>& entries);
std::vector<FeatureIndexEntry> read_feature_index(const std::filesystem::path& path);

}  // namespace doakit
