// SPDX-License-Identifier: Apache-2.0
#include "doakit/features.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <string>

#include "doakit/container.hpp"
#include "doakit/dataset.hpp"
#include "doakit/dsp.hpp"
#include "doakit/errors.hpp"

namespace doakit {

ComplexSpectrogram::ComplexSpectrogram(std::size_t frames, std::size_t bins, std::size_t channels)
    : frames_(frames), bins_(bins), channels_(channels), data_(frames * bins * channels) {}

std::vector<double> hamming_window(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
  }
  return w;
}

ComplexSpectrogram stft(const AmbisonicBuffer& buffer, const FrameLayout& layout) {
  if (layout.window > layout.fft_size || layout.hop == 0) {
    throw std::invalid_argument("invalid frame layout");
  }
  const std::size_t frames = layout.frame_count(buffer.frames());
  if (frames == 0) throw std::invalid_argument("buffer shorter than one analysis window");
  const std::size_t bins = layout.fft_size / 2;
  ComplexSpectrogram spec(frames, bins, kFoaChannels);
  const auto window = hamming_window(layout.window);
  RealFft fft(layout.fft_size);
  std::vector<double> frame(layout.fft_size, 0.0);
  std::vector<std::complex<double>> out(layout.fft_size / 2 + 1);
  for (std::size_t c = 0; c < kFoaChannels; ++c) {
    const auto ch = buffer.channel(c);
    for (std::size_t t = 0; t < frames; ++t) {
      const std::size_t start = layout.frame_begin(t);
      for (std::size_t i = 0; i < layout.window; ++i) frame[i] = window[i] * ch[start + i];
      fft.forward(frame, out);
      for (std::size_t b = 0; b < bins; ++b) spec.at(t, b, c) = std::complex<float>(out[b + 1]);
    }
  }
  return spec;
}

std::vector<SpectrogramTensor> assemble_sequences(const ComplexSpectrogram& spec, std::size_t length) {
  if (length == 0) throw std::invalid_argument("sequence length must be positive");
  const std::size_t C = spec.channels();
  std::vector<SpectrogramTensor> out;
  for (std::size_t start = 0; start < spec.frames(); start += length) {
    SpectrogramTensor x;
    x.length = length;
    x.bins = spec.bins();
    x.channels = 2 * C;
    x.valid_frames = std::min(length, spec.frames() - start);
    x.values.assign(length * x.bins * x.channels, 0.0f);
    for (std::size_t t = 0; t < x.valid_frames; ++t) {
      for (std::size_t f = 0; f < x.bins; ++f) {
        for (std::size_t c = 0; c < C; ++c) {
          const std::complex<float> z = spec.at(start + t, f, c);
          float phase = std::atan2(z.imag(), z.real());
          if (phase <= -std::numbers::pi_v<float>) phase = std::numbers::pi_v<float>;
          x.at(t, f, c) = std::abs(z);
          x.at(t, f, C + c) = phase;
        }
      }
    }
    out.push_back(std::move(x));
  }
  return out;
}

void write_feature_file(const std::filesystem::path& path, const SpectrogramTensor& x) {
  write_container(path, kFeatureMagic, static_cast<std::uint32_t>(x.length),
                  static_cast<std::uint32_t>(x.bins), static_cast<std::uint32_t>(x.channels),
                  static_cast<std::uint32_t>(x.valid_frames), x.values);
}

SpectrogramTensor read_feature_file(const std::filesystem::path& path) {
  ContainerData d = read_container(path, kFeatureMagic);
  SpectrogramTensor x;
  x.length = d.header.rows;
  x.bins = d.header.columns;
  x.channels = d.header.channels;
  x.valid_frames = d.header.valid_rows;
  x.values = std::move(d.values);
  return x;
}

void write_feature_index(const std::filesystem::path& path,
                         const std::vector<FeatureIndexEntry>& entries) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "sequence,file,valid_frames\n";
  for (const auto& e : entries) os << e.sequence << ',' << e.file << ',' << e.valid_frames << '\n';
}

std::vector<FeatureIndexEntry> read_feature_index(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw MissingInputError("cannot open " + path.string());
  std::string line;
  if (!std::getline(is, line) || line != "sequence,file,valid_frames") {
    throw FormatError("unexpected feature index header in " + path.string());
  }
  std::vector<FeatureIndexEntry> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 3) throw FormatError("malformed feature index row: " + line);
    out.push_back({std::stoul(f[0]), f[1], std::stoul(f[2])});
  }
  return out;
}

}  // namespace doakit
