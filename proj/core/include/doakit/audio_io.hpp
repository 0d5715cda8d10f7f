// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <vector>

#include "doakit/ambisonics.hpp"

namespace doakit {

struct WavData {
  int sample_rate = 0;
  std::vector<std::vector<float>> channels;
};

/// Reads RIFF/WAVE files with 16/24/32-bit PCM or 32-bit float samples.
/// Throws MissingInputError when the file does not exist and FormatError on
/// unsupported content.
WavData read_wav(const std::filesystem::path& path);

/// Writes 32-bit IEEE float samples, interleaved, little-endian.
void write_wav(const std::filesystem::path& path, const WavData& data);

/// 4-channel float WAV in ACN order.
void write_ambisonic_wav(const std::filesystem::path& path, const AmbisonicBuffer& buffer);
AmbisonicBuffer read_ambisonic_wav(const std::filesystem::path& path);

}  // namespace doakit
