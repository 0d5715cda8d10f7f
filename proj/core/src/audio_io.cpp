// SPDX-License-Identifier: Apache-2.0
#include "doakit/audio_io.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "doakit/errors.hpp"

namespace doakit {
namespace {

static_assert(std::endian::native == std::endian::little, "WAV I/O assumes a little-endian host");

std::uint32_t u32(const unsigned char* p) {
  std::uint32_t v;
  std::memcpy(&v, p, 4);
  return v;
}
std::uint16_t u16(const unsigned char* p) {
  std::uint16_t v;
  std::memcpy(&v, p, 2);
  return v;
}

template <class T>
void put(std::ofstream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

}  // namespace

WavData read_wav(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw MissingInputError("cannot open WAV file: " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)), {});
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw FormatError("not a RIFF/WAVE file: " + path.string());
  }

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::size_t size = u32(chunk + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) {
      if (std::memcmp(chunk, "data", 4) == 0) {
        data = bytes.data() + body;
        data_size = bytes.size() - body;
      }
      break;
    }
    if (std::memcmp(chunk, "fmt ", 4) == 0 && size >= 16) {
      format = u16(chunk + 8);
      channels = u16(chunk + 10);
      rate = u32(chunk + 12);
      bits = u16(chunk + 22);
      if (format == 0xFFFE && size >= 40) format = u16(chunk + 8 + 24);
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = bytes.data() + body;
      data_size = size;
    }
    pos = body + size + (size & 1);
  }
  if (channels == 0 || data == nullptr) throw FormatError("WAV without fmt/data: " + path.string());

  const bool is_float = format == 3 && bits == 32;
  const bool is_pcm = format == 1 && (bits == 16 || bits == 24 || bits == 32);
  if (!is_float && !is_pcm) {
    throw FormatError("unsupported WAV encoding (format " + std::to_string(format) + ", " +
                      std::to_string(bits) + " bits): " + path.string());
  }

  const std::size_t bytes_per_sample = bits / 8;
  const std::size_t frames = data_size / (bytes_per_sample * channels);
  WavData out;
  out.sample_rate = static_cast<int>(rate);
  out.channels.assign(channels, std::vector<float>(frames));
  for (std::size_t i = 0; i < frames; ++i) {
    for (std::size_t c = 0; c < channels; ++c) {
      const unsigned char* p = data + (i * channels + c) * bytes_per_sample;
      float v;
      if (is_float) {
        std::memcpy(&v, p, 4);
      } else if (bits == 16) {
        v = static_cast<float>(static_cast<std::int16_t>(u16(p))) / 32768.0f;
      } else if (bits == 24) {
        std::int32_t s = (p[0] << 8) | (p[1] << 16) | (p[2] << 24);
        v = static_cast<float>(s >> 8) / 8388608.0f;
      } else {
        v = static_cast<float>(static_cast<std::int32_t>(u32(p)) / 2147483648.0);
      }
      out.channels[c][i] = v;
    }
  }
  return out;
}

void write_wav(const std::filesystem::path& path, const WavData& data) {
  const std::uint16_t channels = static_cast<std::uint16_t>(data.channels.size());
  const std::size_t frames = channels ? data.channels.front().size() : 0;
  for (const auto& c : data.channels) {
    if (c.size() != frames) throw std::invalid_argument("WAV channels differ in length");
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write WAV file: " + path.string());
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(frames * channels * 4);
  os.write("RIFF", 4);
  put<std::uint32_t>(os, 36 + data_bytes);
  os.write("WAVEfmt ", 8);
  put<std::uint32_t>(os, 16);
  put<std::uint16_t>(os, 3);
  put<std::uint16_t>(os, channels);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(data.sample_rate));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(data.sample_rate) * channels * 4);
  put<std::uint16_t>(os, static_cast<std::uint16_t>(channels * 4));
  put<std::uint16_t>(os, 32);
  os.write("data", 4);
  put<std::uint32_t>(os, data_bytes);
  std::vector<float> interleaved(frames * channels);
  for (std::size_t i = 0; i < frames; ++i) {
    for (std::size_t c = 0; c < channels; ++c) interleaved[i * channels + c] = data.channels[c][i];
  }
  os.write(reinterpret_cast<const char*>(interleaved.data()),
           static_cast<std::streamsize>(interleaved.size() * sizeof(float)));
  if (!os) throw std::runtime_error("short write: " + path.string());
}

void write_ambisonic_wav(const std::filesystem::path& path, const AmbisonicBuffer& buffer) {
  WavData w;
  w.sample_rate = buffer.sample_rate();
  for (std::size_t c = 0; c < kFoaChannels; ++c) {
    auto ch = buffer.channel(c);
    w.channels.emplace_back(ch.begin(), ch.end());
  }
  write_wav(path, w);
}

AmbisonicBuffer read_ambisonic_wav(const std::filesystem::path& path) {
  WavData w = read_wav(path);
  if (w.channels.size() != kFoaChannels) {
    throw FormatError("expected 4-channel FOA WAV: " + path.string());
  }
  AmbisonicBuffer b(w.channels.front().size(), w.sample_rate);
  for (std::size_t c = 0; c < kFoaChannels; ++c) {
    std::copy(w.channels[c].begin(), w.channels[c].end(), b.channel(c).begin());
  }
  return b;
}

}  // namespace doakit
