// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <filesystem>
#include <numbers>

#include "doakit/container.hpp"
#include "doakit/errors.hpp"
#include "doakit/features.hpp"
#include "doakit/rng.hpp"

namespace doakit {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "doakit_unit_features";
  fs::create_directories(dir);
  return dir / name;
}

TEST(Stft, ThirtySecondsGives1499Frames) {
  const AmbisonicBuffer buf(30 * kSampleRate);
  const auto spec = stft(buf);
  EXPECT_EQ(spec.frames(), 1499u);
  EXPECT_EQ(spec.bins(), 1024u);
  EXPECT_EQ(spec.channels(), 4u);
  EXPECT_EQ(FrameLayout{}.frame_count(1323000), 1499u);
}

TEST(Stft, ZeroInputZeroSpectrogram) {
  const auto spec = stft(AmbisonicBuffer(10000));
  for (std::size_t t = 0; t < spec.frames(); ++t) {
    for (std::size_t b = 0; b < spec.bins(); ++b) {
      for (std::size_t c = 0; c < 4; ++c) ASSERT_EQ(spec.at(t, b, c), std::complex<float>(0.0f));
    }
  }
}

TEST(Stft, ShorterThanWindowRejected) { EXPECT_THROW(stft(AmbisonicBuffer(1000)), std::invalid_argument); }

TEST(Stft, SinePeaksAtExpectedBin) {
  AmbisonicBuffer buf(8000);
  auto w = buf.channel(0);
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = static_cast<float>(std::sin(2 * std::numbers::pi * 1000.0 * static_cast<double>(i) / kSampleRate));
  }
  const auto spec = stft(buf);
  for (std::size_t t = 0; t < spec.frames(); ++t) {
    std::size_t best = 0;
    for (std::size_t b = 1; b < spec.bins(); ++b) {
      if (std::abs(spec.at(t, b, 0)) > std::abs(spec.at(t, best, 0))) best = b;
    }
    EXPECT_EQ(best, 45u);
    EXPECT_EQ(std::abs(spec.at(t, 45, 1)), 0.0f);
  }
}

TEST(Stft, MatchesDirectDft) {
  // One frame against a naive DFT of the Hamming-windowed, zero-padded frame.
  Rng rng(9);
  AmbisonicBuffer buf(1764);
  for (std::size_t c = 0; c < 4; ++c) {
    for (auto& v : buf.channel(c)) v = static_cast<float>(rng.uniform(-1, 1));
  }
  const auto spec = stft(buf);
  ASSERT_EQ(spec.frames(), 1u);
  const auto win = hamming_window(1764);
  for (std::size_t b : {0u, 1u, 37u, 500u, 1023u}) {
    std::complex<double> acc = 0;
    const std::size_t k = b + 1;
    for (std::size_t n = 0; n < 1764; ++n) {
      acc += win[n] * static_cast<double>(buf.channel(2)[n]) *
             std::polar(1.0, -2 * std::numbers::pi * static_cast<double>(k * n) / 2048.0);
    }
    EXPECT_NEAR(spec.at(0, b, 2).real(), acc.real(), 1e-3 * (1 + std::abs(acc)));
    EXPECT_NEAR(spec.at(0, b, 2).imag(), acc.imag(), 1e-3 * (1 + std::abs(acc)));
  }
}

TEST(Sequences, CountsAndPadding) {
  ComplexSpectrogram spec(1499, 4, 4);
  spec.at(1498, 3, 2) = {3.0f, 4.0f};
  const auto seqs = assemble_sequences(spec, 100);
  ASSERT_EQ(seqs.size(), 15u);
  EXPECT_EQ(sequence_count(1499, 100), 15u);
  for (std::size_t i = 0; i + 1 < seqs.size(); ++i) EXPECT_EQ(seqs[i].valid_frames, 100u);
  const auto& last = seqs.back();
  EXPECT_EQ(last.valid_frames, 99u);
  EXPECT_EQ(last.channels, 8u);
  EXPECT_FLOAT_EQ(last.at(98, 3, 2), 5.0f);
  EXPECT_FLOAT_EQ(last.at(98, 3, 6), std::atan2(4.0f, 3.0f));
  for (std::size_t f = 0; f < 4; ++f) {
    for (std::size_t c = 0; c < 8; ++c) EXPECT_EQ(last.at(99, f, c), 0.0f);
  }
  EXPECT_EQ(assemble_sequences(ComplexSpectrogram(100, 2, 4), 100).size(), 1u);
}

TEST(Sequences, PhaseRangeIsHalfOpen) {
  ComplexSpectrogram spec(1, 1, 4);
  spec.at(0, 0, 0) = {-1.0f, -0.0f};
  const auto x = assemble_sequences(spec, 1)[0];
  EXPECT_FLOAT_EQ(x.at(0, 0, 4), std::numbers::pi_v<float>);
}

TEST(FeatureFile, RoundTripBitExact) {
  Rng rng(4);
  SpectrogramTensor x;
  x.length = 7;
  x.bins = 5;
  x.channels = 8;
  x.valid_frames = 6;
  x.values.resize(7 * 5 * 8);
  for (auto& v : x.values) v = static_cast<float>(rng.gaussian());
  const auto path = scratch("seq.dfea");
  write_feature_file(path, x);
  EXPECT_EQ(read_feature_file(path), x);
}

TEST(FeatureFile, WrongMagicAndTruncationDetected) {
  SpectrogramTensor x;
  x.length = 2;
  x.bins = 2;
  x.channels = 8;
  x.valid_frames = 2;
  x.values.assign(32, 1.5f);
  const auto path = scratch("bad.dfea");
  write_feature_file(path, x);
  EXPECT_THROW(read_container(path, kSpsMagic), FormatError);
  fs::resize_file(path, fs::file_size(path) - 4);
  EXPECT_THROW(read_feature_file(path), FormatError);
  EXPECT_THROW(read_feature_file(scratch("absent.dfea")), MissingInputError);
}

TEST(FeatureIndex, RoundTrip) {
  const std::vector<FeatureIndexEntry> idx{{0, "seq_000.dfea", 100}, {1, "seq_001.dfea", 42}};
  const auto path = scratch("index.csv");
  write_feature_index(path, idx);
  const auto back = read_feature_index(path);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].file, "seq_001.dfea");
  EXPECT_EQ(back[1].valid_frames, 42u);
}

}  // namespace
}  // namespace doakit
