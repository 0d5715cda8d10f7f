// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "doakit/ambisonics.hpp"
#include "doakit/rng.hpp"

namespace doakit {
namespace {

constexpr double kY00 = 0.28209479177387814;  // 1 / sqrt(4 pi)
constexpr double kY1 = 0.48860251190291992;   // sqrt(3 / (4 pi))

TEST(Encode, ReferenceDirections) {
  const auto front = encode_direction(Direction(0, 0));
  EXPECT_NEAR(front[0], kY00, 1e-12);
  EXPECT_NEAR(front[1], 0.0, 1e-12);
  EXPECT_NEAR(front[2], 0.0, 1e-12);
  EXPECT_NEAR(front[3], kY1, 1e-12);

  const auto up = encode_direction(Direction(0, 90));
  EXPECT_NEAR(up[1], 0.0, 1e-12);
  EXPECT_NEAR(up[2], kY1, 1e-12);
  EXPECT_NEAR(up[3], 0.0, 1e-12);

  const auto left = encode_direction(Direction(90, 0));
  EXPECT_NEAR(left[0], kY00, 1e-12);
  EXPECT_NEAR(left[1], kY1, 1e-12);
  EXPECT_NEAR(left[2], 0.0, 1e-12);
  EXPECT_NEAR(left[3], 0.0, 1e-12);
}

TEST(Encode, InnerProductIdentity) {
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    const Direction a(rng.uniform(-180, 180), rng.uniform(-90, 90));
    const Direction b(rng.uniform(-180, 180), rng.uniform(-90, 90));
    const auto ya = encode_direction(a), yb = encode_direction(b);
    double dot = 0;
    for (int k = 0; k < 4; ++k) dot += ya[k] * yb[k];
    const double cos_sigma = std::cos(angular_distance(a, b) * std::numbers::pi / 180.0);
    ASSERT_NEAR(dot, (1.0 + 3.0 * cos_sigma) / (4.0 * std::numbers::pi), 1e-9);
  }
}

TEST(Encode, GramMatrixMonteCarlo) {
  // Smaller sample count than the acceptance run; tolerance scales with it.
  Rng rng(17);
  const int n = 200000;
  double gram[4][4] = {};
  for (int i = 0; i < n; ++i) {
    const double z = rng.uniform(-1.0, 1.0), phi = rng.uniform(0.0, 2 * std::numbers::pi);
    const double r = std::sqrt(1 - z * z);
    const auto y = encode_unit_vector({r * std::cos(phi), r * std::sin(phi), z});
    for (int a = 0; a < 4; ++a) {
      for (int b = 0; b < 4; ++b) gram[a][b] += y[a] * y[b];
    }
  }
  for (int a = 0; a < 4; ++a) {
    for (int b = 0; b < 4; ++b) {
      EXPECT_NEAR(4 * std::numbers::pi * gram[a][b] / n, a == b ? 1.0 : 0.0, 1.2e-2);
    }
  }
}

TEST(DistanceGain, Examples) {
  EXPECT_DOUBLE_EQ(distance_gain(0.0), 1.0);
  EXPECT_NEAR(distance_gain(10.0, 10.0), std::sqrt(0.1), 1e-12);
  EXPECT_NEAR(distance_gain(5.0, 10.0), std::pow(10.0, -0.25), 1e-12);
  EXPECT_THROW(distance_gain(-1.0), std::invalid_argument);
  EXPECT_THROW(distance_gain(11.0, 10.0), std::invalid_argument);
}

TEST(Spatialize, ZeroAndImpulse) {
  const std::vector<float> zeros(64, 0.0f);
  const auto silent = spatialize(zeros, Direction(40, 10));
  for (std::size_t c = 0; c < 4; ++c) {
    for (float v : silent.channel(c)) EXPECT_EQ(v, 0.0f);
  }
  std::vector<float> impulse(8, 0.0f);
  impulse[0] = 1.0f;
  const auto b = spatialize(impulse, Direction(0, 0), 1.0);
  EXPECT_NEAR(b.channel(0)[0], kY00, 1e-7);
  EXPECT_NEAR(b.channel(1)[0], 0.0, 1e-7);
  EXPECT_NEAR(b.channel(2)[0], 0.0, 1e-7);
  EXPECT_NEAR(b.channel(3)[0], kY1, 1e-7);
  for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(b.channel(c)[3], 0.0f);
}

TEST(Spatialize, LinearInGain) {
  Rng rng(1);
  std::vector<float> s(100);
  for (auto& v : s) v = static_cast<float>(rng.uniform(-1, 1));
  const auto a = spatialize(s, Direction(-30, 20), 0.5);
  const auto b = spatialize(s, Direction(-30, 20), 1.0);
  for (std::size_t c = 0; c < 4; ++c) {
    for (std::size_t i = 0; i < s.size(); ++i) EXPECT_NEAR(2 * a.channel(c)[i], b.channel(c)[i], 1e-6);
  }
}

TEST(Buffer, MixTruncatesAtEnd) {
  AmbisonicBuffer a(10), b(4);
  for (std::size_t c = 0; c < 4; ++c) {
    for (auto& v : b.channel(c)) v = 1.0f;
  }
  a.mix(b, 8);
  EXPECT_EQ(a.channel(0)[7], 0.0f);
  EXPECT_EQ(a.channel(0)[8], 1.0f);
  EXPECT_EQ(a.channel(3)[9], 1.0f);
  EXPECT_EQ(a.frames(), 10u);
}

}  // namespace
}  // namespace doakit
