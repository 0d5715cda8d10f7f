// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>

#include "doakit/corpus.hpp"
#include "doakit/dataset.hpp"
#include "doakit/room.hpp"
#include "doakit/scene.hpp"
#include "schroeder.hpp"

namespace doakit {
namespace {

namespace fs = std::filesystem;

const Corpus& small_corpus() {
  static const Corpus c = [] {
    SyntheticCorpusOptions o;
    o.classes = 3;
    o.examples_per_class = 4;
    o.max_duration_s = 1.5;
    return generate_synthetic_corpus(o);
  }();
  return c;
}

/// Every scheduling invariant; returns the first violation or "".
std::string violations(const SceneSpec& s, const DirectionGrid& doa_grid) {
  const std::size_t guard = FrameLayout{}.window;
  for (std::size_t i = 0; i < s.events.size(); ++i) {
    const auto& a = s.events[i];
    if (a.end_sample() > s.length_samples) return "event beyond recording";
    if (!doa_grid.find(a.direction)) return "direction off the DOA grid";
    if (a.direction.elevation_deg() < -60 || a.direction.elevation_deg() > 60) return "elevation out of range";
    int concurrent = 1;
    for (std::size_t j = 0; j < s.events.size(); ++j) {
      if (i == j) continue;
      const auto& b = s.events[j];
      const bool overlap = a.onset_sample < b.end_sample() + guard && b.onset_sample < a.end_sample() + guard;
      if (overlap && angular_distance(a.direction, b.direction) < 10.0 - 1e-9) return "separation";
      if (b.onset_sample <= a.onset_sample && a.onset_sample < b.end_sample()) ++concurrent;
    }
    if (concurrent > s.max_overlap) return "overlap count";
  }
  return "";
}

TEST(Schedule, PropertySweepMaxOverlap3) {
  const auto grid = build_doa_grid();
  for (std::uint64_t seed = 0; seed < 10000; ++seed) {
    ScheduleOptions o;
    o.max_overlap = 3;
    Rng rng(seed);
    const auto s = schedule_events(small_corpus(), o, rng);
    ASSERT_EQ(violations(s, grid), "") << "seed " << seed;
  }
}

TEST(Schedule, SingleOverlapNeverConcurrent) {
  ScheduleOptions o;
  o.max_overlap = 1;
  Rng rng(7);
  const auto s = schedule_events(small_corpus(), o, rng);
  ASSERT_GT(s.events.size(), 3u);
  for (std::size_t i = 1; i < s.events.size(); ++i) {
    const double gap = static_cast<double>(s.events[i].onset_sample) - static_cast<double>(s.events[i - 1].end_sample());
    EXPECT_GE(gap, 0.25 * kSampleRate - 1);
    EXPECT_LE(gap, 0.5 * kSampleRate + 1);
  }
  EXPECT_LE(s.events.front().onset_sample, static_cast<std::size_t>(kSampleRate));
  const auto gt = compute_ground_truth(s);
  EXPECT_LE(gt.max_count(), 1u);
}

TEST(Schedule, DeterministicForSeed) {
  ScheduleOptions o;
  o.max_overlap = 2;
  Rng a(99), b(99);
  const auto sa = schedule_events(small_corpus(), o, a);
  const auto sb = schedule_events(small_corpus(), o, b);
  ASSERT_EQ(sa.events.size(), sb.events.size());
  for (std::size_t i = 0; i < sa.events.size(); ++i) {
    EXPECT_EQ(sa.events[i].example_id, sb.events[i].example_id);
    EXPECT_EQ(sa.events[i].onset_sample, sb.events[i].onset_sample);
    EXPECT_EQ(sa.events[i].direction, sb.events[i].direction);
    EXPECT_EQ(sa.events[i].distance_m, sb.events[i].distance_m);
  }
}

TEST(Schedule, BadArguments) {
  ScheduleOptions o;
  Rng rng(1);
  o.max_overlap = 4;
  EXPECT_THROW(schedule_events(small_corpus(), o, rng), std::invalid_argument);
  o.max_overlap = 1;
  EXPECT_THROW(schedule_events(Corpus{}, o, rng), std::invalid_argument);
  o.context = Context::kReverberant;
  EXPECT_THROW(schedule_events(small_corpus(), o, rng), std::invalid_argument);
}

TEST(Render, EmptySceneIsSilent) {
  SceneSpec s;
  s.length_samples = 5000;
  const auto r = render_anechoic(s, small_corpus());
  for (std::size_t c = 0; c < 4; ++c) {
    for (float v : r.audio.channel(c)) ASSERT_EQ(v, 0.0f);
  }
  for (const auto& f : r.truth.frames) EXPECT_TRUE(f.empty());
}

SoundEvent make_event(const CorpusExample& ex, std::size_t onset, Direction d, double dist) {
  SoundEvent e;
  e.example_id = ex.id;
  e.class_name = ex.class_name;
  e.onset_sample = onset;
  e.length_samples = ex.samples.size();
  e.direction = d;
  e.distance_m = dist;
  return e;
}

TEST(Render, SingleEventEqualsDelayedSpatialize) {
  const auto& ex = small_corpus().examples[0];
  SceneSpec s;
  s.length_samples = ex.samples.size() + 3000;
  s.events.push_back(make_event(ex, 1234, Direction(40, -20), 4.0));
  const auto r = render_anechoic(s, small_corpus());
  const auto ref = spatialize(ex.samples, Direction(40, -20), distance_gain(4.0));
  for (std::size_t c = 0; c < 4; ++c) {
    for (std::size_t i = 0; i < ex.samples.size(); ++i) ASSERT_EQ(r.audio.channel(c)[i + 1234], ref.channel(c)[i]);
    EXPECT_EQ(r.audio.channel(c)[1233], 0.0f);
  }
}

TEST(Render, DisjointEventsAreLinear) {
  const auto& c = small_corpus();
  SceneSpec a, b, ab;
  a.length_samples = b.length_samples = ab.length_samples = 5 * kSampleRate;
  a.events.push_back(make_event(c.examples[1], 100, Direction(0, 0), 2.0));
  b.events.push_back(make_event(c.examples[2], 2 * kSampleRate + 50, Direction(-90, 30), 6.0));
  ab.events = {a.events[0], b.events[0]};
  const auto ra = render_anechoic(a, c), rb = render_anechoic(b, c), rab = render_anechoic(ab, c);
  for (std::size_t ch = 0; ch < 4; ++ch) {
    for (std::size_t i = 0; i < ab.length_samples; ++i) {
      ASSERT_FLOAT_EQ(rab.audio.channel(ch)[i], ra.audio.channel(ch)[i] + rb.audio.channel(ch)[i]);
    }
  }
}

TEST(Render, GroundTruthUsesFrameSupport) {
  const auto& ex = small_corpus().examples[0];
  SceneSpec s;
  s.length_samples = 3 * kSampleRate;
  s.events.push_back(make_event(ex, 10000, Direction(10, 10), 1.0));
  const auto gt = compute_ground_truth(s);
  const FrameLayout fl;
  for (std::size_t t = 0; t < gt.frames.size(); ++t) {
    const bool active = fl.frame_begin(t) < s.events[0].end_sample() && fl.frame_end(t) > 10000;
    ASSERT_EQ(gt.frames[t].size(), active ? 1u : 0u) << t;
  }
  const auto targets = gt.doa_targets(build_doa_grid());
  EXPECT_EQ(targets.size(), gt.frames.size() * 432);
}

TEST(ImageSources, DirectPathAndFirstOrder) {
  RoomSpec room = make_room(1);
  const Vec3 src{6.0, 4.0, 2.0};
  const auto images = compute_image_sources(room, src, 1.0);
  ASSERT_FALSE(images.empty());
  EXPECT_EQ(images[0].reflection_order, 0);
  EXPECT_NEAR(images[0].delay_s, 1.0 / 343.0, 1e-12);
  EXPECT_NEAR(images[0].gain, 1.0, 1e-12);
  std::size_t first_order = 0;
  bool found_x_wall = false;
  for (const auto& img : images) {
    if (img.reflection_order == 1) {
      ++first_order;
      if (std::abs(img.position[0] - 14.0) < 1e-12 && std::abs(img.position[1] - 4.0) < 1e-12) {
        found_x_wall = true;
        EXPECT_NEAR(img.delay_s, 9.0 / 343.0, 1e-12);
        EXPECT_NEAR(img.gain, room.reflection / 9.0, 1e-12);
      }
    }
    EXPECT_LE(img.gain, 1.0 + 1e-12);
    EXPECT_LE(img.delay_s, 1.0 + 1e-12);
  }
  EXPECT_EQ(first_order, 6u);
  EXPECT_TRUE(found_x_wall);

  const auto direct_only = compute_image_sources(room, src, 2.0 / 343.0);
  ASSERT_EQ(direct_only.size(), 1u);
}

TEST(ImageSources, SourceOutsideRejected) {
  EXPECT_THROW(compute_image_sources(make_room(1), {11.0, 1.0, 1.0}, 0.1), std::invalid_argument);
  EXPECT_THROW(make_room(4), std::invalid_argument);
}

TEST(Reverberant, ZeroReflectionIsFreeField) {
  const auto& ex = small_corpus().examples[3];
  RoomSpec room = make_room(1);
  room.reflection = 0.0;
  SceneSpec s;
  s.context = Context::kReverberant;
  s.room = room;
  s.length_samples = ex.samples.size() + kSampleRate;
  SoundEvent e = make_event(ex, 500, Direction(0, 0), 3.0);
  e.source_position = {8.0, 4.0, 2.0};
  s.events.push_back(e);
  const auto r = render_reverberant(s, small_corpus());
  const std::size_t delay = static_cast<std::size_t>(std::llround(3.0 / 343.0 * kSampleRate));
  const auto ref = spatialize(ex.samples, Direction(0, 0), 1.0 / 3.0);
  for (std::size_t c = 0; c < 4; ++c) {
    for (std::size_t i = 0; i < ex.samples.size(); i += 7) {
      ASSERT_NEAR(r.audio.channel(c)[500 + delay + i], ref.channel(c)[i], 1e-5);
    }
  }
}

TEST(Reverberant, EnergyDecaysAfterDirectSound) {
  RoomSpec room = make_room(1);
  Rng rng(21);
  const std::size_t win = kSampleRate / 20;
  std::vector<double> energy;
  for (int k = 0; k < 10; ++k) {
    const Vec3 src{rng.uniform(1, 9), rng.uniform(1, 7), rng.uniform(0.5, 3.5)};
    const auto ir = spatial_impulse_response(room, src);
    const auto w = ir.channel(0);
    const std::size_t blocks = w.size() / win;
    if (energy.empty()) energy.assign(blocks, 0.0);
    for (std::size_t b = 0; b < blocks && b < energy.size(); ++b) {
      for (std::size_t i = b * win; i < (b + 1) * win; ++i) energy[b] += static_cast<double>(w[i]) * w[i];
    }
  }
  // The first block holds the direct sound; decay is monotone afterwards.
  for (std::size_t b = 2; b < energy.size(); ++b) EXPECT_LE(energy[b], energy[b - 1]) << b;
}

TEST(Reverberant, SchroederT60NearTargetForAllRooms) {
  for (int preset = 1; preset <= 3; ++preset) {
    const RoomSpec room = make_room(preset);
    const Vec3 src{2.0, 2.5, 1.5};
    const auto ir = spatial_impulse_response(room, src);
    const auto fit = testing::schroeder_t60(ir.channel(0), kSampleRate);
    EXPECT_NEAR(fit.t60_s, room.target_t60, 0.2 * room.target_t60) << "room " << preset;
    EXPECT_GT(fit.r2, 0.99);
  }
}

TEST(Schroeder, ExponentialDecayOracle) {
  // Exactly exponential energy decay with a known T60.
  const double t60 = 0.37;
  std::vector<float> h(kSampleRate);
  for (std::size_t i = 0; i < h.size(); ++i) {
    h[i] = static_cast<float>(std::pow(10.0, -3.0 * static_cast<double>(i) / (t60 * kSampleRate)));
  }
  EXPECT_NEAR(testing::schroeder_t60(h, kSampleRate).t60_s, t60, 1e-3);
}

TEST(SceneCsv, RoundTrip) {
  ScheduleOptions o;
  o.max_overlap = 2;
  o.context = Context::kReverberant;
  o.room = make_room(2);
  Rng rng(5);
  const auto s = schedule_events(small_corpus(), o, rng);
  const auto path = fs::temp_directory_path() / "doakit_scene_roundtrip.csv";
  write_scene_csv(path, s);
  const auto back = read_scene_csv(path);
  ASSERT_EQ(back.size(), s.events.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].example_id, s.events[i].example_id);
    EXPECT_EQ(back[i].onset_sample, s.events[i].onset_sample);
    EXPECT_EQ(back[i].length_samples, s.events[i].length_samples);
    EXPECT_EQ(back[i].direction, s.events[i].direction);
  }
}

TEST(Manifest, RoundTripAndTags) {
  ManifestEntry e;
  e.name = "O2R_room3_s1_test_000";
  e.split = 1;
  e.subset = "test";
  e.context = Context::kReverberant;
  e.max_overlap = 2;
  e.room = 3;
  e.audio = "a.wav";
  e.metadata = "a.csv";
  const auto path = fs::temp_directory_path() / "doakit_manifest.csv";
  write_manifest(path, {e});
  const auto back = read_manifest(path);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].name, e.name);
  EXPECT_EQ(back[0].room, 3);
  EXPECT_EQ(back[0].context, Context::kReverberant);
  EXPECT_EQ(dataset_tag(Context::kAnechoic, 1, 0), "O1A");
  EXPECT_EQ(dataset_tag(Context::kReverberant, 3, 1), "O3R");
  EXPECT_EQ(dataset_tag(Context::kReverberant, 2, 3), "O2R_room3");
}

TEST(Corpus, SplitIsDisjointPerClass) {
  SyntheticCorpusOptions o;
  o.classes = 4;
  o.examples_per_class = 5;
  const auto c = generate_synthetic_corpus(o);
  EXPECT_EQ(c.examples.size(), 20u);
  for (const auto& ex : c.examples) {
    EXPECT_GE(ex.duration_s(c.sample_rate), 0.2 - 1e-9);
    EXPECT_LE(ex.duration_s(c.sample_rate), 4.0 + 1e-9);
  }
  Rng rng(2);
  const auto split = split_corpus(c, 3, 2, rng);
  EXPECT_EQ(split.train.examples.size(), 12u);
  EXPECT_EQ(split.test.examples.size(), 8u);
  for (const auto& a : split.train.examples) {
    for (const auto& b : split.test.examples) EXPECT_NE(a.id, b.id);
  }
}

}  // namespace
}  // namespace doakit
