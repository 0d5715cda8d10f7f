// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "doakit/ambisonics.hpp"
#include "doakit/corpus.hpp"
#include "doakit/framing.hpp"
#include "doakit/geometry.hpp"
#include "doakit/rng.hpp"
#include "doakit/room.hpp"

namespace doakit {

enum class Context { kAnechoic, kReverberant };

std::string to_string(Context c);
Context parse_context(const std::string& s);

struct SoundEvent {
  std::string example_id;
  std::string class_name;
  std::size_t onset_sample = 0;
  std::size_t length_samples = 0;
  Direction direction;
  double distance_m = 1.0;
  /// Reverberant scenes only: the source lies on the grid ray through
  /// `direction` at `distance_m` from the microphone.
  Vec3 source_position{0.0, 0.0, 0.0};

  std::size_t end_sample() const { return onset_sample + length_samples; }
  double onset_s(int fs) const { return static_cast<double>(onset_sample) / fs; }
  double duration_s(int fs) const { return static_cast<double>(length_samples) / fs; }
};

struct SceneSpec {
  Context context = Context::kAnechoic;
  int max_overlap = 1;
  std::size_t length_samples = 30 * kSampleRate;
  int sample_rate = kSampleRate;
  std::vector<SoundEvent> events;
  std::optional<RoomSpec> room;
  std::uint64_t seed = 0;
};

struct ScheduleOptions {
  Context context = Context::kAnechoic;
  int max_overlap = 1;
  double length_s = 30.0;
  double first_onset_max_s = 1.0;
  double min_gap_s = 0.25;
  double max_gap_s = 0.5;
  double min_separation_deg = 10.0;
  double min_distance_m = 1.0;
  double max_distance_m = 10.0;
  /// Reverberant placement: clearance to every wall, minimum distance to
  /// the microphone.
  double wall_clearance_m = 0.5;
  double min_source_distance_m = 0.5;
  std::optional<RoomSpec> room;
  /// Candidate directions; defaults to the 432-point DOA grid.
  std::optional<DirectionGrid> grid;
  FrameLayout frames;
};

/// Layered random scheduling. Each layer starts uniformly within the first
/// `first_onset_max_s` and places events back to back with uniform gaps until
/// the next example no longer fits; `max_overlap` layers are drawn.
/// Events whose supports come within one analysis window of each other
/// count as overlapping for the separation constraint, so no feature frame
/// sees two sources closer than `min_separation_deg`.
SceneSpec schedule_events(const Corpus& corpus, const ScheduleOptions& options, Rng& rng);

/// Per-frame active source directions (direct path only).
struct GroundTruth {
  std::vector<std::vector<Direction>> frames;

  std::size_t max_count() const;
  /// frames x grid.size() 0/1 matrix, row-major.
  std::vector<float> doa_targets(const DirectionGrid& grid) const;
};

/// An event is active in frame t when its support intersects the window.
GroundTruth compute_ground_truth(const SceneSpec& spec, const FrameLayout& layout = {});

struct RenderedScene {
  AmbisonicBuffer audio;
  GroundTruth truth;
};

RenderedScene render_anechoic(const SceneSpec& spec, const Corpus& corpus,
                              const FrameLayout& layout = {});
RenderedScene render_reverberant(const SceneSpec& spec, const Corpus& corpus,
                                 const FrameLayout& layout = {});
/// Dispatches on spec.context.
RenderedScene render_scene(const SceneSpec& spec, const Corpus& corpus,
                           const FrameLayout& layout = {});

}  // namespace doakit
