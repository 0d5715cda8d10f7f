// SPDX-License-Identifier: Apache-2.0
#include "doakit/scene.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <stdexcept>

#include "doakit/dsp.hpp"

namespace doakit {
namespace {

constexpr int kMaxDirectionDraws = 10000;

bool inside_with_clearance(const Vec3& p, const RoomSpec& room, double clearance) {
  for (int k = 0; k < 3; ++k) {
    if (p[k] < clearance || p[k] > room.dimensions[k] - clearance) return false;
  }
  return true;
}

// Uniform point in the clearance box, moved onto the ray `u` at the same
// distance from the microphone; rejected until the moved point is valid.
std::pair<double, Vec3> place_on_ray(const Vec3& u, const RoomSpec& room,
                                     const ScheduleOptions& opt, Rng& rng) {
  const double c = opt.wall_clearance_m;
  const auto& mic = room.microphone;
  for (int attempt = 0; attempt < 100000; ++attempt) {
    Vec3 p;
    for (int k = 0; k < 3; ++k) p[k] = rng.uniform(c, room.dimensions[k] - c);
    const double d = std::hypot(p[0] - mic[0], p[1] - mic[1], p[2] - mic[2]);
    if (d < opt.min_source_distance_m) continue;
    const Vec3 q{mic[0] + d * u[0], mic[1] + d * u[1], mic[2] + d * u[2]};
    if (inside_with_clearance(q, room, c)) return {d, q};
  }
  throw std::runtime_error("could not place a source inside the room along the drawn direction");
}

}  // namespace

std::string to_string(Context c) { return c == Context::kAnechoic ? "anechoic" : "reverberant"; }

Context parse_context(const std::string& s) {
  if (s == "anechoic" || s == "A") return Context::kAnechoic;
  if (s == "reverberant" || s == "R") return Context::kReverberant;
  throw std::invalid_argument("unknown context: " + s);
}

SceneSpec schedule_events(const Corpus& corpus, const ScheduleOptions& opt, Rng& rng) {
  if (corpus.examples.empty()) throw std::invalid_argument("corpus is empty");
  if (opt.max_overlap < 1 || opt.max_overlap > 3) {
    throw std::invalid_argument("max_overlap must be 1, 2 or 3");
  }
  if (!(opt.length_s > 0.0) || !(opt.min_gap_s >= 0.0) || opt.max_gap_s < opt.min_gap_s) {
    throw std::invalid_argument("invalid schedule timing");
  }
  if (opt.context == Context::kReverberant && !opt.room) {
    throw std::invalid_argument("reverberant scenes need a room");
  }
  const DirectionGrid grid = opt.grid ? *opt.grid : build_doa_grid();
  const int fs = corpus.sample_rate;

  SceneSpec spec;
  spec.context = opt.context;
  spec.max_overlap = opt.max_overlap;
  spec.sample_rate = fs;
  spec.length_samples = static_cast<std::size_t>(std::llround(opt.length_s * fs));
  if (opt.context == Context::kReverberant) spec.room = opt.room;

  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < corpus.examples.size(); ++i) {
    if (corpus.examples[i].samples.size() <= spec.length_samples &&
        !corpus.examples[i].samples.empty()) {
      usable.push_back(i);
    } else {
      std::cerr << "warning: skipping corpus example " << corpus.examples[i].id
                << " (longer than the recording)\n";
    }
  }
  if (usable.empty()) throw std::invalid_argument("no corpus example fits the recording length");

  const std::size_t guard = opt.frames.window;
  for (int layer = 0; layer < opt.max_overlap; ++layer) {
    auto t = static_cast<std::size_t>(std::llround(rng.uniform(0.0, opt.first_onset_max_s) * fs));
    while (true) {
      const CorpusExample& ex = corpus.examples[usable[rng.below(usable.size())]];
      const std::size_t len = ex.samples.size();
      if (t + len > spec.length_samples) break;

      SoundEvent ev;
      ev.example_id = ex.id;
      ev.class_name = ex.class_name;
      ev.onset_sample = t;
      ev.length_samples = len;

      bool placed = false;
      for (int draw = 0; draw < kMaxDirectionDraws && !placed; ++draw) {
        const Direction d = grid[rng.below(grid.size())];
        placed = true;
        for (const auto& other : spec.events) {
          const bool overlaps = other.onset_sample < ev.end_sample() + guard &&
                                ev.onset_sample < other.end_sample() + guard;
          if (overlaps && angular_distance(d, other.direction) < opt.min_separation_deg - 1e-9) {
            placed = false;
            break;
          }
        }
        if (placed) ev.direction = d;
      }
      if (!placed) throw std::runtime_error("could not satisfy the separation constraint");

      if (opt.context == Context::kAnechoic) {
        ev.distance_m = rng.uniform(opt.min_distance_m, opt.max_distance_m);
      } else {
        auto [dist, pos] = place_on_ray(ev.direction.unit_vector(), *opt.room, opt, rng);
        ev.distance_m = dist;
        ev.source_position = pos;
      }
      spec.events.push_back(ev);
      t += len + static_cast<std::size_t>(std::llround(rng.uniform(opt.min_gap_s, opt.max_gap_s) * fs));
    }
  }
  std::stable_sort(spec.events.begin(), spec.events.end(),
                   [](const SoundEvent& a, const SoundEvent& b) { return a.onset_sample < b.onset_sample; });
  return spec;
}

std::size_t GroundTruth::max_count() const {
  std::size_t m = 0;
  for (const auto& f : frames) m = std::max(m, f.size());
  return m;
}

std::vector<float> GroundTruth::doa_targets(const DirectionGrid& grid) const {
  std::vector<float> out(frames.size() * grid.size(), 0.0f);
  for (std::size_t t = 0; t < frames.size(); ++t) {
    for (const auto& d : frames[t]) {
      const auto idx = grid.find(d);
      if (!idx) throw std::invalid_argument("ground-truth direction is not on the DOA grid");
      out[t * grid.size() + *idx] = 1.0f;
    }
  }
  return out;
}

GroundTruth compute_ground_truth(const SceneSpec& spec, const FrameLayout& layout) {
  GroundTruth gt;
  gt.frames.resize(layout.frame_count(spec.length_samples));
  for (const auto& ev : spec.events) {
    if (ev.length_samples == 0) continue;
    // frames t with t*hop < end and t*hop + window > onset
    const std::size_t first =
        ev.onset_sample + 1 > layout.window ? (ev.onset_sample + 1 - layout.window + layout.hop - 1) / layout.hop : 0;
    for (std::size_t t = first; t < gt.frames.size(); ++t) {
      if (layout.frame_begin(t) >= ev.end_sample()) break;
      if (layout.frame_end(t) > ev.onset_sample) gt.frames[t].push_back(ev.direction);
    }
  }
  return gt;
}

RenderedScene render_anechoic(const SceneSpec& spec, const Corpus& corpus, const FrameLayout& layout) {
  if (spec.context != Context::kAnechoic) throw std::invalid_argument("spec is not anechoic");
  RenderedScene out{AmbisonicBuffer(spec.length_samples, spec.sample_rate), compute_ground_truth(spec, layout)};
  for (const auto& ev : spec.events) {
    const CorpusExample& ex = corpus.at(ev.example_id);
    const std::size_t n = std::min(ev.length_samples, ex.samples.size());
    const double g = distance_gain(ev.distance_m);
    out.audio.mix(spatialize(std::span(ex.samples).first(n), ev.direction, g), ev.onset_sample);
  }
  return out;
}

RenderedScene render_reverberant(const SceneSpec& spec, const Corpus& corpus,
                                 const FrameLayout& layout) {
  if (spec.context != Context::kReverberant || !spec.room) {
    throw std::invalid_argument("spec is not reverberant");
  }
  RenderedScene out{AmbisonicBuffer(spec.length_samples, spec.sample_rate), compute_ground_truth(spec, layout)};
  for (const auto& ev : spec.events) {
    const CorpusExample& ex = corpus.at(ev.example_id);
    const std::size_t n = std::min(ev.length_samples, ex.samples.size());
    const AmbisonicBuffer ir = spatial_impulse_response(*spec.room, ev.source_position, spec.sample_rate);
    std::vector<std::vector<double>> kernels(kFoaChannels);
    for (std::size_t c = 0; c < kFoaChannels; ++c) {
      auto ch = ir.channel(c);
      kernels[c].assign(ch.begin(), ch.end());
    }
    std::vector<double> sig(ex.samples.begin(), ex.samples.begin() + static_cast<std::ptrdiff_t>(n));
    const auto wet = fft_convolve_many(sig, kernels);
    AmbisonicBuffer part(wet.front().size(), spec.sample_rate);
    for (std::size_t c = 0; c < kFoaChannels; ++c) {
      auto dst = part.channel(c);
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<float>(wet[c][i]);
    }
    out.audio.mix(part, ev.onset_sample);
  }
  return out;
}

RenderedScene render_scene(const SceneSpec& spec, const Corpus& corpus, const FrameLayout& layout) {
  return spec.context == Context::kAnechoic ? render_anechoic(spec, corpus, layout)
                                            : render_reverberant(spec, corpus, layout);
}

}  // namespace doakit
