// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "doakit/scene.hpp"

namespace doakit {

/// Scene metadata CSV:
///   event_id,class,onset_s,duration_s,azimuth_deg,elevation_deg,distance_m
/// event_id is the corpus example id.
void write_scene_csv(const std::filesystem::path& path, const SceneSpec& spec);

/// Reads events back; onset and duration are converted to samples at `fs`.
std::vector<SoundEvent> read_scene_csv(const std::filesystem::path& path, int fs = kSampleRate);

/// One recording of a synthesized dataset.
struct ManifestEntry {
  std::string name;          // unique recording name, e.g. "O1A_s1_train_000"
  int split = 1;             // cross-validation split, 1-based
  std::string subset;        // "train" or "test"
  Context context = Context::kAnechoic;
  int max_overlap = 1;
  int room = 0;              // 0 for anechoic
  std::string audio;         // paths relative to the manifest directory
  std::string metadata;
};

/// Manifest CSV: name,split,subset,context,max_overlap,room,audio,metadata
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);

/// Dataset tag in the OxA / OxR convention, with the test room appended
/// for unmatched rooms (e.g. "O1R_room2").
std::string dataset_tag(Context context, int max_overlap, int room);

/// Splits a CSV line on commas (no quoting).
std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace doakit
