// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "cli/config.hpp"
#include "doakit/dataset.hpp"
#include "doakit/metrics.hpp"
#include "doakit/nn/trainer.hpp"

namespace doakit::cli {

/// Stage metadata format; bumped whenever an artifact layout changes.
inline constexpr int kArtifactVersion = 1;

/// Renders every recording of every split and writes the manifest.
void cmd_synthesize(const ExperimentConfig& config, std::ostream& log);

/// Features, MUSIC SPS targets and DOA targets for the pipeline splits.
void cmd_prepare(const ExperimentConfig& config, std::ostream& log);

/// MUSIC with known per-frame source counts on every test set.
std::vector<EvalReport> cmd_music_eval(const ExperimentConfig& config, std::ostream& log);

/// One network per training dataset tag and pipeline split.
void cmd_train(const ExperimentConfig& config, std::ostream& log);

/// Runs every trained network on its test sets; `mode` restricts which
/// estimate files are written (both when empty).
void cmd_infer(const ExperimentConfig& config, std::optional<nn::InferenceMode> mode, std::ostream& log);

/// SPS SNR against MUSIC, DOA error, frame recall and confusion matrices
/// for MUSIC and the network in both modes (or the selected one).
std::vector<EvalReport> cmd_eval(const ExperimentConfig& config, std::optional<nn::InferenceMode> mode,
                                 std::ostream& log);

struct RenderSpsOptions {
  std::filesystem::path sps_file;
  std::size_t first_frame = 0;
  std::optional<std::size_t> last_frame;  // inclusive; defaults to first_frame
  std::filesystem::path output_dir = "sps_images";
  std::optional<std::filesystem::path> truth_scene;
  std::size_t zoom = 8;
};

/// One PGM heatmap per frame plus a CSV of the plotted values.
void cmd_render_sps(const RenderSpsOptions& options, std::ostream& log);

/// Parses "a" or "a:b" (inclusive) into a frame range.
std::pair<std::size_t, std::optional<std::size_t>> parse_frame_range(const std::string& text);

/// Directories, metadata checks and loaders shared by the commands.
namespace layout {

std::filesystem::path manifest_path(const ExperimentConfig& c);
std::filesystem::path recording_work_dir(const ExperimentConfig& c, const std::string& name);
std::filesystem::path model_dir(const ExperimentConfig& c, const std::string& tag, int split);
std::filesystem::path inference_dir(const ExperimentConfig& c, const std::string& model, const std::string& name);

/// Writes <dir>/<stage>.meta and <dir>/resolved_config.ini.
void write_stage_metadata(const std::filesystem::path& dir, const std::string& stage,
                          const std::string& fingerprint, const ExperimentConfig& config);

/// Throws MissingInputError when the stage has not run and
/// std::invalid_argument when it ran with a different version or settings.
void verify_stage(const std::filesystem::path& dir, const std::string& stage, const std::string& fingerprint);

/// Every sequence of a prepared recording with its SPS (scaled to a
/// recording maximum of 1) and DOA targets.
std::vector<nn::TrainingSequence> training_sequences(const ExperimentConfig& config, const ManifestEntry& entry);

}  // namespace layout

}  // namespace doakit::cli
