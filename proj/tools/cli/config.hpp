// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "doakit/nn/doanet.hpp"
#include "doakit/nn/trainer.hpp"
#include "doakit/scene.hpp"
#include "doakit/subspace.hpp"

namespace doakit::cli {

enum class Scale { kDesk, kPaper };

struct DatasetConfig {
  /// "synthetic" or a directory of mono WAV files.
  std::string corpus = "synthetic";
  int corpus_classes = 11;
  int corpus_examples_per_class = 20;
  int corpus_train_per_class = 16;
  int corpus_test_per_class = 4;
  int splits = 3;
  int train_recordings = 24;
  int test_recordings = 6;
  std::vector<Context> contexts{Context::kAnechoic, Context::kReverberant};
  std::vector<int> overlaps{1, 2, 3};
  /// Test rooms for the reverberant context; training always uses room 1.
  std::vector<int> rooms{1, 2, 3};
  double length_s = 30.0;
  std::uint64_t seed = 2018;
};

struct PipelineConfig {
  /// Cross-validation splits processed by prepare, music-eval, train,
  /// infer and eval.
  std::vector<int> splits{1};
};

struct TrainingBlock {
  nn::TrainConfig train;
  /// Dataset tags to train on (e.g. O1A); empty means every training set.
  std::vector<std::string> datasets;
  /// Fraction of training recordings held out for early stopping.
  double validation_fraction = 0.1;
};

struct PathsConfig {
  std::filesystem::path data = "data";
  std::filesystem::path work = "work";
  std::filesystem::path output = "results";
};

struct ExperimentConfig {
  Scale scale = Scale::kDesk;
  DatasetConfig dataset;
  PipelineConfig pipeline;
  std::size_t sequence_length = 100;
  MusicOptions music;
  nn::NetworkConfig network;
  TrainingBlock training;
  PathsConfig paths;
  std::size_t workers = 1;

  /// Every block against its module's constraints; throws
  /// std::invalid_argument naming the offending key.
  void validate() const;

  /// The complete resolved configuration as an INI document.
  std::string to_ini() const;
  /// Resolved text of the blocks a given stage depends on; used to detect
  /// artifacts produced under different settings.
  std::string dataset_fingerprint() const;
  std::string prepare_fingerprint() const;
  std::string model_fingerprint() const;
};
/// Defaults for a scale: desk uses 24/6 recordings per dataset, 50 epochs
/// and patience 10; paper uses 240/60 recordings, 1000 epochs and patience
/// 100.
ExperimentConfig default_config(Scale scale);

/// Command-line overrides applied on top of the file.
struct Overrides {
  std::optional<Scale> scale;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
};

/// Reads an INI file (sections dataset, pipeline, features, music, network,
/// training, paths). Keys absent from the file take the defaults of the
/// selected scale; unknown sections or keys are rejected. Relative paths
/// are resolved against the config file's directory.
ExperimentConfig load_config(const std::optional<std::filesystem::path>& path, const Overrides& overrides);

/// Parses INI text as load_config does, without a file.
ExperimentConfig parse_config(const std::string& text, const Overrides& overrides,
                              const std::filesystem::path& base_dir = ".");

Scale parse_scale(const std::string& s);
std::string to_string(Scale s);

}  // namespace doakit::cli
