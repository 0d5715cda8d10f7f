// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "doakit/rng.hpp"

namespace doakit {

/// One isolated mono sound example.
struct CorpusExample {
  std::string id;
  std::string class_name;
  std::vector<float> samples;
  double duration_s(int sample_rate) const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

struct Corpus {
  int sample_rate = 44100;
  std::vector<CorpusExample> examples;

  /// Throws MissingInputError naming the id when absent.
  const CorpusExample& at(const std::string& id) const;
  std::vector<std::string> class_names() const;
};

struct SyntheticCorpusOptions {
  int classes = 11;
  int examples_per_class = 20;
  double min_duration_s = 0.2;
  double max_duration_s = 4.0;
  int sample_rate = 44100;
  std::uint64_t seed = 2018;
};

/// Built-in event generator: each class has a fixed family (band-limited
/// noise burst, harmonic tone complex or chirp) and spectral range; examples
/// within a class vary in duration, envelope and exact parameters.
Corpus generate_synthetic_corpus(const SyntheticCorpusOptions& options);

/// Loads every *.wav below `dir` (mono, or down-mixed to mono). The class is
/// the parent directory name for nested files, otherwise the file stem with
/// trailing digits and separators stripped.
Corpus load_wav_corpus(const std::filesystem::path& dir, int expected_sample_rate = 44100);

struct CorpusSplit {
  Corpus train;
  Corpus test;
};

/// Per class, draws disjoint random subsets of `train_per_class` and
/// `test_per_class` examples.
CorpusSplit split_corpus(const Corpus& corpus, int train_per_class, int test_per_class, Rng& rng);

}  // namespace doakit
