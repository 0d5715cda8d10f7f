// SPDX-License-Identifier: Apache-2.0
#include "doakit/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <complex>
#include <map>
#include <numbers>
#include <stdexcept>

#include "doakit/audio_io.hpp"
#include "doakit/dsp.hpp"
#include "doakit/errors.hpp"

namespace doakit {
namespace {

enum class Family { kNoise, kTones, kChirp };

struct ClassProfile {
  std::string name;
  Family family;
  double f_lo;
  double f_hi;
  double attack_s;
  double decay_rate;  // exponential decay per second; 0 = sustained
};

// Eleven classes spanning impulsive, tonal and sweeping events.
const std::vector<ClassProfile>& profiles() {
  static const std::vector<ClassProfile> p = {
      {"knock", Family::kNoise, 200, 3000, 0.002, 12.0},
      {"door_slam", Family::kNoise, 80, 2000, 0.001, 6.0},
      {"page_turn", Family::kNoise, 1500, 12000, 0.05, 0.0},
      {"keyboard", Family::kNoise, 2000, 9000, 0.001, 30.0},
      {"cough", Family::kNoise, 300, 5000, 0.01, 4.0},
      {"speech_like", Family::kTones, 110, 3500, 0.03, 0.0},
      {"phone_ring", Family::kTones, 900, 4000, 0.005, 0.0},
      {"whistle", Family::kTones, 1200, 3000, 0.05, 0.0},
      {"drawer", Family::kChirp, 300, 2500, 0.02, 0.0},
      {"laughter", Family::kTones, 200, 4500, 0.02, 1.5},
      {"clear_throat", Family::kChirp, 150, 1500, 0.01, 2.0},
  };
  return p;
}

std::vector<float> band_noise(std::size_t n, double f_lo, double f_hi, int fs, Rng& rng) {
  const std::size_t nfft = next_pow2(n);
  std::vector<double> x(nfft);
  for (auto& v : x) v = rng.gaussian();
  RealFft fft(nfft);
  std::vector<std::complex<double>> spec(nfft / 2 + 1);
  fft.forward(x, spec);
  for (std::size_t k = 0; k < spec.size(); ++k) {
    const double f = static_cast<double>(k) * fs / static_cast<double>(nfft);
    if (f < f_lo || f > f_hi) spec[k] = 0.0;
  }
  fft.inverse(spec, x);
  double rms = 0.0;
  for (std::size_t i = 0; i < n; ++i) rms += x[i] * x[i];
  rms = std::sqrt(rms / static_cast<double>(n));
  std::vector<float> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<float>(rms > 0 ? x[i] / rms : 0.0);
  return out;
}

std::vector<float> tone_complex(std::size_t n, double f_lo, double f_hi, int fs, Rng& rng) {
  const double f0 = rng.uniform(f_lo, std::min(f_hi, f_lo * 2.0));
  const int harmonics = std::max(1, static_cast<int>(std::floor(f_hi / f0)));
  const double vibrato_rate = rng.uniform(3.0, 7.0);
  const double vibrato_depth = rng.uniform(0.0, 0.03);
  std::vector<double> phases(harmonics);
  for (auto& p : phases) p = rng.uniform(0.0, 2.0 * std::numbers::pi);
  std::vector<float> out(n);
  double phase = 0.0;
  double norm = 0.0;
  for (int h = 1; h <= harmonics; ++h) norm += 1.0 / (h * h);
  norm = 1.0 / std::sqrt(norm / 2.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / fs;
    const double f = f0 * (1.0 + vibrato_depth * std::sin(2.0 * std::numbers::pi * vibrato_rate * t));
    phase += 2.0 * std::numbers::pi * f / fs;
    double s = 0.0;
    for (int h = 1; h <= harmonics; ++h) s += std::sin(h * phase + phases[h - 1]) / h;
    out[i] = static_cast<float>(s * norm);
  }
  return out;
}

std::vector<float> chirp(std::size_t n, double f_lo, double f_hi, int fs, Rng& rng) {
  const bool up = rng.uniform() < 0.5;
  const double fa = up ? f_lo : f_hi;
  const double fb = up ? f_hi : f_lo;
  const double dur = static_cast<double>(n) / fs;
  std::vector<float> out(n);
  const double ratio = fb / fa;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / fs;
    // exponential sweep phase
    const double k = std::log(ratio) / dur;
    const double ph = 2.0 * std::numbers::pi * fa * (std::exp(k * t) - 1.0) / k;
    out[i] = static_cast<float>(std::sqrt(2.0) * std::sin(ph));
  }
  return out;
}

std::string class_from_stem(std::string stem) {
  while (!stem.empty() && (std::isdigit(static_cast<unsigned char>(stem.back())) ||
                           stem.back() == '_' || stem.back() == '-')) {
    stem.pop_back();
  }
  return stem.empty() ? "unknown" : stem;
}

}  // namespace

const CorpusExample& Corpus::at(const std::string& id) const {
  for (const auto& e : examples) {
    if (e.id == id) return e;
  }
  throw MissingInputError("corpus example not found: " + id);
}

std::vector<std::string> Corpus::class_names() const {
  std::vector<std::string> names;
  for (const auto& e : examples) {
    if (std::find(names.begin(), names.end(), e.class_name) == names.end()) {
      names.push_back(e.class_name);
    }
  }
  return names;
}

Corpus generate_synthetic_corpus(const SyntheticCorpusOptions& options) {
  if (options.classes < 1 || options.classes > static_cast<int>(profiles().size())) {
    throw std::invalid_argument("synthetic corpus supports 1.." +
                                std::to_string(profiles().size()) + " classes");
  }
  if (options.examples_per_class < 1 || !(options.min_duration_s > 0.0) ||
      options.max_duration_s < options.min_duration_s) {
    throw std::invalid_argument("invalid synthetic corpus options");
  }
  Corpus corpus;
  corpus.sample_rate = options.sample_rate;
  Rng rng(options.seed);
  const int fs = options.sample_rate;
  for (int c = 0; c < options.classes; ++c) {
    const ClassProfile& p = profiles()[c];
    for (int k = 0; k < options.examples_per_class; ++k) {
      const double dur = rng.uniform(options.min_duration_s, options.max_duration_s);
      const std::size_t n = static_cast<std::size_t>(std::llround(dur * fs));
      std::vector<float> s;
      switch (p.family) {
        case Family::kNoise: s = band_noise(n, p.f_lo, p.f_hi, fs, rng); break;
        case Family::kTones: s = tone_complex(n, p.f_lo, p.f_hi, fs, rng); break;
        case Family::kChirp: s = chirp(n, p.f_lo, p.f_hi, fs, rng); break;
      }
      const double level = rng.uniform(0.1, 0.5);
      const double attack = std::min(p.attack_s, dur / 4);
      const double release = std::min(0.01, dur / 4);
      for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / fs;
        double env = level;
        if (t < attack) env *= t / attack;
        if (dur - t < release) env *= (dur - t) / release;
        if (p.decay_rate > 0) env *= std::exp(-p.decay_rate * std::max(0.0, t - attack));
        s[i] = static_cast<float>(s[i] * env);
      }
      char id[64];
      std::snprintf(id, sizeof(id), "%s_%02d", p.name.c_str(), k);
      corpus.examples.push_back({id, p.name, std::move(s)});
    }
  }
  return corpus;
}

Corpus load_wav_corpus(const std::filesystem::path& dir, int expected_sample_rate) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw MissingInputError("corpus directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
    if (ext == ".wav") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw MissingInputError("no WAV files in corpus directory: " + dir.string());

  Corpus corpus;
  corpus.sample_rate = expected_sample_rate;
  for (const auto& f : files) {
    WavData w = read_wav(f);
    if (w.sample_rate != expected_sample_rate) {
      throw FormatError("corpus file has sample rate " + std::to_string(w.sample_rate) +
                        ", expected " + std::to_string(expected_sample_rate) + ": " + f.string());
    }
    std::vector<float> mono(w.channels.front().size(), 0.0f);
    for (const auto& ch : w.channels) {
      for (std::size_t i = 0; i < mono.size(); ++i) mono[i] += ch[i] / w.channels.size();
    }
    const bool nested = f.parent_path() != dir;
    std::string cls = nested ? f.parent_path().filename().string() : class_from_stem(f.stem().string());
    std::string id = fs::relative(f, dir).replace_extension().generic_string();
    corpus.examples.push_back({id, cls, std::move(mono)});
  }
  return corpus;
}

CorpusSplit split_corpus(const Corpus& corpus, int train_per_class, int test_per_class, Rng& rng) {
  if (train_per_class < 0 || test_per_class < 0) throw std::invalid_argument("negative split size");
  std::map<std::string, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < corpus.examples.size(); ++i) {
    by_class[corpus.examples[i].class_name].push_back(i);
  }
  CorpusSplit split;
  split.train.sample_rate = split.test.sample_rate = corpus.sample_rate;
  // Iterate classes in first-appearance order so the split does not depend
  // on map ordering of class names.
  for (const auto& name : corpus.class_names()) {
    auto idx = by_class[name];
    if (static_cast<int>(idx.size()) < train_per_class + test_per_class) {
      throw std::invalid_argument("class " + name + " has only " + std::to_string(idx.size()) +
                                  " examples");
    }
    rng.shuffle(std::span(idx));
    for (int k = 0; k < train_per_class; ++k) split.train.examples.push_back(corpus.examples[idx[k]]);
    for (int k = 0; k < test_per_class; ++k) {
      split.test.examples.push_back(corpus.examples[idx[train_per_class + k]]);
    }
  }
  return split;
}

}  // namespace doakit
