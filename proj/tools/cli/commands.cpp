// SPDX-License-Identifier: Apache-2.0
#include "cli/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <stdexcept>

#include "doakit/audio_io.hpp"
#include "doakit/container.hpp"
#include "doakit/corpus.hpp"
#include "doakit/dataset.hpp"
#include "doakit/errors.hpp"
#include "doakit/features.hpp"
#include "doakit/geometry.hpp"
#include "doakit/nn/params_io.hpp"
#include "doakit/parallel.hpp"
#include "doakit/room.hpp"
#include "doakit/scene.hpp"
#include "doakit/subspace.hpp"

namespace fs = std::filesystem;

namespace doakit::cli {

namespace layout {

fs::path manifest_path(const ExperimentConfig& c) { return c.paths.data / "manifest.csv"; }

fs::path recording_work_dir(const ExperimentConfig& c, const std::string& name) { return c.paths.work / name; }

fs::path model_dir(const ExperimentConfig& c, const std::string& tag, int split) {
  return c.paths.output / "models" / (tag + "_split" + std::to_string(split));
}

fs::path inference_dir(const ExperimentConfig& c, const std::string& model, const std::string& name) {
  return c.paths.output / "inference" / model / name;
}

void write_stage_metadata(const fs::path& dir, const std::string& stage, const std::string& fingerprint,
                          const ExperimentConfig& config) {
  fs::create_directories(dir);
  {
    std::ofstream os(dir / (stage + ".meta"), std::ios::trunc);
    os << "stage = " << stage << "\nformat_version = " << kArtifactVersion << "\n\n" << fingerprint;
    if (!os) throw std::runtime_error("cannot write " + (dir / (stage + ".meta")).string());
  }
  std::ofstream os(dir / "resolved_config.ini", std::ios::trunc);
  os << config.to_ini();
}

void verify_stage(const fs::path& dir, const std::string& stage, const std::string& fingerprint) {
  const fs::path meta = dir / (stage + ".meta");
  std::ifstream is(meta);
  if (!is) throw MissingInputError("missing " + meta.string() + ": run '" + stage + "' first");
  std::stringstream ss;
  ss << is.rdbuf();
  const std::string text = ss.str();
  const std::string header = "stage = " + stage + "\nformat_version = " + std::to_string(kArtifactVersion) + "\n\n";
  if (text.rfind("stage = " + stage + "\n", 0) != 0 || text.rfind(header, 0) != 0) {
    throw std::invalid_argument(meta.string() + " was written by an incompatible version; rerun '" + stage + "'");
  }
  if (text.substr(header.size()) != fingerprint) {
    throw std::invalid_argument(meta.string() + " was produced with different settings; rerun '" + stage +
                                "' or restore the matching config");
  }
}

}  // namespace layout

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed derived from the experiment seed and a stable label, so adding or
/// removing datasets never changes the others.
std::uint64_t derive_seed(std::uint64_t seed, const std::string& label) { return splitmix(seed ^ fnv1a(label)); }

std::string pad3(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%03zu", i);
  return buf;
}

Corpus load_corpus(const ExperimentConfig& c) {
  if (c.dataset.corpus == "synthetic") {
    SyntheticCorpusOptions o;
    o.classes = c.dataset.corpus_classes;
    o.examples_per_class = c.dataset.corpus_examples_per_class;
    o.seed = derive_seed(c.dataset.seed, "corpus");
    return generate_synthetic_corpus(o);
  }
  const fs::path dir = c.dataset.corpus;
  if (!fs::is_directory(dir)) throw MissingInputError("corpus directory not found: " + dir.string());
  return load_wav_corpus(dir);
}

std::vector<ManifestEntry> read_entries(const ExperimentConfig& c) {
  const fs::path path = layout::manifest_path(c);
  if (!fs::exists(path)) throw MissingInputError("missing manifest " + path.string() + ": run 'synthesize' first");
  return read_manifest(path);
}

bool in_pipeline(const ExperimentConfig& c, int split) {
  return std::find(c.pipeline.splits.begin(), c.pipeline.splits.end(), split) != c.pipeline.splits.end();
}

std::string entry_tag(const ManifestEntry& e) { return dataset_tag(e.context, e.max_overlap, e.room); }

/// Training tag of the network evaluated on a test tag: O1R_room2 -> O1R.
std::string model_tag(const std::string& test_tag) { return test_tag.substr(0, 3); }

void require_files(const std::vector<fs::path>& files) {
  std::string missing;
  for (const auto& f : files) {
    if (!fs::exists(f)) missing += "\n  " + f.string();
  }
  if (!missing.empty()) throw MissingInputError("missing input files:" + missing);
}

fs::path feature_index_path(const ExperimentConfig& c, const std::string& name) {
  return layout::recording_work_dir(c, name) / "features" / "index.csv";
}
fs::path sps_target_path(const ExperimentConfig& c, const std::string& name) {
  return layout::recording_work_dir(c, name) / "sps_target.dsps";
}
fs::path doa_target_path(const ExperimentConfig& c, const std::string& name) {
  return layout::recording_work_dir(c, name) / "doa_target.ddoa";
}

/// frames x 432 0/1 matrix.
ContainerData read_doa_targets(const fs::path& path) {
  if (!fs::exists(path)) throw MissingInputError("missing DOA target file: " + path.string());
  auto data = read_container(path, kDoaMagic);
  if (data.header.columns != build_doa_grid().size()) throw FormatError(path.string() + ": unexpected DOA grid width");
  return data;
}

std::vector<std::vector<Direction>> truth_from_targets(const ContainerData& targets, const DirectionGrid& doa_grid) {
  const std::size_t frames = targets.header.rows, width = targets.header.columns;
  std::vector<std::vector<Direction>> out(frames);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t i = 0; i < width; ++i) {
      if (targets.values[t * width + i] > 0.5f) out[t].push_back(doa_grid[i]);
    }
  }
  return out;
}

std::vector<std::size_t> counts_of(const std::vector<std::vector<Direction>>& truth) {
  std::vector<std::size_t> out;
  out.reserve(truth.size());
  for (const auto& f : truth) out.push_back(f.size());
  return out;
}

void write_estimates_csv(const fs::path& path, const std::vector<std::vector<Direction>>& est) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "frame,azimuth_deg,elevation_deg\n";
  for (std::size_t t = 0; t < est.size(); ++t) {
    for (const auto& d : est[t]) os << t << ',' << d.azimuth_deg() << ',' << d.elevation_deg() << '\n';
  }
}

std::vector<std::vector<Direction>> read_estimates_csv(const fs::path& path, std::size_t frames) {
  std::ifstream is(path);
  if (!is) throw MissingInputError("missing estimate file: " + path.string() + ": run 'infer' first");
  std::string line;
  std::getline(is, line);
  if (line != "frame,azimuth_deg,elevation_deg") throw FormatError(path.string() + ": unexpected header");
  std::vector<std::vector<Direction>> out(frames);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 3) throw FormatError(path.string() + ": malformed row '" + line + "'");
    const std::size_t t = std::stoul(f[0]);
    if (t >= frames) throw FormatError(path.string() + ": frame index out of range");
    out[t].push_back(Direction(std::stod(f[1]), std::stod(f[2])));
  }
  return out;
}

float max_value(const std::vector<float>& v) {
  float m = 0.0f;
  for (float x : v) m = std::max(m, x);
  return m;
}

/// MUSIC target scaled to unit maximum, as the network is trained on it.
PseudoSpectrum normalized_sps(const PseudoSpectrum& sps) {
  PseudoSpectrum out = sps;
  const float m = max_value(sps.values);
  if (m > 0.0f) {
    for (auto& v : out.values) v /= m;
  }
  return out;
}

void write_reports(const fs::path& stem, const std::vector<EvalReport>& reports) {
  fs::create_directories(stem.parent_path());
  {
    std::ofstream os(stem.string() + ".csv", std::ios::trunc);
    write_report_csv(os, reports);
  }
  std::ofstream os(stem.string() + ".txt", std::ios::trunc);
  write_report_table(os, reports);
}

std::vector<std::string> ordered_unique(const std::vector<std::string>& v) {
  std::vector<std::string> out;
  for (const auto& x : v) {
    if (std::find(out.begin(), out.end(), x) == out.end()) out.push_back(x);
  }
  return out;
}

std::mutex log_mutex;

void log_line(std::ostream& log, const std::string& text) {
  std::lock_guard lock(log_mutex);
  log << text << '\n' << std::flush;
}

}  // namespace

// ------------------------------------------------------------ synthesize

void cmd_synthesize(const ExperimentConfig& config, std::ostream& log) {
  config.validate();
  const Corpus corpus = load_corpus(config);
  const auto& d = config.dataset;

  std::vector<CorpusSplit> corpus_splits;
  for (int split = 1; split <= d.splits; ++split) {
    Rng rng(derive_seed(d.seed, "corpus-split" + std::to_string(split)));
    corpus_splits.push_back(split_corpus(corpus, d.corpus_train_per_class, d.corpus_test_per_class, rng));
  }

  struct Plan {
    ManifestEntry entry;
    int split_index;
  };
  std::vector<Plan> plans;
  for (int split = 1; split <= d.splits; ++split) {
    for (Context ctx : d.contexts) {
      for (int o : d.overlaps) {
        auto add = [&](const std::string& subset, int room, int count) {
          const std::string tag = dataset_tag(ctx, o, room);
          for (int i = 0; i < count; ++i) {
            ManifestEntry e;
            e.name = tag + "_s" + std::to_string(split) + "_" + subset + "_" + pad3(static_cast<std::size_t>(i));
            e.split = split;
            e.subset = subset;
            e.context = ctx;
            e.max_overlap = o;
            e.room = room;
            const fs::path rel = fs::path(tag) / ("split" + std::to_string(split)) / subset;
            e.audio = (rel / (e.name + ".wav")).generic_string();
            e.metadata = (rel / (e.name + ".csv")).generic_string();
            plans.push_back({e, split - 1});
          }
        };
        if (ctx == Context::kAnechoic) {
          add("train", 0, d.train_recordings);
          add("test", 0, d.test_recordings);
        } else {
          add("train", 1, d.train_recordings);
          for (int room : d.rooms) add("test", room, d.test_recordings);
        }
      }
    }
  }

  log_line(log, "synthesize: " + std::to_string(plans.size()) + " recordings into " + config.paths.data.string());
  parallel_for(plans.size(), config.workers, [&](std::size_t i) {
    const Plan& p = plans[i];
    const ManifestEntry& e = p.entry;
    const CorpusSplit& cs = corpus_splits[static_cast<std::size_t>(p.split_index)];
    const Corpus& source = e.subset == "train" ? cs.train : cs.test;
    ScheduleOptions opt;
    opt.context = e.context;
    opt.max_overlap = e.max_overlap;
    opt.length_s = d.length_s;
    if (e.context == Context::kReverberant) opt.room = make_room(e.room);
    Rng rng(derive_seed(d.seed, e.name));
    SceneSpec spec = schedule_events(source, opt, rng);
    const RenderedScene scene = render_scene(spec, source);
    const fs::path audio = config.paths.data / e.audio;
    fs::create_directories(audio.parent_path());
    write_ambisonic_wav(audio, scene.audio);
    write_scene_csv(config.paths.data / e.metadata, spec);
  });

  std::vector<ManifestEntry> entries;
  for (const auto& p : plans) entries.push_back(p.entry);
  write_manifest(layout::manifest_path(config), entries);
  layout::write_stage_metadata(config.paths.data, "synthesize", config.dataset_fingerprint(), config);
  log_line(log, "synthesize: wrote " + layout::manifest_path(config).string());
}

// --------------------------------------------------------------- prepare

void cmd_prepare(const ExperimentConfig& config, std::ostream& log) {
  config.validate();
  layout::verify_stage(config.paths.data, "synthesize", config.dataset_fingerprint());
  std::vector<ManifestEntry> entries;
  for (const auto& e : read_entries(config)) {
    if (in_pipeline(config, e.split)) entries.push_back(e);
  }
  {
    std::vector<fs::path> inputs;
    for (const auto& e : entries) {
      inputs.push_back(config.paths.data / e.audio);
      inputs.push_back(config.paths.data / e.metadata);
    }
    require_files(inputs);
  }
  const MusicEstimator music(build_sps_grid(), config.music);
  const DirectionGrid doa_grid = build_doa_grid();
  log_line(log, "prepare: " + std::to_string(entries.size()) + " recordings");

  parallel_for(entries.size(), config.workers, [&](std::size_t i) {
    const ManifestEntry& e = entries[i];
    const AmbisonicBuffer audio = read_ambisonic_wav(config.paths.data / e.audio);
    const ComplexSpectrogram spec = stft(audio);
    const auto sequences = assemble_sequences(spec, config.sequence_length);

    const fs::path dir = layout::recording_work_dir(config, e.name);
    const fs::path feat_dir = dir / "features";
    fs::create_directories(feat_dir);
    std::vector<FeatureIndexEntry> index;
    for (std::size_t s = 0; s < sequences.size(); ++s) {
      const std::string file = "seq_" + pad3(s) + ".dfea";
      write_feature_file(feat_dir / file, sequences[s]);
      index.push_back({s, file, sequences[s].valid_frames});
    }
    write_feature_index(feat_dir / "index.csv", index);

    SceneSpec scene;
    scene.context = e.context;
    scene.max_overlap = e.max_overlap;
    scene.length_samples = audio.frames();
    scene.events = read_scene_csv(config.paths.data / e.metadata);
    const GroundTruth truth = compute_ground_truth(scene);
    if (truth.frames.size() != spec.frames()) {
      throw std::logic_error(e.name + ": ground truth and spectrogram frame counts differ");
    }
    std::vector<std::size_t> counts;
    for (const auto& f : truth.frames) {
      if (f.size() > static_cast<std::size_t>(e.max_overlap)) {
        throw FormatError(e.name + ": more active sources than max_overlap");
      }
      // Silent frames are scored against the noise field with one source.
      counts.push_back(std::max<std::size_t>(1, f.size()));
    }
    write_sps_file(dir / "sps_target.dsps", music.run(spec, counts));
    const auto targets = truth.doa_targets(doa_grid);
    write_container(dir / "doa_target.ddoa", kDoaMagic, static_cast<std::uint32_t>(truth.frames.size()),
                    static_cast<std::uint32_t>(doa_grid.size()), 1, static_cast<std::uint32_t>(truth.frames.size()),
                    targets);
    log_line(log, "prepare: " + e.name + " (" + std::to_string(spec.frames()) + " frames, " +
                      std::to_string(sequences.size()) + " sequences)");
  });
  layout::write_stage_metadata(config.paths.work, "prepare", config.prepare_fingerprint(), config);
}

// ------------------------------------------------------------ music-eval

namespace {

struct MusicResult {
  std::vector<std::vector<Direction>> estimated, truth;
};

MusicResult music_estimates(const ExperimentConfig& config, const ManifestEntry& e, const DirectionGrid& sps_grid,
                            const DirectionGrid& doa_grid) {
  const fs::path sps_path = sps_target_path(config, e.name);
  if (!fs::exists(sps_path)) throw MissingInputError("missing SPS file: " + sps_path.string() + ": run 'prepare' first");
  const PseudoSpectrum sps = read_sps_file(sps_path);
  const auto targets = read_doa_targets(doa_target_path(config, e.name));
  MusicResult r;
  r.truth = truth_from_targets(targets, doa_grid);
  if (r.truth.size() != sps.frames) throw FormatError(e.name + ": SPS and DOA target frame counts differ");
  r.estimated.resize(sps.frames);
  for (std::size_t t = 0; t < sps.frames; ++t) {
    for (auto idx : pick_peaks(sps.frame(t), sps_grid, r.truth[t].size())) r.estimated[t].push_back(sps_grid[idx]);
  }
  return r;
}

}  // namespace

std::vector<EvalReport> cmd_music_eval(const ExperimentConfig& config, std::ostream& log) {
  config.validate();
  layout::verify_stage(config.paths.work, "prepare", config.prepare_fingerprint());
  std::vector<ManifestEntry> entries;
  for (const auto& e : read_entries(config)) {
    if (in_pipeline(config, e.split) && e.subset == "test") entries.push_back(e);
  }
  const DirectionGrid sps_grid = build_sps_grid();
  const DirectionGrid doa_grid = build_doa_grid();
  std::vector<MusicResult> results(entries.size());
  const fs::path out_dir = config.paths.output / "music";
  fs::create_directories(out_dir);
  parallel_for(entries.size(), config.workers, [&](std::size_t i) {
    results[i] = music_estimates(config, entries[i], sps_grid, doa_grid);
    write_estimates_csv(out_dir / (entries[i].name + "_doa.csv"), results[i].estimated);
  });

  std::vector<std::string> tags;
  for (const auto& e : entries) tags.push_back(entry_tag(e));
  tags = ordered_unique(tags);
  std::vector<EvalReport> reports;
  for (const auto& tag : tags) {
    EvalAccumulator acc;
    for (std::size_t i = 0; i < entries.size(); ++i) {
      if (entry_tag(entries[i]) == tag) acc.add_doa(results[i].estimated, results[i].truth);
    }
    reports.push_back(EvalReport::from(acc, tag, "MUSIC"));
    const auto& r = reports.back();
    log_line(log, "music-eval: " + tag + " DOA error " + (r.doa_error_deg ? std::to_string(*r.doa_error_deg) : "n/a") +
                      " deg over " + std::to_string(r.frames_evaluated) + " frames");
  }
  write_reports(config.paths.output / "music_report", reports);
  layout::write_stage_metadata(out_dir, "music-eval", config.prepare_fingerprint(), config);
  return reports;
}

// ----------------------------------------------------------------- train

namespace {

/// Loads every sequence of a recording with its targets. The SPS target is
/// scaled so that the recording's maximum is 1.
std::vector<nn::TrainingSequence> load_training_sequences(const ExperimentConfig& config, const ManifestEntry& e) {
  const fs::path index_path = feature_index_path(config, e.name);
  require_files({index_path, sps_target_path(config, e.name), doa_target_path(config, e.name)});
  const auto index = read_feature_index(index_path);
  const PseudoSpectrum sps = normalized_sps(read_sps_file(sps_target_path(config, e.name)));
  const auto doa = read_doa_targets(doa_target_path(config, e.name));
  const std::size_t L = config.sequence_length;
  const std::size_t sps_w = sps.directions, doa_w = doa.header.columns;
  if (doa.header.rows != sps.frames) throw FormatError(e.name + ": SPS and DOA target frame counts differ");
  std::vector<fs::path> files;
  for (const auto& entry : index) files.push_back(index_path.parent_path() / entry.file);
  require_files(files);

  std::vector<nn::TrainingSequence> out;
  for (std::size_t s = 0; s < index.size(); ++s) {
    const SpectrogramTensor feat = read_feature_file(files[s]);
    if (feat.length != L) throw FormatError(files[s].string() + ": sequence length differs from the config");
    nn::TrainingSequence seq;
    seq.valid_frames = feat.valid_frames;
    seq.features = nn::Tensor<float>({feat.length, feat.bins, feat.channels}, feat.values);
    seq.sps_target = nn::Tensor<float>({L, 1, sps_w});
    seq.doa_target = nn::Tensor<float>({L, 1, doa_w});
    const std::size_t first = index[s].sequence * L;
    if (first + seq.valid_frames > sps.frames) throw FormatError(e.name + ": features extend beyond the targets");
    std::copy_n(sps.values.begin() + static_cast<std::ptrdiff_t>(first * sps_w), seq.valid_frames * sps_w,
                seq.sps_target.data());
    std::copy_n(doa.values.begin() + static_cast<std::ptrdiff_t>(first * doa_w), seq.valid_frames * doa_w,
                seq.doa_target.data());
    out.push_back(std::move(seq));
  }
  return out;
}

std::vector<std::string> training_tags(const ExperimentConfig& config, const std::vector<ManifestEntry>& entries) {
  if (!config.training.datasets.empty()) return config.training.datasets;
  std::vector<std::string> tags;
  for (const auto& e : entries) {
    if (e.subset == "train") tags.push_back(entry_tag(e));
  }
  return ordered_unique(tags);
}

}  // namespace

std::vector<nn::TrainingSequence> layout::training_sequences(const ExperimentConfig& config, const ManifestEntry& e) {
  return load_training_sequences(config, e);
}

void cmd_train(const ExperimentConfig& config, std::ostream& log) {
  config.validate();
  layout::verify_stage(config.paths.work, "prepare", config.prepare_fingerprint());
  const auto entries = read_entries(config);
  const DirectionGrid doa_grid = build_doa_grid();
  log_line(log, "train: network has " + std::to_string(config.network.parameter_count()) + " trainable parameters");
  for (int split : config.pipeline.splits) {
    for (const auto& tag : training_tags(config, entries)) {
      std::vector<ManifestEntry> recs;
      for (const auto& e : entries) {
        if (e.split == split && e.subset == "train" && entry_tag(e) == tag) recs.push_back(e);
      }
      if (recs.empty()) {
        throw MissingInputError("no training recordings for " + tag + " split " + std::to_string(split));
      }
      Rng rng(derive_seed(config.training.train.seed, "validation-" + tag + "-" + std::to_string(split)));
      rng.shuffle(std::span(recs));
      std::size_t n_val = 0;
      if (config.training.validation_fraction > 0.0 && recs.size() >= 2) {
        n_val = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::lround(config.training.validation_fraction * static_cast<double>(recs.size()))));
        n_val = std::min(n_val, recs.size() - 1);
      }
      std::vector<nn::TrainingSequence> train_set, val_set;
      for (std::size_t i = 0; i < recs.size(); ++i) {
        auto seqs = load_training_sequences(config, recs[i]);
        auto& dst = i < recs.size() - n_val ? train_set : val_set;
        for (auto& s : seqs) dst.push_back(std::move(s));
      }
      const fs::path dir = layout::model_dir(config, tag, split);
      fs::create_directories(dir);
      log_line(log, "train: " + tag + " split " + std::to_string(split) + ": " + std::to_string(train_set.size()) +
                        " training and " + std::to_string(val_set.size()) + " validation sequences");
      const auto result = nn::train(config.network, config.training.train, train_set, val_set, doa_grid,
                                    [&](const nn::EpochRecord& r, const nn::NetworkOutputs&) {
                                      char buf[160];
                                      std::snprintf(buf, sizeof buf,
                                                    "train: %s epoch %zu mse %.6f bce %.6f total %.6f metric %.4f%s",
                                                    tag.c_str(), r.epoch, r.mse, r.bce, r.total, r.doa_metric,
                                                    r.best ? " *" : "");
                                      log_line(log, buf);
                                      return true;
                                    });
      nn::write_parameters(dir / "params.dnpr", result.best);
      nn::write_parameters(dir / "params_last.dnpr", result.last);
      {
        std::ofstream os(dir / "history.csv", std::ios::trunc);
        nn::write_history_csv(os, result.history);
      }
      {
        std::ofstream os(dir / "summary.txt", std::ios::trunc);
        nn::DoaNet<float> net(config.network, 0);
        os << "dataset = " << tag << "\nsplit = " << split << "\nbest_epoch = " << result.best_epoch
           << "\nepochs_run = " << result.history.size() << "\ntrainable_parameters = " << net.trainable_count()
           << "\nanalytic_parameters = " << config.network.parameter_count() << "\n\n";
        for (const auto& line : net.describe()) os << line << '\n';
      }
      layout::write_stage_metadata(dir, "train", config.model_fingerprint(), config);
    }
  }
}

// ----------------------------------------------------------------- infer

namespace {

struct FeatureSet {
  std::vector<nn::Tensor<float>> tensors;
  std::vector<std::size_t> valid;
};

FeatureSet load_features(const ExperimentConfig& config, const std::string& name) {
  const fs::path index_path = feature_index_path(config, name);
  require_files({index_path});
  FeatureSet fsets;
  for (const auto& entry : read_feature_index(index_path)) {
    const fs::path file = index_path.parent_path() / entry.file;
    require_files({file});
    const SpectrogramTensor feat = read_feature_file(file);
    fsets.tensors.emplace_back(nn::Shape{feat.length, feat.bins, feat.channels}, feat.values);
    fsets.valid.push_back(feat.valid_frames);
  }
  return fsets;
}

std::unique_ptr<nn::DoaNet<float>> load_model(const ExperimentConfig& config, const fs::path& dir) {
  layout::verify_stage(dir, "train", config.model_fingerprint());
  const auto params = nn::read_parameters(dir / "params.dnpr");
  if (!(params.config == config.network)) {
    throw std::invalid_argument((dir / "params.dnpr").string() + ": network config differs from the experiment config");
  }
  auto net = std::make_unique<nn::DoaNet<float>>(params.config, 0);
  net->import_parameters(params);
  net->set_workers(config.workers);
  return net;
}

std::vector<ManifestEntry> test_entries(const ExperimentConfig& config, const std::vector<ManifestEntry>& entries) {
  std::vector<ManifestEntry> out;
  for (const auto& e : entries) {
    if (in_pipeline(config, e.split) && e.subset == "test") out.push_back(e);
  }
  return out;
}

}  // namespace

void cmd_infer(const ExperimentConfig& config, std::optional<nn::InferenceMode> mode, std::ostream& log) {
  config.validate();
  layout::verify_stage(config.paths.work, "prepare", config.prepare_fingerprint());
  const auto entries = read_entries(config);
  const DirectionGrid doa_grid = build_doa_grid();
  const auto tags = training_tags(config, entries);
  for (int split : config.pipeline.splits) {
    for (const auto& tag : tags) {
      const fs::path mdir = layout::model_dir(config, tag, split);
      auto net = load_model(config, mdir);
      const std::string model = mdir.filename().string();
      for (const auto& e : test_entries(config, entries)) {
        if (e.split != split || model_tag(entry_tag(e)) != tag) continue;
        const auto features = load_features(config, e.name);
        const auto out = nn::run_network(*net, features.tensors, features.valid, config.training.train.batch_size);
        const auto targets = read_doa_targets(doa_target_path(config, e.name));
        if (targets.header.rows != out.sps.frames) throw FormatError(e.name + ": features and targets disagree on frames");
        const auto truth = truth_from_targets(targets, doa_grid);
        const fs::path dir = layout::inference_dir(config, model, e.name);
        fs::create_directories(dir);
        write_sps_file(dir / "sps.dsps", out.sps);
        write_container(dir / "doa_probabilities.ddoa", kDoaMagic, static_cast<std::uint32_t>(out.doa_probabilities.frames),
                        static_cast<std::uint32_t>(out.doa_probabilities.directions), 1,
                        static_cast<std::uint32_t>(out.doa_probabilities.frames), out.doa_probabilities.values);
        auto to_dirs = [&](const std::vector<std::vector<std::size_t>>& picks) {
          std::vector<std::vector<Direction>> d(picks.size());
          for (std::size_t t = 0; t < picks.size(); ++t) {
            for (auto i : picks[t]) d[t].push_back(doa_grid[i]);
          }
          return d;
        };
        if (!mode || *mode == nn::InferenceMode::kThreshold) {
          write_estimates_csv(dir / "doa_threshold.csv",
                              to_dirs(nn::select_doas(out.doa_probabilities, nn::InferenceMode::kThreshold)));
        }
        if (!mode || *mode == nn::InferenceMode::kTopO) {
          const auto counts = counts_of(truth);
          write_estimates_csv(dir / "doa_top_o.csv",
                              to_dirs(nn::select_doas(out.doa_probabilities, nn::InferenceMode::kTopO,
                                                      std::span<const std::size_t>(counts))));
        }
        log_line(log, "infer: " + model + " -> " + e.name);
      }
      layout::write_stage_metadata(config.paths.output / "inference" / model, "infer", config.model_fingerprint(), config);
    }
  }
}

// ------------------------------------------------------------------ eval

std::vector<EvalReport> cmd_eval(const ExperimentConfig& config, std::optional<nn::InferenceMode> mode,
                                 std::ostream& log) {
  config.validate();
  layout::verify_stage(config.paths.work, "prepare", config.prepare_fingerprint());
  const auto entries = read_entries(config);
  const auto tests = test_entries(config, entries);
  const DirectionGrid sps_grid = build_sps_grid();
  const DirectionGrid doa_grid = build_doa_grid();
  const auto trained = training_tags(config, entries);

  std::vector<MusicResult> music(tests.size());
  parallel_for(tests.size(), config.workers,
               [&](std::size_t i) { music[i] = music_estimates(config, tests[i], sps_grid, doa_grid); });

  std::vector<std::string> tags;
  for (const auto& e : tests) tags.push_back(entry_tag(e));
  tags = ordered_unique(tags);
  std::set<std::string> verified;
  std::vector<EvalReport> reports;
  for (const auto& tag : tags) {
    EvalAccumulator acc_music, acc_thr, acc_top;
    const bool has_model = std::find(trained.begin(), trained.end(), model_tag(tag)) != trained.end();
    for (std::size_t i = 0; i < tests.size(); ++i) {
      const auto& e = tests[i];
      if (entry_tag(e) != tag) continue;
      acc_music.add_doa(music[i].estimated, music[i].truth);
      if (!has_model) continue;
      const std::string model = layout::model_dir(config, model_tag(tag), e.split).filename().string();
      const fs::path model_out = config.paths.output / "inference" / model;
      if (!verified.count(model)) {
        layout::verify_stage(model_out, "infer", config.model_fingerprint());
        verified.insert(model);
      }
      const fs::path dir = layout::inference_dir(config, model, e.name);
      const fs::path sps_path = dir / "sps.dsps";
      if (!fs::exists(sps_path)) throw MissingInputError("missing " + sps_path.string() + ": run 'infer' first");
      const PseudoSpectrum net_sps = read_sps_file(sps_path);
      const PseudoSpectrum ref = normalized_sps(read_sps_file(sps_target_path(config, e.name)));
      const std::size_t frames = music[i].truth.size();
      if (!mode || *mode == nn::InferenceMode::kThreshold) {
        acc_thr.add_sps(net_sps, ref);
        acc_thr.add_doa(read_estimates_csv(dir / "doa_threshold.csv", frames), music[i].truth);
      }
      if (!mode || *mode == nn::InferenceMode::kTopO) {
        acc_top.add_sps(net_sps, ref);
        acc_top.add_doa(read_estimates_csv(dir / "doa_top_o.csv", frames), music[i].truth);
      }
    }
    reports.push_back(EvalReport::from(acc_music, tag, "MUSIC"));
    if (has_model && (!mode || *mode == nn::InferenceMode::kThreshold)) {
      reports.push_back(EvalReport::from(acc_thr, tag, "DOAnet-threshold"));
    }
    if (has_model && (!mode || *mode == nn::InferenceMode::kTopO)) {
      reports.push_back(EvalReport::from(acc_top, tag, "DOAnet-top-o"));
    }
  }
  write_reports(config.paths.output / "report", reports);
  log_line(log, "eval: wrote " + (config.paths.output / "report.csv").string() + " and report.txt");
  return reports;
}

// ------------------------------------------------------------ render-sps

std::pair<std::size_t, std::optional<std::size_t>> parse_frame_range(const std::string& text) {
  auto parse = [&](const std::string& s) {
    std::size_t used = 0;
    unsigned long v = 0;
    try {
      v = std::stoul(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (s.empty() || used != s.size() || s[0] == '-') throw std::invalid_argument("bad frame range '" + text + "'");
    return static_cast<std::size_t>(v);
  };
  const auto colon = text.find(':');
  if (colon == std::string::npos) return {parse(text), std::nullopt};
  const std::size_t a = parse(text.substr(0, colon)), b = parse(text.substr(colon + 1));
  if (b < a) throw std::invalid_argument("bad frame range '" + text + "': end before start");
  return {a, b};
}

void cmd_render_sps(const RenderSpsOptions& options, std::ostream& log) {
  if (!fs::exists(options.sps_file)) throw MissingInputError("missing SPS file: " + options.sps_file.string());
  if (options.zoom == 0) throw std::invalid_argument("zoom must be positive");
  const PseudoSpectrum sps = read_sps_file(options.sps_file);
  const DirectionGrid sps_grid = build_sps_grid(), doa_grid = build_doa_grid();
  const DirectionGrid* grid = nullptr;
  if (sps.directions == sps_grid.size()) grid = &sps_grid;
  if (sps.directions == doa_grid.size()) grid = &doa_grid;
  if (!grid) throw FormatError(options.sps_file.string() + ": width matches neither direction grid");
  const std::size_t first = options.first_frame;
  const std::size_t last = options.last_frame.value_or(first);
  if (last < first || last >= sps.frames) {
    throw std::invalid_argument("frame range " + std::to_string(first) + ":" + std::to_string(last) +
                                " is outside 0:" + std::to_string(sps.frames == 0 ? 0 : sps.frames - 1));
  }
  std::vector<std::vector<Direction>> truth;
  if (options.truth_scene) {
    if (!fs::exists(*options.truth_scene)) throw MissingInputError("missing scene file: " + options.truth_scene->string());
    SceneSpec scene;
    scene.events = read_scene_csv(*options.truth_scene);
    scene.length_samples = FrameLayout{}.window + (sps.frames - 1) * FrameLayout{}.hop;
    truth = compute_ground_truth(scene).frames;
  }
  fs::create_directories(options.output_dir);
  std::ofstream csv(options.output_dir / "sps_values.csv", std::ios::trunc);
  csv << "frame,index,azimuth_deg,elevation_deg,value\n";
  csv.precision(9);
  for (std::size_t t = first; t <= last; ++t) {
    const auto values = sps.frame(t);
    const std::span<const Direction> markers =
        t < truth.size() ? std::span<const Direction>(truth[t]) : std::span<const Direction>();
    char name[32];
    std::snprintf(name, sizeof name, "frame_%05zu.pgm", t);
    write_pgm(options.output_dir / name, render_heatmap(values, *grid, markers, options.zoom));
    for (std::size_t i = 0; i < values.size(); ++i) {
      csv << t << ',' << i << ',' << (*grid)[i].azimuth_deg() << ',' << (*grid)[i].elevation_deg() << ',' << values[i]
          << '\n';
    }
  }
  log_line(log, "render-sps: wrote " + std::to_string(last - first + 1) + " image(s) to " + options.output_dir.string());
}

}  // namespace doakit::cli
