// SPDX-License-Identifier: Apache-2.0
#include "cli/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

#include "doakit/dataset.hpp"
#include "doakit/errors.hpp"
#include "doakit/geometry.hpp"

namespace doakit::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <class T>
std::string join(const std::vector<T>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  return os.str();
}

std::string join_contexts(const std::vector<Context>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + to_string(v[i]);
  return s;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const std::string& expected) {
  throw std::invalid_argument("config: " + key + " = '" + value + "' is not " + expected);
}

template <class T>
T parse_integer(const std::string& key, const std::string& value) {
  T v{};
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, v);
  if (value.empty() || ec != std::errc() || ptr != end) bad_value(key, value, "an integer");
  return v;
}

double parse_real(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &used);
  } catch (const std::exception&) {
    bad_value(key, value, "a number");
  }
  if (used != value.size()) bad_value(key, value, "a number");
  return v;
}

bool parse_flag(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  bad_value(key, value, "a boolean");
}

std::vector<std::string> parse_words(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<int> parse_int_list(const std::string& key, const std::string& value) {
  std::vector<int> out;
  for (const auto& w : parse_words(value)) out.push_back(parse_integer<int>(key, w));
  return out;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("config: " + what);
}

using Setter = std::function<void(ExperimentConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"experiment.scale", [](ExperimentConfig&, const std::string&) {}},  // consumed before defaults
      {"experiment.workers",
       [](ExperimentConfig& c, const std::string& v) { c.workers = parse_integer<std::size_t>("experiment.workers", v); }},
      {"dataset.corpus", [](ExperimentConfig& c, const std::string& v) { c.dataset.corpus = v; }},
      {"dataset.corpus_classes",
       [](ExperimentConfig& c, const std::string& v) { c.dataset.corpus_classes = parse_integer<int>("dataset.corpus_classes", v); }},
      {"dataset.corpus_examples_per_class",
       [](ExperimentConfig& c, const std::string& v) {
         c.dataset.corpus_examples_per_class = parse_integer<int>("dataset.corpus_examples_per_class", v);
       }},
      {"dataset.corpus_train_per_class",
       [](ExperimentConfig& c, const std::string& v) {
         c.dataset.corpus_train_per_class = parse_integer<int>("dataset.corpus_train_per_class", v);
       }},
      {"dataset.corpus_test_per_class",
       [](ExperimentConfig& c, const std::string& v) {
         c.dataset.corpus_test_per_class = parse_integer<int>("dataset.corpus_test_per_class", v);
       }},
      {"dataset.splits", [](ExperimentConfig& c, const std::string& v) { c.dataset.splits = parse_integer<int>("dataset.splits", v); }},
      {"dataset.train_recordings",
       [](ExperimentConfig& c, const std::string& v) {
         c.dataset.train_recordings = parse_integer<int>("dataset.train_recordings", v);
       }},
      {"dataset.test_recordings",
       [](ExperimentConfig& c, const std::string& v) {
         c.dataset.test_recordings = parse_integer<int>("dataset.test_recordings", v);
       }},
      {"dataset.contexts",
       [](ExperimentConfig& c, const std::string& v) {
         c.dataset.contexts.clear();
         for (const auto& w : parse_words(v)) {
           try {
             c.dataset.contexts.push_back(parse_context(w));
           } catch (const std::exception&) {
             bad_value("dataset.contexts", w, "anechoic or reverberant");
           }
         }
       }},
      {"dataset.overlaps",
       [](ExperimentConfig& c, const std::string& v) { c.dataset.overlaps = parse_int_list("dataset.overlaps", v); }},
      {"dataset.rooms", [](ExperimentConfig& c, const std::string& v) { c.dataset.rooms = parse_int_list("dataset.rooms", v); }},
      {"dataset.length_s", [](ExperimentConfig& c, const std::string& v) { c.dataset.length_s = parse_real("dataset.length_s", v); }},
      {"dataset.seed",
       [](ExperimentConfig& c, const std::string& v) { c.dataset.seed = parse_integer<std::uint64_t>("dataset.seed", v); }},
      {"pipeline.splits", [](ExperimentConfig& c, const std::string& v) { c.pipeline.splits = parse_int_list("pipeline.splits", v); }},
      {"features.sequence_length",
       [](ExperimentConfig& c, const std::string& v) {
         c.sequence_length = parse_integer<std::size_t>("features.sequence_length", v);
         c.network.sequence_length = c.sequence_length;
       }},
      {"music.half_window",
       [](ExperimentConfig& c, const std::string& v) { c.music.half_window = parse_integer<std::size_t>("music.half_window", v); }},
      {"music.denominator_floor",
       [](ExperimentConfig& c, const std::string& v) { c.music.denominator_floor = parse_real("music.denominator_floor", v); }},
      {"training.max_epochs",
       [](ExperimentConfig& c, const std::string& v) {
         c.training.train.max_epochs = parse_integer<std::size_t>("training.max_epochs", v);
       }},
      {"training.patience",
       [](ExperimentConfig& c, const std::string& v) { c.training.train.patience = parse_integer<std::size_t>("training.patience", v); }},
      {"training.learning_rate",
       [](ExperimentConfig& c, const std::string& v) {
         c.training.train.adam.learning_rate = parse_real("training.learning_rate", v);
       }},
      {"training.beta1",
       [](ExperimentConfig& c, const std::string& v) { c.training.train.adam.beta1 = parse_real("training.beta1", v); }},
      {"training.beta2",
       [](ExperimentConfig& c, const std::string& v) { c.training.train.adam.beta2 = parse_real("training.beta2", v); }},
      {"training.epsilon",
       [](ExperimentConfig& c, const std::string& v) { c.training.train.adam.epsilon = parse_real("training.epsilon", v); }},
      {"training.batch_size",
       [](ExperimentConfig& c, const std::string& v) {
         c.training.train.batch_size = parse_integer<std::size_t>("training.batch_size", v);
       }},
      {"training.seed",
       [](ExperimentConfig& c, const std::string& v) { c.training.train.seed = parse_integer<std::uint64_t>("training.seed", v); }},
      {"training.sps_loss_weight",
       [](ExperimentConfig& c, const std::string& v) {
         c.training.train.loss_weights.sps = parse_real("training.sps_loss_weight", v);
       }},
      {"training.doa_loss_weight",
       [](ExperimentConfig& c, const std::string& v) {
         c.training.train.loss_weights.doa = parse_real("training.doa_loss_weight", v);
       }},
      {"training.teacher_forcing",
       [](ExperimentConfig& c, const std::string& v) {
         c.training.train.teacher_forcing = parse_flag("training.teacher_forcing", v);
       }},
      {"training.recalibrate_batch_norm",
       [](ExperimentConfig& c, const std::string& v) {
         c.training.train.recalibrate_batch_norm = parse_flag("training.recalibrate_batch_norm", v);
       }},
      {"training.datasets", [](ExperimentConfig& c, const std::string& v) { c.training.datasets = parse_words(v); }},
      {"training.validation_fraction",
       [](ExperimentConfig& c, const std::string& v) {
         c.training.validation_fraction = parse_real("training.validation_fraction", v);
       }},
      {"paths.data", [](ExperimentConfig& c, const std::string& v) { c.paths.data = v; }},
      {"paths.work", [](ExperimentConfig& c, const std::string& v) { c.paths.work = v; }},
      {"paths.output", [](ExperimentConfig& c, const std::string& v) { c.paths.output = v; }},
  };
  return table;
}

}  // namespace

Scale parse_scale(const std::string& s) {
  if (s == "desk") return Scale::kDesk;
  if (s == "paper") return Scale::kPaper;
  throw std::invalid_argument("config: scale must be desk or paper, got '" + s + "'");
}

std::string to_string(Scale s) { return s == Scale::kDesk ? "desk" : "paper"; }

ExperimentConfig default_config(Scale scale) {
  ExperimentConfig c;
  c.scale = scale;
  if (scale == Scale::kPaper) {
    c.dataset.train_recordings = 240;
    c.dataset.test_recordings = 60;
    c.pipeline.splits = {1, 2, 3};
    c.training.train.max_epochs = 1000;
    c.training.train.patience = 100;
  } else {
    c.dataset.train_recordings = 24;
    c.dataset.test_recordings = 6;
    c.pipeline.splits = {1};
    c.training.train.max_epochs = 50;
    c.training.train.patience = 10;
  }
  return c;
}

void ExperimentConfig::validate() const {
  const auto& d = dataset;
  require(d.corpus_classes > 0, "dataset.corpus_classes must be positive");
  require(d.corpus_train_per_class > 0 && d.corpus_test_per_class > 0,
          "dataset.corpus_train_per_class and corpus_test_per_class must be positive");
  if (d.corpus == "synthetic") {
    require(d.corpus_train_per_class + d.corpus_test_per_class <= d.corpus_examples_per_class,
            "dataset.corpus_train_per_class + corpus_test_per_class exceeds corpus_examples_per_class");
  }
  require(d.splits >= 1, "dataset.splits must be at least 1");
  require(d.train_recordings >= 1 && d.test_recordings >= 1, "dataset recording counts must be positive");
  require(!d.contexts.empty(), "dataset.contexts must not be empty");
  require(!d.overlaps.empty(), "dataset.overlaps must not be empty");
  for (int o : d.overlaps) require(o >= 1 && o <= 3, "dataset.overlaps entries must lie in 1..3");
  for (int r : d.rooms) require(r >= 1 && r <= 3, "dataset.rooms entries must lie in 1..3");
  const bool reverberant = std::find(d.contexts.begin(), d.contexts.end(), Context::kReverberant) != d.contexts.end();
  require(!reverberant || !d.rooms.empty(), "dataset.rooms must not be empty for the reverberant context");
  const double window_s = 1764.0 / kSampleRate;
  require(d.length_s >= window_s, "dataset.length_s must cover at least one analysis window");
  require(!pipeline.splits.empty(), "pipeline.splits must not be empty");
  for (int s : pipeline.splits) require(s >= 1 && s <= d.splits, "pipeline.splits entries must lie in 1..dataset.splits");
  require(sequence_length >= 1, "features.sequence_length must be positive");
  require(music.denominator_floor > 0.0, "music.denominator_floor must be positive");
  require(workers >= 1, "experiment.workers must be positive");
  try {
    network.validate();
    training.train.validate();
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  require(network.sequence_length == sequence_length, "network.sequence_length must equal features.sequence_length");
  require(network.input_bins == 1024 && network.input_channels == 8,
          "network.input_bins and input_channels must be 1024 and 8 to match the features");
  require(network.sps_width == build_sps_grid().size(), "network.sps_width must equal the 614-point SPS grid");
  require(network.doa_width == build_doa_grid().size(), "network.doa_width must equal the 432-point DOA grid");
  require(training.validation_fraction >= 0.0 && training.validation_fraction < 1.0,
          "training.validation_fraction must lie in [0, 1)");
  for (const auto& tag : training.datasets) {
    require(tag.size() == 3 && tag[0] == 'O' && (tag[1] >= '1' && tag[1] <= '3') && (tag[2] == 'A' || tag[2] == 'R'),
            "training.datasets entries must look like O1A or O2R, got '" + tag + "'");
  }
}

std::string ExperimentConfig::dataset_fingerprint() const {
  std::ostringstream os;
  const auto& d = dataset;
  os << "[dataset]\n"
     << "corpus = " << d.corpus << '\n'
     << "corpus_classes = " << d.corpus_classes << '\n'
     << "corpus_examples_per_class = " << d.corpus_examples_per_class << '\n'
     << "corpus_train_per_class = " << d.corpus_train_per_class << '\n'
     << "corpus_test_per_class = " << d.corpus_test_per_class << '\n'
     << "splits = " << d.splits << '\n'
     << "train_recordings = " << d.train_recordings << '\n'
     << "test_recordings = " << d.test_recordings << '\n'
     << "contexts = " << join_contexts(d.contexts) << '\n'
     << "overlaps = " << join(d.overlaps) << '\n'
     << "rooms = " << join(d.rooms) << '\n'
     << "length_s = " << fmt_double(d.length_s) << '\n'
     << "seed = " << d.seed << '\n';
  return os.str();
}

std::string ExperimentConfig::prepare_fingerprint() const {
  std::ostringstream os;
  os << dataset_fingerprint() << "\n[features]\nsequence_length = " << sequence_length << "\n\n[music]\n"
     << "half_window = " << music.half_window << '\n'
     << "denominator_floor = " << fmt_double(music.denominator_floor) << '\n';
  return os.str();
}

std::string ExperimentConfig::model_fingerprint() const {
  std::ostringstream os;
  const auto& t = training.train;
  os << prepare_fingerprint() << "\n[network]\n" << network.to_text() << "\n[training]\n"
     << "max_epochs = " << t.max_epochs << '\n'
     << "patience = " << t.patience << '\n'
     << "learning_rate = " << fmt_double(t.adam.learning_rate) << '\n'
     << "beta1 = " << fmt_double(t.adam.beta1) << '\n'
     << "beta2 = " << fmt_double(t.adam.beta2) << '\n'
     << "epsilon = " << fmt_double(t.adam.epsilon) << '\n'
     << "batch_size = " << t.batch_size << '\n'
     << "seed = " << t.seed << '\n'
     << "sps_loss_weight = " << fmt_double(t.loss_weights.sps) << '\n'
     << "doa_loss_weight = " << fmt_double(t.loss_weights.doa) << '\n'
     << "teacher_forcing = " << (t.teacher_forcing ? "true" : "false") << '\n'
     << "recalibrate_batch_norm = " << (t.recalibrate_batch_norm ? "true" : "false") << '\n'
     << "datasets = " << join(training.datasets) << '\n'
     << "validation_fraction = " << fmt_double(training.validation_fraction) << '\n';
  return os.str();
}

std::string ExperimentConfig::to_ini() const {
  std::ostringstream os;
  os << "[experiment]\nscale = " << to_string(scale) << "\nworkers = " << workers << "\n\n"
     << model_fingerprint() << "\n[pipeline]\nsplits = " << join(pipeline.splits) << "\n\n[paths]\n"
     << "data = " << paths.data.string() << '\n'
     << "work = " << paths.work.string() << '\n'
     << "output = " << paths.output.string() << '\n';
  return os.str();
}

ExperimentConfig parse_config(const std::string& text, const Overrides& overrides, const std::filesystem::path& base_dir) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream is(text);
  try {
    pt::ini_parser::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw std::invalid_argument(std::string("config: ") + e.message() + " at line " + std::to_string(e.line()));
  }

  Scale scale = Scale::kDesk;
  if (const auto s = tree.get_optional<std::string>("experiment.scale")) scale = parse_scale(trim(*s));
  if (overrides.scale) scale = *overrides.scale;
  ExperimentConfig c = default_config(scale);

  std::string network_text;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      throw std::invalid_argument("config: key '" + section + "' must belong to a section");
    }
    for (const auto& [key, node] : body) {
      const std::string value = trim(node.data());
      if (section == "network") {
        network_text += key + " = " + value + "\n";
        continue;
      }
      const std::string full = section + "." + key;
      const auto it = setters().find(full);
      if (it == setters().end()) throw std::invalid_argument("config: unknown key [" + section + "] " + key);
      it->second(c, value);
    }
    static const char* known[] = {"experiment", "dataset", "pipeline", "features", "music", "network", "training", "paths"};
    if (std::find(std::begin(known), std::end(known), section) == std::end(known)) {
      throw std::invalid_argument("config: unknown section [" + section + "]");
    }
  }
  if (!network_text.empty()) {
    const std::size_t length = c.network.sequence_length;
    c.network = nn::parse_network_config(c.network.to_text() + network_text);
    if (network_text.find("sequence_length") == std::string::npos) c.network.sequence_length = length;
  }
  if (overrides.seed) {
    c.dataset.seed = *overrides.seed;
    c.training.train.seed = *overrides.seed;
  }
  if (overrides.workers) c.workers = *overrides.workers;
  c.training.train.workers = c.workers;
  for (auto* p : {&c.paths.data, &c.paths.work, &c.paths.output}) {
    if (p->is_relative()) *p = (base_dir / *p).lexically_normal();
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::optional<std::filesystem::path>& path, const Overrides& overrides) {
  if (!path) return parse_config("", overrides, ".");
  std::ifstream is(*path);
  if (!is) throw MissingInputError("missing config file: " + path->string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str(), overrides, path->parent_path().empty() ? "." : path->parent_path());
}

}  // namespace doakit::cli
