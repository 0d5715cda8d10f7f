// SPDX-License-Identifier: Apache-2.0
#include "doakit/nn/doanet.hpp"

#include <charconv>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace doakit::nn {

namespace {

std::size_t product(const std::vector<std::size_t>& v) {
  return std::accumulate(v.begin(), v.end(), std::size_t{1}, std::multiplies<>());
}

std::string join(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(v[i]);
  }
  return s;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::size_t parse_size(const std::string& key, const std::string& text) {
  std::size_t v = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw std::invalid_argument("network config: bad integer for " + key + ": '" + text + "'");
  return v;
}

double parse_real(const std::string& key, const std::string& text) {
  double v = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (text.empty() || ec != std::errc() || ptr != end) {
    throw std::invalid_argument("network config: bad number for " + key + ": '" + text + "'");
  }
  return v;
}

std::vector<std::size_t> parse_list(const std::string& key, const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_size(key, trim(item)));
  return out;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("network config: " + what);
}

}  // namespace

std::size_t NetworkConfig::stage1_final_bins() const {
  const std::size_t p = product(stage1_pools);
  return p == 0 ? 0 : input_bins / p;
}

std::size_t NetworkConfig::stage2_final_bins() const {
  const std::size_t p = product(stage2_pools);
  return p == 0 ? 0 : stage2_padded_width / p;
}

void NetworkConfig::validate() const {
  require(sequence_length > 0, "sequence_length must be positive");
  require(input_bins > 0 && input_channels > 0, "input dimensions must be positive");
  require(!stage1_filters.empty(), "stage 1 needs at least one conv layer");
  require(stage1_filters.size() == stage1_pools.size(), "stage1_filters and stage1_pools differ in length");
  require(!stage2_filters.empty(), "stage 2 needs at least one conv layer");
  require(stage2_filters.size() == stage2_pools.size(), "stage2_filters and stage2_pools differ in length");
  for (auto v : stage1_filters) require(v > 0, "filter counts must be positive");
  for (auto v : stage2_filters) require(v > 0, "filter counts must be positive");
  for (auto v : stage1_pools) require(v > 0, "pool sizes must be positive");
  for (auto v : stage2_pools) require(v > 0, "pool sizes must be positive");
  require(!stage1_gru.empty() && !stage2_gru.empty(), "each stage needs at least one GRU layer");
  for (auto v : stage1_gru) require(v > 0, "GRU sizes must be positive");
  for (auto v : stage2_gru) require(v > 0, "GRU sizes must be positive");
  const std::size_t p1 = product(stage1_pools);
  require(input_bins % p1 == 0 && p1 * stage1_final_bins() == input_bins,
          "product of stage-1 pools (" + std::to_string(p1) + ") must divide the " + std::to_string(input_bins) +
              " input bins");
  require(sps_width > 0 && doa_width > 0, "output widths must be positive");
  require(stage2_padded_width >= sps_width, "stage2_padded_width must be at least sps_width");
  const std::size_t p2 = product(stage2_pools);
  require(stage2_padded_width % p2 == 0,
          "product of stage-2 pools (" + std::to_string(p2) + ") must divide stage2_padded_width");
  require(stage2_fc > 0, "stage2_fc must be positive");
  require(dropout >= 0.0 && dropout < 1.0, "dropout must lie in [0, 1)");
  require(batch_norm_momentum >= 0.0 && batch_norm_momentum < 1.0, "batch_norm_momentum must lie in [0, 1)");
}

std::size_t NetworkConfig::parameter_count() const {
  std::size_t n = 0;
  std::size_t ch = input_channels;
  for (auto f : stage1_filters) {
    n += Conv2d<float>::parameter_count(ch, f) + BatchNorm<float>::parameter_count(f);
    ch = f;
  }
  std::size_t width = stage1_final_bins() * ch;
  for (auto h : stage1_gru) {
    n += BiGru<float>::parameter_count(width, h);
    width = 2 * h;
  }
  n += Dense<float>::parameter_count(width, sps_width);
  ch = 1;
  for (auto f : stage2_filters) {
    n += Conv2d<float>::parameter_count(ch, f) + BatchNorm<float>::parameter_count(f);
    ch = f;
  }
  width = stage2_final_bins() * ch;
  n += Dense<float>::parameter_count(width, stage2_fc);
  width = stage2_fc;
  for (auto h : stage2_gru) {
    n += BiGru<float>::parameter_count(width, h);
    width = 2 * h;
  }
  n += Dense<float>::parameter_count(width, doa_width);
  return n;
}

std::string NetworkConfig::to_text() const {
  std::ostringstream os;
  char dropout_text[40], momentum_text[40];
  std::snprintf(dropout_text, sizeof dropout_text, "%.17g", dropout);
  std::snprintf(momentum_text, sizeof momentum_text, "%.17g", batch_norm_momentum);
  os << "sequence_length = " << sequence_length << '\n'
     << "input_bins = " << input_bins << '\n'
     << "input_channels = " << input_channels << '\n'
     << "stage1_filters = " << join(stage1_filters) << '\n'
     << "stage1_pools = " << join(stage1_pools) << '\n'
     << "stage1_gru = " << join(stage1_gru) << '\n'
     << "sps_width = " << sps_width << '\n'
     << "stage2_filters = " << join(stage2_filters) << '\n'
     << "stage2_pools = " << join(stage2_pools) << '\n'
     << "stage2_padded_width = " << stage2_padded_width << '\n'
     << "stage2_fc = " << stage2_fc << '\n'
     << "stage2_gru = " << join(stage2_gru) << '\n'
     << "doa_width = " << doa_width << '\n'
     << "dropout = " << dropout_text << '\n'
     << "batch_norm_momentum = " << momentum_text << '\n';
  return os.str();
}

NetworkConfig parse_network_config(const std::string& text) {
  NetworkConfig c;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("network config: expected key = value, got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "sequence_length") c.sequence_length = parse_size(key, value);
    else if (key == "input_bins") c.input_bins = parse_size(key, value);
    else if (key == "input_channels") c.input_channels = parse_size(key, value);
    else if (key == "stage1_filters") c.stage1_filters = parse_list(key, value);
    else if (key == "stage1_pools") c.stage1_pools = parse_list(key, value);
    else if (key == "stage1_gru") c.stage1_gru = parse_list(key, value);
    else if (key == "sps_width") c.sps_width = parse_size(key, value);
    else if (key == "stage2_filters") c.stage2_filters = parse_list(key, value);
    else if (key == "stage2_pools") c.stage2_pools = parse_list(key, value);
    else if (key == "stage2_padded_width") c.stage2_padded_width = parse_size(key, value);
    else if (key == "stage2_fc") c.stage2_fc = parse_size(key, value);
    else if (key == "stage2_gru") c.stage2_gru = parse_list(key, value);
    else if (key == "doa_width") c.doa_width = parse_size(key, value);
    else if (key == "dropout") c.dropout = parse_real(key, value);
    else if (key == "batch_norm_momentum") c.batch_norm_momentum = parse_real(key, value);
    else throw std::invalid_argument("network config: unknown key '" + key + "'");
  }
  c.validate();
  return c;
}

const ParameterBlock* NetworkParameters::find(const std::string& name) const {
  for (const auto& b : blocks) {
    if (b.name == name) return &b;
  }
  return nullptr;
}

template <class T>
DoaNet<T>::DoaNet(NetworkConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  Rng rng(seed);
  auto add_dropout = [&](std::vector<std::unique_ptr<Layer<T>>>& stage) {
    if (config_.dropout > 0.0) stage.push_back(std::make_unique<Dropout<T>>(config_.dropout, rng.fork()));
  };
  auto add_conv_block = [&](std::vector<std::unique_ptr<Layer<T>>>& stage, const std::string& name, std::size_t in,
                            std::size_t out, std::size_t pool) {
    auto conv = std::make_unique<Conv2d<T>>(name + "/conv", in, out, Activation::kRelu);
    conv->initialize(rng);
    convs_.push_back(conv.get());
    stage.push_back(std::move(conv));
    auto bn = std::make_unique<BatchNorm<T>>(name + "/batch_norm", out, config_.batch_norm_momentum);
    norms_.push_back(bn.get());
    stage.push_back(std::move(bn));
    stage.push_back(std::make_unique<MaxPoolFreq<T>>(pool));
    add_dropout(stage);
  };

  std::size_t ch = config_.input_channels;
  for (std::size_t i = 0; i < config_.stage1_filters.size(); ++i) {
    add_conv_block(stage1_, "sps/cnn" + std::to_string(i + 1), ch, config_.stage1_filters[i], config_.stage1_pools[i]);
    ch = config_.stage1_filters[i];
  }
  convs_.front()->set_input_gradient(false);
  std::size_t width = config_.stage1_final_bins() * ch;
  stage1_.push_back(std::make_unique<Reshape<T>>(1, width));
  for (std::size_t i = 0; i < config_.stage1_gru.size(); ++i) {
    auto gru = std::make_unique<BiGru<T>>("sps/bigru" + std::to_string(i + 1), width, config_.stage1_gru[i]);
    gru->initialize(rng);
    stage1_.push_back(std::move(gru));
    add_dropout(stage1_);
    width = 2 * config_.stage1_gru[i];
  }
  {
    auto fc = std::make_unique<Dense<T>>("sps/output", width, config_.sps_width, Activation::kLinear);
    fc->initialize(rng);
    stage1_.push_back(std::move(fc));
  }

  stage2_.push_back(std::make_unique<Reshape<T>>(config_.sps_width, 1));
  stage2_.push_back(std::make_unique<EdgePadFreq<T>>(config_.stage2_padded_width));
  ch = 1;
  for (std::size_t i = 0; i < config_.stage2_filters.size(); ++i) {
    add_conv_block(stage2_, "doa/cnn" + std::to_string(i + 1), ch, config_.stage2_filters[i], config_.stage2_pools[i]);
    ch = config_.stage2_filters[i];
  }
  width = config_.stage2_final_bins() * ch;
  stage2_.push_back(std::make_unique<Reshape<T>>(1, width));
  {
    auto fc = std::make_unique<Dense<T>>("doa/reducer", width, config_.stage2_fc, Activation::kLinear);
    fc->initialize(rng);
    stage2_.push_back(std::move(fc));
    add_dropout(stage2_);
  }
  width = config_.stage2_fc;
  for (std::size_t i = 0; i < config_.stage2_gru.size(); ++i) {
    auto gru = std::make_unique<BiGru<T>>("doa/bigru" + std::to_string(i + 1), width, config_.stage2_gru[i]);
    gru->initialize(rng);
    stage2_.push_back(std::move(gru));
    add_dropout(stage2_);
    width = 2 * config_.stage2_gru[i];
  }
  auto head = std::make_unique<Dense<T>>("doa/output", width, config_.doa_width, Activation::kSigmoid);
  head->initialize(rng);
  doa_head_ = head.get();
  stage2_.push_back(std::move(head));
}

template <class T>
typename DoaNet<T>::Output DoaNet<T>::forward(const Batch<T>& input, Phase phase, const Batch<T>* teacher_sps) {
  for (const auto& x : input) {
    const Shape s = x.shape();
    if (s.freq != config_.input_bins || s.chan != config_.input_channels) {
      throw std::invalid_argument("doanet: input " + to_string(s) + " does not match the network (" +
                                  std::to_string(config_.input_bins) + " bins x " +
                                  std::to_string(config_.input_channels) + " channels)");
    }
  }
  Output out;
  Batch<T> h = input;
  for (auto& layer : stage1_) h = layer->forward(h, phase);
  out.sps = h;
  teacher_forced_ = teacher_sps != nullptr;
  if (teacher_sps) {
    if (teacher_sps->size() != input.size()) throw std::invalid_argument("doanet: teacher batch size mismatch");
    h = *teacher_sps;
  }
  for (auto& layer : stage2_) h = layer->forward(h, phase);
  out.doa = std::move(h);
  return out;
}

template <class T>
void DoaNet<T>::begin_calibration() {
  for (auto* bn : norms_) bn->begin_calibration();
}

template <class T>
void DoaNet<T>::end_calibration() {
  for (auto* bn : norms_) bn->end_calibration();
}

template <class T>
void DoaNet<T>::backward(const Batch<T>& grad_sps, const Batch<T>& grad_doa) {
  Batch<T> g = grad_doa;
  for (auto it = stage2_.rbegin(); it != stage2_.rend(); ++it) g = (*it)->backward(g);
  Batch<T> gs = grad_sps;
  if (!teacher_forced_) {
    if (g.size() != gs.size()) throw std::invalid_argument("doanet: gradient batch size mismatch");
    for (std::size_t i = 0; i < gs.size(); ++i) {
      if (g[i].shape() != gs[i].shape()) throw std::invalid_argument("doanet: SPS gradient shape mismatch");
      for (std::size_t k = 0; k < gs[i].size(); ++k) gs[i].values()[k] += g[i].values()[k];
    }
  }
  for (auto it = stage1_.rbegin(); it != stage1_.rend(); ++it) gs = (*it)->backward(gs);
}

template <class T>
std::vector<Param<T>*> DoaNet<T>::parameters() {
  std::vector<Param<T>*> out;
  for (auto& l : stage1_) l->collect(out);
  for (auto& l : stage2_) l->collect(out);
  return out;
}

template <class T>
void DoaNet<T>::zero_grad() {
  for (auto* p : parameters()) p->zero_grad();
}

template <class T>
std::size_t DoaNet<T>::trainable_count() {
  std::size_t n = 0;
  for (auto* p : parameters()) {
    if (p->trainable) n += p->size();
  }
  return n;
}

template <class T>
NetworkParameters DoaNet<T>::export_parameters() {
  NetworkParameters out;
  out.config = config_;
  for (auto* p : parameters()) {
    ParameterBlock b;
    b.name = p->name;
    b.dims = p->dims;
    b.values.assign(p->value.begin(), p->value.end());
    out.blocks.push_back(std::move(b));
  }
  return out;
}

template <class T>
void DoaNet<T>::import_parameters(const NetworkParameters& params) {
  if (params.version != NetworkParameters::kVersion) {
    throw std::invalid_argument("doanet: unsupported parameter version " + std::to_string(params.version));
  }
  if (!(params.config == config_)) throw std::invalid_argument("doanet: parameter file was trained with a different network config");
  auto mine = parameters();
  if (mine.size() != params.blocks.size()) {
    throw std::invalid_argument("doanet: expected " + std::to_string(mine.size()) + " parameter blocks, found " +
                                std::to_string(params.blocks.size()));
  }
  for (std::size_t i = 0; i < mine.size(); ++i) {
    const auto& b = params.blocks[i];
    if (b.name != mine[i]->name || b.dims != mine[i]->dims || b.values.size() != mine[i]->size()) {
      throw std::invalid_argument("doanet: parameter block '" + b.name + "' does not match '" + mine[i]->name + "'");
    }
  }
  for (std::size_t i = 0; i < mine.size(); ++i) {
    const auto& b = params.blocks[i];
    std::copy(b.values.begin(), b.values.end(), mine[i]->value.begin());
  }
  for (auto* bn : norms_) bn->mark_running_initialized();
}

template <class T>
void DoaNet<T>::set_workers(std::size_t workers) {
  for (auto* c : convs_) c->set_workers(workers);
}

template <class T>
std::vector<std::string> DoaNet<T>::describe() const {
  std::vector<std::string> out;
  for (const auto& l : stage1_) out.push_back("stage1 " + l->describe());
  for (const auto& l : stage2_) out.push_back("stage2 " + l->describe());
  return out;
}

template class DoaNet<float>;
template class DoaNet<double>;

}  // namespace doakit::nn
