// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "doakit/nn/gru.hpp"
#include "doakit/nn/layers.hpp"
#include "doakit/nn/tensor.hpp"

namespace doakit::nn {

/// Two-stage architecture description. Stage 1 maps the L x bins x 2C
/// spectrogram to an L x sps_width pseudo-spectrum; stage 2 maps that
/// pseudo-spectrum (as an L x sps_width x 1 image) to per-node DOA
/// probabilities.
struct NetworkConfig {
  std::size_t sequence_length = 100;
  std::size_t input_bins = 1024;
  std::size_t input_channels = 8;

  std::vector<std::size_t> stage1_filters{64, 64, 64, 64};
  std::vector<std::size_t> stage1_pools{8, 8, 4, 2};
  std::vector<std::size_t> stage1_gru{64, 64};
  std::size_t sps_width = 614;

  std::vector<std::size_t> stage2_filters{16, 16};
  std::vector<std::size_t> stage2_pools{5, 5};
  std::size_t stage2_padded_width = 625;
  std::size_t stage2_fc = 64;
  std::vector<std::size_t> stage2_gru{64};
  std::size_t doa_width = 432;

  double dropout = 0.25;
  /// Weight of the old value in the batch-norm running statistics.
  double batch_norm_momentum = 0.99;

  /// Throws std::invalid_argument on any inconsistency.
  void validate() const;

  /// Frequency bins left after the stage-1 pools (2 by default).
  std::size_t stage1_final_bins() const;
  std::size_t stage2_final_bins() const;

  /// Trainable weights and biases, batch-norm scale and shift included,
  /// running statistics excluded.
  std::size_t parameter_count() const;

  /// "key = value" lines; parse_network_config accepts the same keys.
  std::string to_text() const;

  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

NetworkConfig parse_network_config(const std::string& text);

struct ParameterBlock {
  std::string name;
  std::vector<std::size_t> dims;
  std::vector<float> values;
  friend bool operator==(const ParameterBlock&, const ParameterBlock&) = default;
};

/// Every weight and batch-norm statistic of a network, in layer order.
struct NetworkParameters {
  static constexpr std::uint32_t kVersion = 1;
  std::uint32_t version = kVersion;
  NetworkConfig config;
  std::vector<ParameterBlock> blocks;

  const ParameterBlock* find(const std::string& name) const;
  friend bool operator==(const NetworkParameters&, const NetworkParameters&) = default;
};

template <class T>
class DoaNet {
 public:
  struct Output {
    Batch<T> sps;  // each (L, 1, sps_width)
    Batch<T> doa;  // each (L, 1, doa_width), probabilities
  };

  /// Builds the layers and draws initial weights from `seed`.
  DoaNet(NetworkConfig config, std::uint64_t seed);

  const NetworkConfig& config() const { return config_; }

  /// `teacher_sps`, when given, replaces the stage-1 output as stage-2
  /// input, cutting the gradient path between the stages.
  Output forward(const Batch<T>& input, Phase phase, const Batch<T>* teacher_sps = nullptr);

  /// Backpropagates loss gradients w.r.t. both outputs of the last train-
  /// phase forward, accumulating into every parameter's grad.
  void backward(const Batch<T>& grad_sps, const Batch<T>& grad_doa);

  std::vector<Param<T>*> parameters();
  void zero_grad();
  std::size_t trainable_count();

  NetworkParameters export_parameters();
  /// Throws std::invalid_argument when names, shapes or config differ.
  void import_parameters(const NetworkParameters& params);

  /// Calibrate-phase forwards between these calls re-estimate every
  /// batch-norm running statistic under the current weights.
  void begin_calibration();
  void end_calibration();

  void set_workers(std::size_t workers);
  std::vector<std::string> describe() const;

  /// The final sigmoid layer, exposed for tests.
  Dense<T>& doa_head() { return *doa_head_; }

 private:
  NetworkConfig config_;
  std::vector<std::unique_ptr<Layer<T>>> stage1_, stage2_;
  std::vector<Conv2d<T>*> convs_;
  std::vector<BatchNorm<T>*> norms_;
  Dense<T>* doa_head_ = nullptr;
  bool teacher_forced_ = false;
};

}  // namespace doakit::nn
