// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "doakit/geometry.hpp"
#include "doakit/nn/doanet.hpp"
#include "doakit/nn/loss.hpp"
#include "doakit/subspace.hpp"

namespace doakit::nn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <class T>
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}
  /// One bias-corrected update of every trainable parameter from its grad.
  void step(std::span<Param<T>* const> params);
  std::size_t steps() const { return t_; }

 private:
  AdamConfig config_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

/// One network input sequence with its targets; all three tensors have the
/// same time length, of which the first valid_frames are real.
struct TrainingSequence {
  Tensor<float> features;    // (L, bins, 2C)
  Tensor<float> sps_target;  // (L, 1, sps_width), normalized per recording
  Tensor<float> doa_target;  // (L, 1, doa_width), 0/1
  std::size_t valid_frames = 0;
};

struct TrainConfig {
  std::size_t max_epochs = 1000;
  std::size_t patience = 100;
  AdamConfig adam;
  std::size_t batch_size = 8;
  std::uint64_t seed = 1;
  LossWeights loss_weights;
  bool teacher_forcing = false;
  /// Before each evaluation, replace the batch-norm running statistics by
  /// a dropout-free pass over the training set. With few updates per epoch
  /// the moving averages lag the weights badly.
  bool recalibrate_batch_norm = true;
  std::size_t workers = 1;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double mse = 0.0;
  double bce = 0.0;
  double total = 0.0;
  double doa_metric = 0.0;
  bool best = false;
};

/// epoch,mse,bce,total,doa_metric,best_flag
void write_history_csv(std::ostream& os, std::span<const EpochRecord> history);

struct TrainResult {
  NetworkParameters best;
  NetworkParameters last;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
};

/// Network outputs over the valid frames of consecutive sequences.
struct NetworkOutputs {
  PseudoSpectrum sps;
  PseudoSpectrum doa_probabilities;
};

/// Called after every epoch with its record and the infer-phase outputs on
/// the evaluation sequences; returning false ends training after that epoch.
using EpochCallback = std::function<bool(const EpochRecord&, const NetworkOutputs&)>;

/// Mini-batch Adam on the weighted MSE + BCE loss. After every epoch the
/// DOA metric is evaluated on `validation` (or the training set when empty)
/// and the best parameters are retained; training stops once the metric has
/// not improved for `patience` epochs, after max_epochs, or when the
/// callback asks to. Throws NumericError on a non-finite loss.
TrainResult train(const NetworkConfig& net_config, const TrainConfig& config,
                  std::span<const TrainingSequence> training, std::span<const TrainingSequence> validation,
                  const DirectionGrid& doa_grid, const EpochCallback& on_epoch = {});

enum class InferenceMode { kThreshold, kTopO };

inline constexpr double kDetectionThreshold = 0.5;

/// Infer-phase forward over `sequences` in batches; padding frames are
/// dropped.
NetworkOutputs run_network(DoaNet<float>& net, std::span<const Tensor<float>> sequences,
                           std::span<const std::size_t> valid_frames, std::size_t batch_size = 8);

/// Threshold mode keeps nodes with probability > 0.5; top-O mode keeps the
/// counts[t] most probable nodes (ties: lower index). Top-O throws
/// std::invalid_argument without one count per frame.
std::vector<std::vector<std::size_t>> select_doas(const PseudoSpectrum& probabilities, InferenceMode mode,
                                                  std::optional<std::span<const std::size_t>> counts = {});

/// Directions of the nodes set to 1 in each valid frame of a DOA target.
std::vector<std::vector<Direction>> target_directions(const Tensor<float>& doa_target, std::size_t valid_frames,
                                                      const DirectionGrid& doa_grid);

/// Early-stopping score, lower is better: DOA error / 180 (1 when nothing is
/// estimated) plus the fraction of frames with a wrong DOA count.
double doa_metric(std::span<const std::vector<Direction>> estimated, std::span<const std::vector<Direction>> truth);

}  // namespace doakit::nn
