// SPDX-License-Identifier: Apache-2.0
#include "doakit/nn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "doakit/errors.hpp"
#include "doakit/metrics.hpp"
#include "doakit/rng.hpp"

namespace doakit::nn {

template <class T>
void Adam<T>::step(std::span<Param<T>* const> params) {
  if (m_.empty()) {
    m_.resize(params.size());
    v_.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i].assign(params[i]->size(), 0.0);
      v_[i].assign(params[i]->size(), 0.0);
    }
  }
  if (m_.size() != params.size()) throw std::invalid_argument("adam: parameter list changed between steps");
  ++t_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const double lr = config_.learning_rate;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Param<T>& p = *params[i];
    if (!p.trainable) continue;
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double g = p.grad[k];
      m[k] = b1 * m[k] + (1.0 - b1) * g;
      v[k] = b2 * v[k] + (1.0 - b2) * g * g;
      const double mhat = m[k] / c1;
      const double vhat = v[k] / c2;
      p.value[k] = static_cast<T>(p.value[k] - lr * mhat / (std::sqrt(vhat) + config_.epsilon));
    }
  }
}

template class Adam<float>;
template class Adam<double>;

void TrainConfig::validate() const {
  if (max_epochs == 0) throw std::invalid_argument("training: max_epochs must be positive");
  if (patience > max_epochs) throw std::invalid_argument("training: patience must not exceed max_epochs");
  if (batch_size == 0) throw std::invalid_argument("training: batch_size must be positive");
  if (!(adam.learning_rate > 0.0)) throw std::invalid_argument("training: learning rate must be positive");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    throw std::invalid_argument("training: Adam betas must lie in [0, 1)");
  }
  if (!(adam.epsilon > 0.0)) throw std::invalid_argument("training: Adam epsilon must be positive");
  if (!(loss_weights.sps >= 0.0) || !(loss_weights.doa >= 0.0)) {
    throw std::invalid_argument("training: loss weights must be nonnegative");
  }
}

void write_history_csv(std::ostream& os, std::span<const EpochRecord> history) {
  os << "epoch,mse,bce,total,doa_metric,best_flag\n";
  const auto old_precision = os.precision(10);
  for (const auto& r : history) {
    os << r.epoch << ',' << r.mse << ',' << r.bce << ',' << r.total << ',' << r.doa_metric << ',' << (r.best ? 1 : 0)
       << '\n';
  }
  os.precision(old_precision);
}

namespace {

template <class Get>
NetworkOutputs outputs_for(DoaNet<float>& net, std::size_t count, const Get& get, std::size_t batch_size) {
  NetworkOutputs out;
  const auto& cfg = net.config();
  out.sps.directions = cfg.sps_width;
  out.doa_probabilities.directions = cfg.doa_width;
  for (std::size_t begin = 0; begin < count; begin += batch_size) {
    const std::size_t end = std::min(count, begin + batch_size);
    Batch<float> batch;
    std::vector<std::size_t> valid;
    for (std::size_t i = begin; i < end; ++i) {
      const auto [tensor, frames] = get(i);
      if (frames > tensor->shape().time) throw std::invalid_argument("inference: valid frames exceed sequence length");
      batch.push_back(*tensor);
      valid.push_back(frames);
    }
    const auto result = net.forward(batch, Phase::kInfer);
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const auto& s = result.sps[b].values();
      const auto& d = result.doa[b].values();
      out.sps.values.insert(out.sps.values.end(), s.begin(), s.begin() + valid[b] * cfg.sps_width);
      out.doa_probabilities.values.insert(out.doa_probabilities.values.end(), d.begin(),
                                          d.begin() + valid[b] * cfg.doa_width);
      out.sps.frames += valid[b];
      out.doa_probabilities.frames += valid[b];
    }
  }
  return out;
}

bool all_finite(const Batch<float>& batch) {
  for (const auto& t : batch) {
    for (float v : t.values()) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

std::vector<std::vector<Direction>> indices_to_directions(const std::vector<std::vector<std::size_t>>& picks,
                                                          const DirectionGrid& grid) {
  std::vector<std::vector<Direction>> out(picks.size());
  for (std::size_t t = 0; t < picks.size(); ++t) {
    for (auto i : picks[t]) out[t].push_back(grid[i]);
  }
  return out;
}

}  // namespace

NetworkOutputs run_network(DoaNet<float>& net, std::span<const Tensor<float>> sequences,
                           std::span<const std::size_t> valid_frames, std::size_t batch_size) {
  if (sequences.size() != valid_frames.size()) throw std::invalid_argument("inference: one valid count per sequence required");
  if (batch_size == 0) throw std::invalid_argument("inference: batch size must be positive");
  return outputs_for(
      net, sequences.size(), [&](std::size_t i) { return std::pair{&sequences[i], valid_frames[i]}; }, batch_size);
}

std::vector<std::vector<std::size_t>> select_doas(const PseudoSpectrum& probabilities, InferenceMode mode,
                                                  std::optional<std::span<const std::size_t>> counts) {
  std::vector<std::vector<std::size_t>> out(probabilities.frames);
  if (mode == InferenceMode::kTopO) {
    if (!counts) throw std::invalid_argument("top-o inference requires per-frame source counts");
    if (counts->size() != probabilities.frames) {
      throw std::invalid_argument("top-o inference: expected " + std::to_string(probabilities.frames) +
                                  " frame counts, got " + std::to_string(counts->size()));
    }
  }
  std::vector<std::size_t> order(probabilities.directions);
  for (std::size_t t = 0; t < probabilities.frames; ++t) {
    const auto p = probabilities.frame(t);
    if (mode == InferenceMode::kThreshold) {
      for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] > kDetectionThreshold) out[t].push_back(i);
      }
      continue;
    }
    const std::size_t o = std::min((*counts)[t], p.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(o), order.end(),
                      [&](std::size_t a, std::size_t b) { return p[a] > p[b] || (p[a] == p[b] && a < b); });
    out[t].assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(o));
  }
  return out;
}

std::vector<std::vector<Direction>> target_directions(const Tensor<float>& doa_target, std::size_t valid_frames,
                                                      const DirectionGrid& doa_grid) {
  if (doa_target.shape().row() != doa_grid.size()) {
    throw std::invalid_argument("DOA target width " + std::to_string(doa_target.shape().row()) +
                                " does not match the grid size " + std::to_string(doa_grid.size()));
  }
  std::vector<std::vector<Direction>> out(valid_frames);
  for (std::size_t t = 0; t < valid_frames; ++t) {
    const auto row = doa_target.row(t);
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (row[i] > 0.5f) out[t].push_back(doa_grid[i]);
    }
  }
  return out;
}

double doa_metric(std::span<const std::vector<Direction>> estimated, std::span<const std::vector<Direction>> truth) {
  const auto err = doa_error(estimated, truth);
  const double recall = frame_recall(estimated, truth);
  return (err ? *err / 180.0 : 1.0) + (1.0 - recall / 100.0);
}

TrainResult train(const NetworkConfig& net_config, const TrainConfig& config,
                  std::span<const TrainingSequence> training, std::span<const TrainingSequence> validation,
                  const DirectionGrid& doa_grid, const EpochCallback& on_epoch) {
  config.validate();
  net_config.validate();
  if (training.empty()) throw std::invalid_argument("training: no training sequences");
  if (doa_grid.size() != net_config.doa_width) {
    throw std::invalid_argument("training: DOA grid has " + std::to_string(doa_grid.size()) + " nodes, network outputs " +
                                std::to_string(net_config.doa_width));
  }
  const auto held_out = validation.empty() ? training : validation;

  DoaNet<float> net(net_config, config.seed);
  net.set_workers(config.workers);
  auto params = net.parameters();
  Adam<float> adam(config.adam);
  Rng order_rng(config.seed ^ 0x5DEECE66DULL);

  std::vector<std::vector<Direction>> truth;
  for (const auto& s : held_out) {
    auto t = target_directions(s.doa_target, s.valid_frames, doa_grid);
    truth.insert(truth.end(), t.begin(), t.end());
  }

  TrainResult result;
  double best_metric = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> order(training.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    order_rng.shuffle(std::span(order));
    double mse_sum = 0.0, bce_sum = 0.0, total_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      Batch<float> x, sps_t, doa_t;
      std::vector<std::size_t> valid;
      for (std::size_t k = begin; k < end; ++k) {
        const auto& s = training[order[k]];
        x.push_back(s.features);
        sps_t.push_back(s.sps_target);
        doa_t.push_back(s.doa_target);
        valid.push_back(s.valid_frames);
      }
      const auto out = net.forward(x, Phase::kTrain, config.teacher_forcing ? &sps_t : nullptr);
      Batch<float> g_sps, g_doa;
      const LossValue loss = combined_loss(out.sps, sps_t, out.doa, doa_t, valid, config.loss_weights, &g_sps, &g_doa);
      if (!std::isfinite(loss.total) || !all_finite(out.sps) || !all_finite(out.doa)) {
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch));
      }
      net.zero_grad();
      net.backward(g_sps, g_doa);
      adam.step(params);
      mse_sum += loss.mse;
      bce_sum += loss.bce;
      total_sum += loss.total;
      ++batches;
    }

    if (config.recalibrate_batch_norm) {
      net.begin_calibration();
      for (std::size_t begin = 0; begin < training.size(); begin += config.batch_size) {
        Batch<float> x;
        for (std::size_t k = begin; k < std::min(training.size(), begin + config.batch_size); ++k) {
          x.push_back(training[k].features);
        }
        net.forward(x, Phase::kCalibrate);
      }
      net.end_calibration();
    }

    const auto outputs = outputs_for(
        net, held_out.size(), [&](std::size_t i) { return std::pair{&held_out[i].features, held_out[i].valid_frames}; },
        config.batch_size);
    const auto estimated =
        indices_to_directions(select_doas(outputs.doa_probabilities, InferenceMode::kThreshold), doa_grid);

    EpochRecord rec;
    rec.epoch = epoch;
    rec.mse = mse_sum / static_cast<double>(batches);
    rec.bce = bce_sum / static_cast<double>(batches);
    rec.total = total_sum / static_cast<double>(batches);
    rec.doa_metric = doa_metric(estimated, truth);
    if (rec.doa_metric < best_metric) {
      best_metric = rec.doa_metric;
      rec.best = true;
      result.best_epoch = epoch;
      result.best = net.export_parameters();
    }
    result.history.push_back(rec);
    if (on_epoch && !on_epoch(rec, outputs)) break;
    if (epoch - result.best_epoch >= config.patience) break;
  }
  result.last = net.export_parameters();
  return result;
}

}  // namespace doakit::nn
