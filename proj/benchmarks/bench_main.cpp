// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include <vector>

#include "doakit/ambisonics.hpp"
#include "doakit/features.hpp"
#include "doakit/geometry.hpp"
#include "doakit/metrics.hpp"
#include "doakit/nn/doanet.hpp"
#include "doakit/nn/layers.hpp"
#include "doakit/nn/loss.hpp"
#include "doakit/rng.hpp"
#include "doakit/subspace.hpp"

namespace {

using namespace doakit;

nn::Tensor<float> random_tensor(nn::Shape s, Rng& rng) {
  nn::Tensor<float> t(s);
  for (auto& v : t.values()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  return t;
}

void BM_Conv2dForward(benchmark::State& state) {
  const auto bins = static_cast<std::size_t>(state.range(0));
  const auto cin = static_cast<std::size_t>(state.range(1));
  Rng rng(1);
  nn::Conv2d<float> conv("c", cin, 64);
  conv.initialize(rng);
  nn::Batch<float> x{random_tensor({100, bins, cin}, rng)};
  for (auto _ : state) benchmark::DoNotOptimize(conv.forward(x, nn::Phase::kInfer));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(100 * bins * 9 * cin * 64));
}
BENCHMARK(BM_Conv2dForward)->Args({1024, 8})->Args({128, 64})->Unit(benchmark::kMillisecond);

void BM_Conv2dTrainStep(benchmark::State& state) {
  const auto bins = static_cast<std::size_t>(state.range(0));
  const auto cin = static_cast<std::size_t>(state.range(1));
  Rng rng(2);
  nn::Conv2d<float> conv("c", cin, 64);
  conv.initialize(rng);
  nn::Batch<float> x{random_tensor({100, bins, cin}, rng)};
  nn::Batch<float> g{random_tensor({100, bins, 64}, rng)};
  for (auto _ : state) {
    benchmark::DoNotOptimize(conv.forward(x, nn::Phase::kTrain));
    benchmark::DoNotOptimize(conv.backward(g));
  }
}
BENCHMARK(BM_Conv2dTrainStep)->Args({1024, 8})->Args({128, 64})->Unit(benchmark::kMillisecond);

void BM_DoaNetTrainStep(benchmark::State& state) {
  Rng rng(3);
  nn::DoaNet<float> net(nn::NetworkConfig{}, 7);
  nn::Batch<float> x;
  for (int i = 0; i < state.range(0); ++i) x.push_back(random_tensor({100, 1024, 8}, rng));
  for (auto _ : state) {
    auto out = net.forward(x, nn::Phase::kTrain);
    nn::Batch<float> gs, gd;
    for (auto& t : out.sps) gs.emplace_back(t.shape(), 1e-3f);
    for (auto& t : out.doa) gd.emplace_back(t.shape(), 1e-3f);
    net.zero_grad();
    net.backward(gs, gd);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_DoaNetTrainStep)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_Stft30s(benchmark::State& state) {
  Rng rng(4);
  AmbisonicBuffer buf(30 * kSampleRate);
  for (std::size_t c = 0; c < kFoaChannels; ++c) {
    for (auto& v : buf.channel(c)) v = static_cast<float>(rng.gaussian());
  }
  for (auto _ : state) benchmark::DoNotOptimize(stft(buf));
}
BENCHMARK(BM_Stft30s)->Unit(benchmark::kMillisecond);

void BM_MusicFrames(benchmark::State& state) {
  Rng rng(5);
  AmbisonicBuffer buf(2 * kSampleRate);
  for (std::size_t c = 0; c < kFoaChannels; ++c) {
    for (auto& v : buf.channel(c)) v = static_cast<float>(rng.gaussian());
  }
  const auto spec = stft(buf);
  MusicEstimator music(build_sps_grid());
  std::vector<std::size_t> counts(spec.frames(), 1);
  for (auto _ : state) benchmark::DoNotOptimize(music.run(spec, counts));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(spec.frames()));
}
BENCHMARK(BM_MusicFrames)->Unit(benchmark::kMillisecond);

void BM_Hungarian6(benchmark::State& state) {
  Rng rng(6);
  std::vector<double> cost(36);
  for (auto& c : cost) c = rng.uniform(0.0, 180.0);
  for (auto _ : state) benchmark::DoNotOptimize(hungarian(cost, 6, 6));
}
BENCHMARK(BM_Hungarian6);

}  // namespace
BENCHMARK_MAIN();
