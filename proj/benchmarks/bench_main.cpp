// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.

#include <benchmark/benchmark.h>

#include <cmath>

#include "seqtrain/augment.hpp"
#include "seqtrain/ctc.hpp"
#include "seqtrain/features.hpp"
#include "seqtrain/network.hpp"
#include "seqtrain/rng.hpp"

using namespace seqtrain;

namespace {

Eigen::MatrixXd random_features(int t, int d, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd x(t, d);
  for (int i = 0; i < t; ++i)
    for (int j = 0; j < d; ++j) x(i, j) = rng.uniform(-1.0, 1.0);
  return x;
}

Network bench_network(int layers, int cells, int dim, int k) {
  NetworkArch arch;
  arch.num_layers = layers;
  arch.cells_per_direction = cells;
  arch.feature_dim = dim;
  arch.alphabet_size = k;
  return init_network(arch, 1);
}

void BM_LogMel(benchmark::State& state) {
  Waveform w;
  w.sample_rate = 16000.0;
  Rng rng(2);
  for (int i = 0; i < 16000; ++i) w.samples.push_back(rng.uniform(-0.5, 0.5));
  FilterbankConfig cfg;
  for (auto _ : state)
    benchmark::DoNotOptimize(compute_logmel(w, cfg));
}
BENCHMARK(BM_LogMel)->Unit(benchmark::kMillisecond);

void BM_Deltas(benchmark::State& state) {
  FeatureMatrix fm;
  fm.data = random_features(500, 40, 3);
  for (auto _ : state) benchmark::DoNotOptimize(append_deltas(fm));
}
BENCHMARK(BM_Deltas)->Unit(benchmark::kMicrosecond);

void BM_NetworkForward(benchmark::State& state) {
  const int cells = static_cast<int>(state.range(0));
  Network net = bench_network(2, cells, 120, 5);
  Eigen::MatrixXd feats = random_features(100, 120, 4);
  const MaskSet none;
  for (auto _ : state)
    benchmark::DoNotOptimize(network_forward_with_masks(feats, net, none));
}
BENCHMARK(BM_NetworkForward)->Arg(32)->Arg(64)->Arg(128)
    ->Unit(benchmark::kMillisecond);

void BM_NetworkBackward(benchmark::State& state) {
  const int cells = static_cast<int>(state.range(0));
  Network net = bench_network(2, cells, 120, 5);
  Eigen::MatrixXd feats = random_features(100, 120, 5);
  ForwardCache cache;
  network_forward_with_masks(feats, net, MaskSet{}, &cache);
  const CtcResult res = ctc_loss(cache.posteriors, {0, 1, 2, 3});
  for (auto _ : state)
    benchmark::DoNotOptimize(network_backward(net, cache, res.grad_logits));
}
BENCHMARK(BM_NetworkBackward)->Arg(32)->Arg(64)->Arg(128)
    ->Unit(benchmark::kMillisecond);

void BM_CtcLoss(benchmark::State& state) {
  const int t_len = static_cast<int>(state.range(0));
  Rng rng(6);
  Eigen::MatrixXd p(t_len, 6);
  for (int t = 0; t < t_len; ++t) {
    for (int j = 0; j < 6; ++j) p(t, j) = 0.05 + rng.uniform();
    p.row(t) /= p.row(t).sum();
  }
  LabelSequence labels;
  for (int i = 0; i < t_len / 10; ++i)
    labels.push_back(static_cast<int>(rng.below(5)));
  for (auto _ : state) benchmark::DoNotOptimize(ctc_loss(p, labels));
}
BENCHMARK(BM_CtcLoss)->Arg(100)->Arg(400)->Unit(benchmark::kMicrosecond);

void BM_SampleMasks(benchmark::State& state) {
  DropoutStage stage;
  stage.entries.push_back(
      {DropoutLocation::ForwardConnection, MaskGranularity::PerStep, 0.2});
  Rng rng(7);
  const std::vector<int> cells = {320, 320, 320, 320};
  for (auto _ : state)
    benchmark::DoNotOptimize(masks_for_utterance(stage, 400, cells, rng));
}
BENCHMARK(BM_SampleMasks)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
