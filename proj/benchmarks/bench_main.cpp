// SPDX-License-Identifier: Apache-2.0
/**
 * @file   bench_main.cpp
 * @brief  Microbenchmarks for the hot paths: IDM rollouts, noise
 *         generation, network forward/backward and batch gradients.
 */
#include <idmf/autodiff.hpp>
#include <idmf/follower_net.hpp>
#include <idmf/gps_noise.hpp>
#include <idmf/idm.hpp>
#include <idmf/scenario.hpp>
#include <idmf/trainer.hpp>

#include <benchmark/benchmark.h>

#include <vector>

namespace {

using namespace idmf;

const std::vector<SequenceWindow> &windows() {
  static const std::vector<SequenceWindow> w = [] {
    const SimDataset d = build_dataset(20, {}, idm_preset("sumo"), 7);
    return window_pairs(d.pairs, 80, 80);
  }();
  return w;
}

void BM_ClosedLoopRollout(benchmark::State &state) {
  const IdmParams p = idm_preset("sumo");
  const SequenceWindow &w = windows().front();
  for (auto _ : state)
    benchmark::DoNotOptimize(closed_loop_rollout(
      w.pair.leader, w.pair.follower.positions[0],
      w.follower_initial_velocity, p));
}
BENCHMARK(BM_ClosedLoopRollout);

void BM_OpenLoopPositions(benchmark::State &state) {
  const IdmParams p = idm_preset("sumo");
  const SequenceWindow &w = windows().front();
  for (auto _ : state)
    benchmark::DoNotOptimize(open_loop_positions(w, p));
}
BENCHMARK(BM_OpenLoopPositions);

void BM_GenerateNoise(benchmark::State &state) {
  const ArmaNoiseParams p = noise_preset("middle");
  const auto n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state)
    benchmark::DoNotOptimize(generate_noise(p, n, 7));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_GenerateNoise)->Arg(80)->Arg(1 << 16);

NetConfig bench_net(std::int64_t hidden) {
  NetConfig nc;
  nc.hidden = static_cast<std::size_t>(hidden);
  nc.horizon = 80;
  return nc;
}

void BM_Predict(benchmark::State &state) {
  const FollowerNet net = init_params(bench_net(state.range(0)), 7);
  const SequenceWindow &w = windows().front();
  for (auto _ : state)
    benchmark::DoNotOptimize(predict(net, w));
}
BENCHMARK(BM_Predict)->Arg(32)->Arg(128);

void BM_BatchGradient(benchmark::State &state) {
  const FollowerNet net = init_params(bench_net(state.range(0)), 7);
  const auto &all = windows();
  const std::size_t n = std::min<std::size_t>(16, all.size());
  const std::span<const SequenceWindow> batch(all.data(), n);
  std::vector<std::vector<double>> labels;
  for (const auto &w : batch)
    labels.push_back(w.pair.follower.positions);
  const ModelTargets targets = precompute_model_targets(
    batch, idm_preset("sumo"), ModelTargetMode::OpenLoop);
  for (auto _ : state)
    benchmark::DoNotOptimize(batch_gradient(net, batch, labels,
                                            targets.positions, targets.valid,
                                            0.7));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_BatchGradient)->Arg(32)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
