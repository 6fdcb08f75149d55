/*
 * Copyright (c) 2026, The desrec Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <benchmark/benchmark.h>

#include <vector>

#include "desrec/collectives.hpp"
#include "desrec/models.hpp"
#include "desrec/optimizers.hpp"
#include "desrec/sparse_store.hpp"
#include "desrec/synthetic.hpp"

using namespace desrec;

namespace {

void BM_AllReduce(benchmark::State& state) {
  const auto n = static_cast<int>(state.range(0));
  const auto len = static_cast<std::size_t>(state.range(1));
  WorkerGroup group(n);
  std::vector<DenseVector> locals(static_cast<std::size_t>(n), DenseVector(len, 0.25));
  for (auto _ : state) benchmark::DoNotOptimize(group.all_reduce_sum(locals, "bench"));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * n * len * sizeof(double)));
}
BENCHMARK(BM_AllReduce)->Args({4, 256})->Args({4, 65536})->Args({8, 65536});

void BM_ShardLookup(benchmark::State& state) {
  SparseShard shard(0, 1, 8, 1, Initializer::uniform(-0.01, 0.01, 1));
  std::vector<FeatureKey> keys;
  for (std::uint64_t i = 0; i < static_cast<std::uint64_t>(state.range(0)); ++i) keys.push_back({0, i * 7919});
  shard.lookup(keys);
  for (auto _ : state) benchmark::DoNotOptimize(shard.lookup(keys));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * keys.size()));
}
BENCHMARK(BM_ShardLookup)->Arg(1024)->Arg(65536);

void BM_DesForward(benchmark::State& state) {
  ModelConfig cfg;
  cfg.kind = static_cast<ModelKind>(state.range(0));
  cfg.field_count = 10;
  cfg.hidden = {32, 16};
  WorkerGroup group(4);
  DesModel model(cfg, group);
  SyntheticSpec spec;
  SparseBatch batch;
  batch.samples = gen_synthetic(spec, 256, 3);
  const auto routed = route(batch, 4);
  for (auto _ : state) benchmark::DoNotOptimize(model.forward(routed, ForwardMode::kEval));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * batch.size()));
}
BENCHMARK(BM_DesForward)
    ->Arg(static_cast<int>(ModelKind::kLr))
    ->Arg(static_cast<int>(ModelKind::kFm))
    ->Arg(static_cast<int>(ModelKind::kDeepFm))
    ->Arg(static_cast<int>(ModelKind::kDcn));

void BM_OptimizerStep(benchmark::State& state) {
  const OptimizerConfig cfg = state.range(0) == 0   ? OptimizerConfig::ftrl()
                              : state.range(0) == 1 ? OptimizerConfig::adagrad()
                                                    : OptimizerConfig::adam();
  const std::size_t dim = 4096;
  std::vector<float> w(dim, 0.1f), slots(cfg.n_slots() * dim, 0.0f);
  std::vector<double> g(dim, 0.01);
  for (auto _ : state) {
    optimizer_step(cfg, w, slots, g);
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * dim));
}
BENCHMARK(BM_OptimizerStep)->Arg(0)->Arg(1)->Arg(2);

}  // namespace
BENCHMARK_MAIN();
