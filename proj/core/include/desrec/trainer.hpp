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

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "desrec/batch.hpp"
#include "desrec/collectives.hpp"
#include "desrec/config.hpp"
#include "desrec/models.hpp"

namespace desrec {

struct MetricsSnapshot {
  std::size_t epoch = 0;
  std::uint64_t step = 0;  // training iterations so far
  double auc = 0.0;        // held-out; NaN when the test split has one class
  double logloss = 0.0;    // held-out
  double fwd_bytes = 0.0;  // cumulative forward ledger bytes per worker
  double bwd_bytes = 0.0;  // cumulative backward ledger bytes per worker
  double wall_ms = 0.0;    // epoch wall time, excluded from determinism checks
};

std::string metrics_to_tsv(std::span<const MetricsSnapshot> series);
std::string metrics_to_json(std::span<const MetricsSnapshot> series);

struct Dataset {
  std::vector<Sample> train;
  std::vector<Sample> test;
};

/// Synthetic data is split by position like Criteo files are.
Dataset load_dataset(const RunConfig& cfg);

struct EvalResult {
  double auc = 0.0;
  double logloss = 0.0;
};

/// Synchronous DES training over a simulated worker group. Every iteration
/// routes one global batch to the shards, runs forward, backward and the
/// shard-local optimizer step, then advances the barrier epoch.
class Trainer {
 public:
  Trainer(RunConfig cfg, Dataset data);

  MetricsSnapshot run_epoch();
  std::vector<MetricsSnapshot> run();
  EvalResult evaluate();

  const RunConfig& config() const { return cfg_; }
  DesModel& model() { return *model_; }
  WorkerGroup& group() { return *group_; }
  std::uint64_t step() const { return step_; }

 private:
  RunConfig cfg_;
  Dataset data_;
  std::unique_ptr<WorkerGroup> group_;
  std::unique_ptr<DesModel> model_;
  std::size_t epoch_ = 0;
  std::uint64_t step_ = 0;
};

struct TrainResult {
  std::vector<MetricsSnapshot> metrics;
  std::filesystem::path checkpoint_dir;  // empty when no output directory is set
};

/// Loads the data, trains for cfg.epochs and, when cfg.out_dir is set, writes
/// config.json, metrics.tsv, metrics.json, ledger.tsv and checkpoint/.
TrainResult train(const RunConfig& cfg);

}  // namespace desrec
