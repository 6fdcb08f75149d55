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
#include <vector>

#include "desrec/batch.hpp"
#include "desrec/cost_model.hpp"

namespace desrec {

struct BenchCommCell {
  std::size_t batch = 0;
  double uniq = 0.0;  // unique features per batch
};

struct BenchCommOptions {
  std::vector<TrafficModel> models = {TrafficModel::kLr, TrafficModel::kFm, TrafficModel::kDnn};
  // Batch sizes and unique-feature counts of the 4-node communication table.
  std::vector<BenchCommCell> cells = {
      {512, 147664}, {1024, 257757}, {2048, 448814}, {4096, 789511}, {8192, 1389353}};
  std::size_t n_workers = 4;
  std::size_t embed_dim = 8;
  std::size_t fc_width = 256;
  std::size_t field_count = 600;
  bool measure = true;  // run one DES iteration per cell; false = closed forms only
};

/// Cost inputs of one cell.
CostInputs bench_inputs(const BenchCommOptions& opts, const BenchCommCell& cell);

/// A batch of B samples holding exactly `uniq` distinct features spread
/// round-robin over `field_count` fields.
SparseBatch bench_batch(std::size_t batch, std::size_t uniq, std::size_t field_count);

/// One DES training iteration of the model standing in for `model`; returns
/// the forward ledger bytes per worker of its aggregations.
double measure_forward_bytes(TrafficModel model, const BenchCommOptions& opts, const BenchCommCell& cell);

CommReport bench_comm(const BenchCommOptions& opts);

}  // namespace desrec
