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
#include <string>
#include <string_view>
#include <vector>

#include "desrec/collectives.hpp"

namespace desrec {

/// Weights-rich layer whose traffic is being modelled.
enum class TrafficModel { kLr, kFm, kDnn };

std::string_view to_string(TrafficModel model);
TrafficModel traffic_model_from_string(std::string_view name);

struct CostInputs {
  std::size_t n_workers = 4;      // N
  std::size_t batch = 512;        // B
  double uniq = 0.0;              // unique features in one batch
  double key_bytes = 8.0;         // S_k
  double value_bytes = 4.0;
  std::size_t embed_dim = 8;      // d
  std::size_t fc_width = 256;     // h
  std::size_t field_count = 600;  // F; the first FC has F * d input rows

  void validate() const;

  double feature_bytes() const { return key_bytes * uniq; }                  // S_f
  double weight_bytes() const { return value_bytes * uniq; }                 // S_w
  double latent_bytes() const { return value_bytes * static_cast<double>(embed_dim) * uniq; }  // S_V
  double fc_bytes() const;                                                   // S_W
};

/// Bytes of the weights a mesh worker exchanges for one batch.
double mesh_weight_bytes(TrafficModel model, const CostInputs& c);

/// Sizes of the DES aggregation payloads S_Mj.
std::vector<double> des_payload_sizes(TrafficModel model, const CostInputs& c);

double q_mesh(TrafficModel model, const CostInputs& c);
double q_des(TrafficModel model, const CostInputs& c);

/// 1 - q_des / q_mesh. Throws UndefinedMetricError when q_mesh is 0.
double saving_ratio(TrafficModel model, const CostInputs& c);

struct StrategyTimes {
  double sync_ps = 0.0;
  double async_ps = 0.0;
  double sync_mesh = 0.0;
  double async_mesh = 0.0;
  double ring = 0.0;
  double des = 0.0;
};

/// Per-iteration communication time of each strategy. Per-sample sizes are
/// the batch totals divided by B.
StrategyTimes strategy_times(const NetworkParams& params, TrafficModel model, const CostInputs& c);

struct CommRow {
  std::string model;
  std::size_t batch = 0;
  std::size_t n_workers = 0;
  double uniq = 0.0;
  double q_mesh = 0.0;
  double q_des = 0.0;
  double ratio = 0.0;
  bool has_measurement = false;
  double measured = 0.0;   // ledger bytes per worker
  double deviation = 0.0;  // (measured - q_des) / q_des
};

CommRow predict_row(TrafficModel model, const CostInputs& c);
void set_measurement(CommRow& row, double measured_bytes_per_worker);

struct CommReport {
  std::vector<CommRow> rows;

  std::string to_tsv() const;
  std::string to_json() const;
};

}  // namespace desrec
