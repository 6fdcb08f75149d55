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

#include "desrec/bench_comm.hpp"

#include <cmath>

#include "desrec/batch.hpp"
#include "desrec/collectives.hpp"
#include "desrec/models.hpp"

namespace desrec {

CostInputs bench_inputs(const BenchCommOptions& opts, const BenchCommCell& cell) {
  CostInputs c;
  c.n_workers = opts.n_workers;
  c.batch = cell.batch;
  c.uniq = cell.uniq;
  c.embed_dim = opts.embed_dim;
  c.fc_width = opts.fc_width;
  c.field_count = opts.field_count;
  return c;
}

SparseBatch bench_batch(std::size_t batch, std::size_t uniq, std::size_t field_count) {
  const std::size_t per_sample = (uniq + batch - 1) / batch;
  SparseBatch b;
  b.samples.resize(batch);
  std::size_t t = 0;
  for (std::size_t s = 0; s < batch; ++s) {
    auto& smp = b.samples[s];
    smp.label = static_cast<int>(s & 1);
    smp.features.reserve(per_sample);
    for (std::size_t j = 0; j < per_sample; ++j, ++t) {
      const std::size_t id = t % uniq;
      smp.features.push_back({{static_cast<std::uint32_t>(id % field_count), id}, 1.0f});
    }
  }
  return b;
}

double measure_forward_bytes(TrafficModel model, const BenchCommOptions& opts, const BenchCommCell& cell) {
  ModelConfig cfg;
  cfg.field_count = opts.field_count;
  cfg.embed_dim = opts.embed_dim;
  cfg.hidden = {opts.fc_width};
  std::string_view prefix;
  switch (model) {
    case TrafficModel::kLr:
      cfg.kind = ModelKind::kLr;
      prefix = "lr.";
      break;
    case TrafficModel::kFm:
      cfg.kind = ModelKind::kFm;
      prefix = "fm2.";
      break;
    case TrafficModel::kDnn:
      cfg.kind = ModelKind::kWdl;
      prefix = "dnn.";
      break;
  }
  const auto uniq = static_cast<std::size_t>(std::llround(cell.uniq));
  WorkerGroup group(static_cast<int>(opts.n_workers));
  DesModel des(cfg, group);
  des.train_step(route(bench_batch(cell.batch, uniq, opts.field_count), opts.n_workers));
  return static_cast<double>(group.ledger().total_bytes(Phase::kForward, prefix)) /
         static_cast<double>(opts.n_workers);
}

CommReport bench_comm(const BenchCommOptions& opts) {
  CommReport report;
  for (auto model : opts.models)
    for (const auto& cell : opts.cells) {
      auto row = predict_row(model, bench_inputs(opts, cell));
      if (opts.measure) set_measurement(row, measure_forward_bytes(model, opts, cell));
      report.rows.push_back(std::move(row));
    }
  return report;
}

}  // namespace desrec
