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

#include "desrec/cost_model.hpp"

#include <cstdio>
#include <limits>
#include <sstream>

#include "json.hpp"

#include "desrec/errors.hpp"

namespace desrec {

std::string_view to_string(TrafficModel model) {
  switch (model) {
    case TrafficModel::kLr: return "lr";
    case TrafficModel::kFm: return "fm";
    case TrafficModel::kDnn: return "dnn";
  }
  return "unknown";
}

TrafficModel traffic_model_from_string(std::string_view name) {
  if (name == "lr") return TrafficModel::kLr;
  if (name == "fm") return TrafficModel::kFm;
  if (name == "dnn") return TrafficModel::kDnn;
  throw ConfigError("unknown traffic model '" + std::string(name) + "'");
}

void CostInputs::validate() const {
  if (n_workers == 0 || batch == 0) throw ConfigError("cost inputs: N and B must be >= 1");
  if (!(uniq >= 0.0) || !(key_bytes > 0.0) || !(value_bytes > 0.0))
    throw ConfigError("cost inputs: sizes must be positive");
  if (embed_dim == 0 || fc_width == 0 || field_count == 0)
    throw ConfigError("cost inputs: d, h and F must be >= 1");
}

double CostInputs::fc_bytes() const {
  return value_bytes * static_cast<double>(field_count) * static_cast<double>(embed_dim) *
         static_cast<double>(fc_width);
}

double mesh_weight_bytes(TrafficModel model, const CostInputs& c) {
  switch (model) {
    case TrafficModel::kLr: return c.weight_bytes();
    case TrafficModel::kFm: return c.latent_bytes();
    case TrafficModel::kDnn: return c.latent_bytes() + c.fc_bytes();
  }
  return 0.0;
}

std::vector<double> des_payload_sizes(TrafficModel model, const CostInputs& c) {
  const double B = static_cast<double>(c.batch);
  switch (model) {
    case TrafficModel::kLr: return {c.value_bytes * B};
    case TrafficModel::kFm: return {c.value_bytes * static_cast<double>(c.embed_dim) * B, c.value_bytes * B};
    case TrafficModel::kDnn: return {c.value_bytes * static_cast<double>(c.fc_width) * B};
  }
  return {};
}

double q_mesh(TrafficModel model, const CostInputs& c) {
  c.validate();
  const double n = static_cast<double>(c.n_workers);
  return (n - 1.0) / n * (c.feature_bytes() + mesh_weight_bytes(model, c));
}

double q_des(TrafficModel model, const CostInputs& c) {
  c.validate();
  double total = 0.0;
  for (double s : des_payload_sizes(model, c)) total += s;
  const double n = static_cast<double>(c.n_workers);
  // Same association as the ledger's total / N, so the two compare exactly.
  return (2.0 * (n - 1.0) * total) / n;
}

double saving_ratio(TrafficModel model, const CostInputs& c) {
  const double mesh = q_mesh(model, c);
  if (!(mesh > 0.0)) throw UndefinedMetricError("saving ratio undefined: mesh traffic is zero");
  return 1.0 - q_des(model, c) / mesh;
}

StrategyTimes strategy_times(const NetworkParams& params, TrafficModel model, const CostInputs& c) {
  params.validate();
  c.validate();
  const double n = static_cast<double>(c.n_workers);
  const double B = static_cast<double>(c.batch);
  const double per_sample = (c.feature_bytes() + mesh_weight_bytes(model, c)) / B;
  StrategyTimes t;
  t.sync_ps = 2.0 * n * (params.alpha + B * per_sample / params.bandwidth);
  t.async_ps = t.sync_ps / n;
  t.sync_mesh = 2.0 * n * (params.alpha + (n - 1.0) * B * per_sample / params.bandwidth);
  t.async_mesh = 2.0 * (params.alpha + (n - 1.0) * B * per_sample / params.bandwidth);
  t.ring = ring_time(params, c.n_workers, mesh_weight_bytes(model, c));
  t.des = des_time(params, c.n_workers, des_payload_sizes(model, c));
  return t;
}

CommRow predict_row(TrafficModel model, const CostInputs& c) {
  CommRow row;
  row.model = std::string(to_string(model));
  row.batch = c.batch;
  row.n_workers = c.n_workers;
  row.uniq = c.uniq;
  row.q_mesh = q_mesh(model, c);
  row.q_des = q_des(model, c);
  row.ratio = row.q_mesh > 0.0 ? 1.0 - row.q_des / row.q_mesh : std::numeric_limits<double>::quiet_NaN();
  return row;
}

void set_measurement(CommRow& row, double measured) {
  row.has_measurement = true;
  row.measured = measured;
  if (row.q_des > 0.0)
    row.deviation = (measured - row.q_des) / row.q_des;
  else
    row.deviation = measured == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
}

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string CommReport::to_tsv() const {
  std::ostringstream out;
  out << "model\tB\tN\tuniq\tq_mesh\tq_des\tratio\tmeasured\tdeviation\n";
  for (const auto& r : rows) {
    out << r.model << '\t' << r.batch << '\t' << r.n_workers << '\t' << num(r.uniq) << '\t' << num(r.q_mesh)
        << '\t' << num(r.q_des) << '\t' << num(r.ratio) << '\t' << (r.has_measurement ? num(r.measured) : "-")
        << '\t' << (r.has_measurement ? num(r.deviation) : "-") << '\n';
  }
  return out.str();
}

std::string CommReport::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json j{{"model", r.model}, {"B", r.batch},       {"N", r.n_workers},
                     {"uniq", r.uniq},   {"q_mesh", r.q_mesh}, {"q_des", r.q_des},
                     {"ratio", r.ratio}};
    j["measured"] = r.has_measurement ? nlohmann::json(r.measured) : nlohmann::json(nullptr);
    j["deviation"] = r.has_measurement ? nlohmann::json(r.deviation) : nlohmann::json(nullptr);
    arr.push_back(std::move(j));
  }
  return arr.dump(2);
}

}  // namespace desrec
