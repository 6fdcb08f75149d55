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

#include "desrec/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "desrec/checkpoint.hpp"
#include "desrec/criteo.hpp"
#include "desrec/errors.hpp"
#include "desrec/metrics.hpp"
#include "desrec/synthetic.hpp"
#include "json.hpp"

namespace desrec {

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

}  // namespace

std::string metrics_to_tsv(std::span<const MetricsSnapshot> series) {
  std::ostringstream out;
  out << "step\tauc\tlogloss\tfwd_bytes\tbwd_bytes\twall_ms\n";
  for (const auto& m : series)
    out << m.step << '\t' << num(m.auc) << '\t' << num(m.logloss) << '\t' << num(m.fwd_bytes) << '\t'
        << num(m.bwd_bytes) << '\t' << num(m.wall_ms) << '\n';
  return out.str();
}

std::string metrics_to_json(std::span<const MetricsSnapshot> series) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& m : series) {
    nlohmann::json j{{"epoch", m.epoch}, {"step", m.step}, {"logloss", m.logloss},
                     {"fwd_bytes", m.fwd_bytes}, {"bwd_bytes", m.bwd_bytes}, {"wall_ms", m.wall_ms}};
    j["auc"] = std::isnan(m.auc) ? nlohmann::json(nullptr) : nlohmann::json(m.auc);
    arr.push_back(std::move(j));
  }
  return arr.dump(2);
}

Dataset load_dataset(const RunConfig& cfg) {
  if (cfg.data == "synthetic") {
    auto samples = gen_synthetic(cfg.synthetic, cfg.synthetic_samples, cfg.seed);
    const auto n_train =
        static_cast<std::size_t>(std::floor(cfg.train_fraction * static_cast<double>(samples.size())));
    Dataset d;
    d.train.assign(samples.begin(), samples.begin() + static_cast<std::ptrdiff_t>(n_train));
    d.test.assign(samples.begin() + static_cast<std::ptrdiff_t>(n_train), samples.end());
    return d;
  }
  auto split = load_criteo(cfg.data, cfg.seed, cfg.max_lines, cfg.train_fraction);
  return {std::move(split.train), std::move(split.test)};
}

Trainer::Trainer(RunConfig cfg, Dataset data) : cfg_(std::move(cfg)), data_(std::move(data)) {
  cfg_.validate();
  group_ = std::make_unique<WorkerGroup>(static_cast<int>(cfg_.workers), cfg_.execution);
  model_ = std::make_unique<DesModel>(cfg_.model, *group_);
}

EvalResult Trainer::evaluate() {
  std::vector<double> probs;
  std::vector<int> labels;
  probs.reserve(data_.test.size());
  labels.reserve(data_.test.size());
  for (std::size_t begin = 0; begin < data_.test.size(); begin += cfg_.batch) {
    const std::size_t end = std::min(data_.test.size(), begin + cfg_.batch);
    SparseBatch batch{{data_.test.begin() + static_cast<std::ptrdiff_t>(begin),
                       data_.test.begin() + static_cast<std::ptrdiff_t>(end)}};
    const auto out = model_->forward(route(batch, cfg_.workers), ForwardMode::kEval);
    probs.insert(probs.end(), out.probs.begin(), out.probs.end());
    for (const auto& s : batch.samples) labels.push_back(s.label);
  }
  EvalResult r;
  r.logloss = logloss(probs, labels);
  try {
    r.auc = auc(probs, labels);
  } catch (const UndefinedMetricError&) {
    r.auc = std::numeric_limits<double>::quiet_NaN();
  }
  return r;
}

MetricsSnapshot Trainer::run_epoch() {
  const auto start = std::chrono::steady_clock::now();
  for (std::size_t begin = 0; begin < data_.train.size(); begin += cfg_.batch) {
    const std::size_t end = std::min(data_.train.size(), begin + cfg_.batch);
    SparseBatch batch{{data_.train.begin() + static_cast<std::ptrdiff_t>(begin),
                       data_.train.begin() + static_cast<std::ptrdiff_t>(end)}};
    model_->train_step(route(batch, cfg_.workers));
    ++step_;
  }
  ++epoch_;
  const auto eval = evaluate();
  MetricsSnapshot m;
  m.epoch = epoch_;
  m.step = step_;
  m.auc = eval.auc;
  m.logloss = eval.logloss;
  m.fwd_bytes = group_->ledger().bytes_per_worker(Phase::kForward);
  m.bwd_bytes = group_->ledger().bytes_per_worker(Phase::kBackward);
  m.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return m;
}

std::vector<MetricsSnapshot> Trainer::run() {
  std::vector<MetricsSnapshot> series;
  for (std::size_t e = 0; e < cfg_.epochs; ++e) series.push_back(run_epoch());
  return series;
}

TrainResult train(const RunConfig& cfg) {
  cfg.validate();
  Trainer trainer(cfg, load_dataset(cfg));
  TrainResult result;
  result.metrics = trainer.run();
  if (!cfg.out_dir.empty()) {
    const std::filesystem::path out(cfg.out_dir);
    std::filesystem::create_directories(out);
    write_file(out / "config.json", to_json(cfg));
    write_file(out / "metrics.tsv", metrics_to_tsv(result.metrics));
    write_file(out / "metrics.json", metrics_to_json(result.metrics));
    write_file(out / "ledger.tsv", trainer.group().ledger().to_tsv());
    result.checkpoint_dir = out / "checkpoint";
    save_checkpoint(trainer.model(), result.checkpoint_dir);
  }
  return result;
}

}  // namespace desrec
