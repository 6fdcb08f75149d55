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

// desrec: train, verify, bench-comm and report over simulated DES workers.
//
// Exit status: 0 success, 1 a check failed, 2 usage or configuration error.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "desrec/bench_comm.hpp"
#include "desrec/config.hpp"
#include "desrec/errors.hpp"
#include "desrec/trainer.hpp"
#include "desrec/verify.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace desrec;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;

struct CommonFlags {
  std::string model;
  std::optional<std::size_t> workers;
  std::optional<std::size_t> batch;
  std::string data;
  std::optional<std::size_t> epochs;
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string out;
};

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

RunConfig run_config(const CommonFlags& f) {
  RunConfig cfg = f.config.empty() ? RunConfig{} : load_run_config(f.config);
  if (!f.model.empty()) cfg.model.kind = model_kind_from_string(f.model);
  if (f.workers) cfg.workers = *f.workers;
  if (f.batch) cfg.batch = *f.batch;
  if (!f.data.empty()) cfg.data = f.data;
  if (f.epochs) cfg.epochs = *f.epochs;
  if (f.seed) cfg.seed = *f.seed;
  if (!f.out.empty()) cfg.out_dir = f.out;
  cfg.validate();
  return cfg;
}

std::string auc_text(double auc) {
  if (std::isnan(auc)) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", auc);
  return buf;
}

int cmd_train(const CommonFlags& f, bool threaded) {
  RunConfig cfg = run_config(f);
  if (threaded) cfg.execution = ExecutionMode::kThreaded;
  const auto result = train(cfg);
  std::cout << metrics_to_tsv(result.metrics);
  if (!result.metrics.empty()) {
    const auto& last = result.metrics.back();
    std::fprintf(stderr, "%s N=%zu B=%zu: final auc %s logloss %.6f, backward bytes %.0f\n",
                 std::string(to_string(cfg.model.kind)).c_str(), cfg.workers, cfg.batch, auc_text(last.auc).c_str(),
                 last.logloss, last.bwd_bytes);
  }
  return kExitOk;
}

int cmd_verify(const CommonFlags& f, std::size_t trials, const std::string& fault, bool json) {
  VerifyOptions opts;
  if (!f.model.empty()) opts.models = {model_kind_from_string(f.model)};
  if (f.workers) {
    opts.workers = {*f.workers};
    opts.sharded_gradient_workers.clear();
    if (*f.workers > 1) opts.sharded_gradient_workers = {*f.workers};
  }
  if (f.seed) opts.seed = *f.seed;
  if (trials > 0) opts.equivalence_trials = trials;
  if (fault == "fm-sign")
    opts.fault = Fault::kFmCombinerSign;
  else if (!fault.empty())
    throw ConfigError("unknown fault '" + fault + "' (expected fm-sign)");
  const auto report = run_verify(opts);
  std::cout << (json ? report.to_json() + "\n" : report.to_text());
  if (!f.out.empty()) write_text(fs::path(f.out) / "verify.json", report.to_json());
  return report.passed() ? kExitOk : kExitCheckFailed;
}

int cmd_bench(const CommonFlags& f, std::optional<double> uniq, bool predict_only, bool json) {
  BenchCommOptions opts;
  if (!f.model.empty()) opts.models = {traffic_model_from_string(f.model)};
  if (f.workers) opts.n_workers = *f.workers;
  if (f.batch) {
    std::vector<BenchCommCell> cells;
    for (const auto& c : opts.cells)
      if (c.batch == *f.batch) cells.push_back(c);
    if (uniq) cells = {{*f.batch, *uniq}};
    if (cells.empty()) throw ConfigError("no table cell for batch " + std::to_string(*f.batch) + "; pass --uniq");
    opts.cells = cells;
  } else if (uniq) {
    throw ConfigError("--uniq needs --batch");
  }
  opts.measure = !predict_only;
  const auto report = bench_comm(opts);
  std::cout << (json ? report.to_json() + "\n" : report.to_tsv());
  if (!f.out.empty()) {
    write_text(fs::path(f.out) / "comm.tsv", report.to_tsv());
    write_text(fs::path(f.out) / "comm.json", report.to_json());
  }
  for (const auto& row : report.rows)
    if (row.has_measurement && row.measured != row.q_des) return kExitCheckFailed;
  return kExitOk;
}

// Summarises a run directory written by `train --out`.
int cmd_report(const CommonFlags& f) {
  if (f.out.empty()) throw ConfigError("report needs --out DIR of a finished run");
  const fs::path dir(f.out);
  const auto cfg = run_config_from_json(read_text(dir / "config.json"));
  const auto metrics = nlohmann::json::parse(read_text(dir / "metrics.json"));
  std::cout << "model\t" << to_string(cfg.model.kind) << "\nworkers\t" << cfg.workers << "\nbatch\t" << cfg.batch
            << "\nseed\t" << cfg.seed << "\ndata\t" << cfg.data << '\n';
  std::cout << "epoch\tstep\tauc\tlogloss\tfwd_bytes\tbwd_bytes\n";
  bool backward_clean = true;
  for (const auto& m : metrics) {
    const double auc = m.at("auc").is_null() ? std::nan("") : m.at("auc").get<double>();
    std::cout << m.at("epoch").get<std::size_t>() << '\t' << m.at("step").get<std::uint64_t>() << '\t'
              << auc_text(auc) << '\t' << m.at("logloss").get<double>() << '\t' << m.at("fwd_bytes").get<double>()
              << '\t' << m.at("bwd_bytes").get<double>() << '\n';
    backward_clean = backward_clean && m.at("bwd_bytes").get<double>() == 0.0;
  }
  std::cout << "backward bytes zero\t" << (backward_clean ? "yes" : "NO") << '\n';
  return backward_clean ? kExitOk : kExitCheckFailed;
}

void add_common(CLI::App* app, CommonFlags& f, bool data_flags) {
  app->add_option("--model", f.model, "lr|fm|wdl|deepfm|dcn-demo (bench-comm: lr|fm|dnn)");
  app->add_option("--workers", f.workers, "number of simulated workers N")->check(CLI::PositiveNumber);
  app->add_option("--batch", f.batch, "global batch size B")->check(CLI::PositiveNumber);
  app->add_option("--seed", f.seed, "seed");
  app->add_option("--out", f.out, "output directory");
  if (data_flags) {
    app->add_option("--data", f.data, "Criteo TSV path or 'synthetic'");
    app->add_option("--epochs", f.epochs, "training epochs");
    app->add_option("--config", f.config, "versioned JSON run config")->check(CLI::ExistingFile);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed equivalent substitution training over simulated workers"};
  app.require_subcommand(1);

  CommonFlags train_f, verify_f, bench_f, report_f;
  bool threaded = false;
  auto* train_cmd = app.add_subcommand("train", "train a model and write metrics, ledger and checkpoint");
  add_common(train_cmd, train_f, true);
  train_cmd->add_flag("--threaded", threaded, "one thread per worker");

  std::size_t trials = 0;
  std::string fault;
  bool verify_json = false;
  auto* verify_cmd = app.add_subcommand("verify", "equivalence, FM identity, gradient and ledger checks");
  add_common(verify_cmd, verify_f, false);
  verify_cmd->add_option("--trials", trials, "equivalence instances per model and N");
  verify_cmd->add_option("--inject-fault", fault, "fm-sign: flip the FM combiner sign");
  verify_cmd->add_flag("--json", verify_json, "JSON report");

  std::optional<double> uniq;
  bool predict_only = false, bench_json = false;
  auto* bench_cmd = app.add_subcommand("bench-comm", "predicted vs measured DES traffic per worker");
  add_common(bench_cmd, bench_f, false);
  bench_cmd->add_option("--uniq", uniq, "unique features per batch (with --batch)");
  bench_cmd->add_flag("--predict-only", predict_only, "closed forms only, no DES iteration");
  bench_cmd->add_flag("--json", bench_json, "JSON report");

  auto* report_cmd = app.add_subcommand("report", "summarise a run directory");
  add_common(report_cmd, report_f, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(train_f, threaded);
    if (verify_cmd->parsed()) return cmd_verify(verify_f, trials, fault, verify_json);
    if (bench_cmd->parsed()) return cmd_bench(bench_f, uniq, predict_only, bench_json);
    if (report_cmd->parsed()) return cmd_report(report_f);
  } catch (const ConfigError& e) {
    std::cerr << "desrec: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ParseError& e) {
    std::cerr << "desrec: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "desrec: " << e.what() << '\n';
    return kExitCheckFailed;
  }
  return kExitUsage;
}
