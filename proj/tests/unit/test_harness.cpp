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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "desrec/checkpoint.hpp"
#include "desrec/config.hpp"
#include "desrec/errors.hpp"
#include "desrec/metrics.hpp"
#include "desrec/trainer.hpp"
#include "desrec/verify.hpp"

using namespace desrec;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunConfig small_run(ModelKind kind) {
  RunConfig cfg;
  cfg.model.kind = kind;
  cfg.model.field_count = 10;
  cfg.model.hidden = {8};
  cfg.model.embed_dim = 4;
  cfg.workers = 3;
  cfg.batch = 128;
  cfg.epochs = 2;
  cfg.synthetic.vocab_per_field = 200;
  cfg.synthetic_samples = 3000;
  return cfg;
}

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("desrec_test_" + name);
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST(Metrics, AucExamples) {
  const std::vector<double> s{0.1, 0.4, 0.35, 0.8};
  EXPECT_DOUBLE_EQ(auc(s, std::vector<int>{0, 0, 1, 1}), 0.75);
  EXPECT_DOUBLE_EQ(auc(std::vector<double>{0.1, 0.2, 0.8, 0.9}, std::vector<int>{0, 0, 1, 1}), 1.0);
  EXPECT_DOUBLE_EQ(auc(std::vector<double>{0.5, 0.5, 0.5, 0.5}, std::vector<int>{0, 1, 0, 1}), 0.5);
  EXPECT_THROW(auc(std::vector<double>{0.2, 0.3}, std::vector<int>{1, 1}), UndefinedMetricError);
}

TEST(Metrics, LoglossExamples) {
  EXPECT_NEAR(logloss(std::vector<double>{0.5, 0.5}, std::vector<int>{0, 1}), std::log(2.0), 1e-15);
  EXPECT_LT(logloss(std::vector<double>{1.0, 0.0}, std::vector<int>{1, 0}), 1e-6);
  EXPECT_NEAR(logloss(std::vector<double>{0.9, 0.2}, std::vector<int>{1, 0}),
              -(std::log(0.9) + std::log(0.8)) / 2.0, 1e-15);
  EXPECT_TRUE(std::isfinite(logloss(std::vector<double>{0.0}, std::vector<int>{1})));
}

TEST(Config, JsonRoundTrip) {
  RunConfig cfg = small_run(ModelKind::kDeepFm);
  cfg.model.hidden = {16, 4};
  cfg.model.dense_opt.learning_rate = 3e-4;
  cfg.execution = ExecutionMode::kThreaded;
  cfg.synthetic.noise = 0.05;
  cfg.seed = 99;
  const auto back = run_config_from_json(to_json(cfg));
  EXPECT_EQ(to_json(back), to_json(cfg));
  EXPECT_EQ(back.model.hidden, cfg.model.hidden);
  EXPECT_EQ(back.execution, ExecutionMode::kThreaded);
  EXPECT_EQ(back.seed, 99u);
}

TEST(Config, RejectsBadDocuments) {
  EXPECT_THROW(run_config_from_json(R"({"version": 2})"), ConfigError);
  EXPECT_THROW(run_config_from_json("not json"), ConfigError);
  EXPECT_THROW(run_config_from_json(R"({"version": 1, "run": {"workers": 0}})"), ConfigError);
  const auto defaults = run_config_from_json(R"({"version": 1})");
  EXPECT_EQ(defaults.batch, RunConfig{}.batch);
}

TEST(Train, ZeroEpochsGivesEmptySeries) {
  auto cfg = small_run(ModelKind::kLr);
  cfg.epochs = 0;
  EXPECT_TRUE(train(cfg).metrics.empty());
}

TEST(Train, DeterministicMetricsAndCheckpoint) {
  auto cfg = small_run(ModelKind::kDeepFm);
  cfg.out_dir = scratch_dir("det_a").string();
  const auto a = train(cfg);
  cfg.out_dir = scratch_dir("det_b").string();
  cfg.execution = ExecutionMode::kThreaded;
  const auto b = train(cfg);
  ASSERT_EQ(a.metrics.size(), b.metrics.size());
  for (std::size_t i = 0; i < a.metrics.size(); ++i) {
    EXPECT_EQ(a.metrics[i].step, b.metrics[i].step);
    EXPECT_EQ(a.metrics[i].auc, b.metrics[i].auc);
    EXPECT_EQ(a.metrics[i].logloss, b.metrics[i].logloss);
    EXPECT_EQ(a.metrics[i].fwd_bytes, b.metrics[i].fwd_bytes);
    EXPECT_EQ(a.metrics[i].bwd_bytes, 0.0);
  }
  for (const auto& entry : fs::directory_iterator(a.checkpoint_dir))
    EXPECT_EQ(slurp(entry.path()), slurp(b.checkpoint_dir / entry.path().filename())) << entry.path();
  for (const char* f : {"config.json", "metrics.tsv", "metrics.json", "ledger.tsv"})
    EXPECT_TRUE(fs::exists(fs::path(cfg.out_dir) / f)) << f;
}

TEST(Train, SeparableLrLearns) {
  auto cfg = small_run(ModelKind::kLr);
  cfg.epochs = 5;
  cfg.synthetic_samples = 10000;
  cfg.synthetic.separable = true;
  cfg.synthetic.noise = 0.0;
  const auto m = train(cfg).metrics;
  ASSERT_EQ(m.size(), 5u);
  EXPECT_GE(m.back().auc, 0.75);
  EXPECT_GT(m.back().fwd_bytes, m.front().fwd_bytes);
}

TEST(Checkpoint, SaveLoadRoundTrip) {
  auto cfg = small_run(ModelKind::kDcn);
  cfg.epochs = 1;
  Trainer t(cfg, load_dataset(cfg));
  t.run();
  const auto dir = scratch_dir("ckpt");
  save_checkpoint(t.model(), dir);

  Trainer fresh(cfg, load_dataset(cfg));
  load_checkpoint(fresh.model(), dir);
  const auto e1 = t.evaluate(), e2 = fresh.evaluate();
  EXPECT_EQ(e1.auc, e2.auc);
  EXPECT_EQ(e1.logloss, e2.logloss);
  const auto dir2 = scratch_dir("ckpt2");
  save_checkpoint(fresh.model(), dir2);
  for (const auto& entry : fs::directory_iterator(dir))
    EXPECT_EQ(slurp(entry.path()), slurp(dir2 / entry.path().filename()));
}

TEST(Verify, SmallGridPassesAndFaultIsCaught) {
  VerifyOptions opts;
  opts.equivalence_trials = 5;
  opts.gradient_trials = 5;
  opts.fm_identity_trials = 50;
  opts.workers = {1, 3};
  opts.sharded_gradient_workers = {3};
  EXPECT_TRUE(run_verify(opts).passed());

  opts.fault = Fault::kFmCombinerSign;
  const auto bad = check_fm_identity(opts);
  EXPECT_FALSE(bad.passed());
  EXPECT_FALSE(bad.first_failure.empty());
}
