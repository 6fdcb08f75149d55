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
#include <limits>
#include <random>

#include "desrec/errors.hpp"
#include "desrec/optimizers.hpp"

using namespace desrec;

namespace {

struct State {
  std::vector<float> w;
  std::vector<float> slots;
};

State make(const OptimizerConfig& cfg, std::vector<float> w) {
  return {w, std::vector<float>(cfg.n_slots() * w.size(), 0.0f)};
}

}  // namespace

TEST(AdaGrad, ZeroGradientLeavesWeight) {
  const auto cfg = OptimizerConfig::adagrad();
  auto s = make(cfg, {0.25f, -1.0f});
  optimizer_step(cfg, s.w, s.slots, std::vector<double>{0.0, 0.0});
  EXPECT_EQ(s.w, (std::vector<float>{0.25f, -1.0f}));
}

TEST(AdaGrad, HandRecompute) {
  const auto cfg = OptimizerConfig::adagrad();
  auto s = make(cfg, {1.0f});
  optimizer_step(cfg, s.w, s.slots, std::vector<double>{2.0});
  EXPECT_EQ(s.w[0], static_cast<float>(1.0 - 0.05 * 2.0 / (2.0 + cfg.epsilon)));
  EXPECT_EQ(s.slots[0], 4.0f);
}

TEST(Ftrl, LargeL1DrivesWeightToZero) {
  auto cfg = OptimizerConfig::ftrl();
  cfg.l1 = 1e6;
  auto s = make(cfg, {0.7f});
  optimizer_step(cfg, s.w, s.slots, std::vector<double>{0.3});
  EXPECT_EQ(s.w[0], 0.0f);
}

TEST(Ftrl, ClosedFormSingleStep) {
  const auto cfg = OptimizerConfig::ftrl();
  auto s = make(cfg, {0.0f});
  const double g = -0.5;
  optimizer_step(cfg, s.w, s.slots, std::vector<double>{g});
  const double n = g * g;
  const double z = g;  // sigma * w vanishes at w = 0
  const double expect = -(z - std::copysign(cfg.l1, z)) / ((cfg.ftrl_beta + std::sqrt(n)) / cfg.ftrl_alpha + cfg.l2);
  EXPECT_NEAR(s.w[0], expect, 1e-7);
}

TEST(Adam, SingleStepHandRecompute) {
  const auto cfg = OptimizerConfig::adam();
  auto s = make(cfg, {0.0f});
  optimizer_step(cfg, s.w, s.slots, std::vector<double>{1.0});
  // m_hat = 1, v_hat = 1 after bias correction.
  EXPECT_NEAR(s.w[0], -0.001 / (1.0 + 1e-8), 1e-9);
}

TEST(Optimizers, CoordinateIndependenceAndDeterminism) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1, 1);
  for (auto cfg : {OptimizerConfig::ftrl(), OptimizerConfig::adagrad(), OptimizerConfig::adam()}) {
    auto vec = make(cfg, {0.1f, -0.2f, 0.3f});
    auto again = vec;
    std::vector<State> coords;
    for (float w : vec.w) coords.push_back(make(cfg, {w}));
    for (int step = 0; step < 20; ++step) {
      std::vector<double> g{u(rng), u(rng), u(rng)};
      optimizer_step(cfg, vec.w, vec.slots, g);
      optimizer_step(cfg, again.w, again.slots, g);
      for (std::size_t i = 0; i < 3; ++i)
        optimizer_step(cfg, coords[i].w, coords[i].slots, std::span<const double>(&g[i], 1));
    }
    EXPECT_EQ(vec.w, again.w);
    EXPECT_EQ(vec.slots, again.slots);
    for (std::size_t i = 0; i < 3; ++i) {
      EXPECT_EQ(vec.w[i], coords[i].w[0]);
      for (std::size_t sl = 0; sl < cfg.n_slots(); ++sl) EXPECT_EQ(vec.slots[sl * 3 + i], coords[i].slots[sl]);
    }
  }
}

TEST(Optimizers, NanGradientRejectedBeforeMutation) {
  const auto cfg = OptimizerConfig::adam();
  auto s = make(cfg, {0.5f, 0.5f});
  const auto before = s;
  EXPECT_THROW(optimizer_step(cfg, s.w, s.slots,
                              std::vector<double>{0.1, std::numeric_limits<double>::quiet_NaN()}),
               NumericError);
  EXPECT_EQ(s.w, before.w);
  EXPECT_EQ(s.slots, before.slots);
}

TEST(Optimizers, InvalidConfigRejected) {
  auto cfg = OptimizerConfig::adam();
  cfg.beta1 = 1.0;
  EXPECT_ANY_THROW(cfg.validate());
  cfg = OptimizerConfig::adagrad();
  cfg.learning_rate = 0.0;
  EXPECT_ANY_THROW(cfg.validate());
}
