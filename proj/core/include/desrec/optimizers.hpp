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
#include <span>
#include <string>
#include <string_view>

namespace desrec {

enum class OptimizerKind { kFtrl, kAdaGrad, kAdam };

std::string_view to_string(OptimizerKind kind);
OptimizerKind optimizer_kind_from_string(std::string_view name);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kAdaGrad;
  double learning_rate = 0.05;  // AdaGrad and Adam
  // FTRL-proximal
  double ftrl_alpha = 0.05;
  double ftrl_beta = 1.0;
  double l1 = 1e-4;
  double l2 = 1e-4;
  // Adam
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;  // Adam and AdaGrad

  static OptimizerConfig ftrl();
  static OptimizerConfig adagrad();
  static OptimizerConfig adam();

  void validate() const;

  /// Auxiliary vectors per weight: FTRL (z, n), AdaGrad (accumulator),
  /// Adam (m, v, t) where t holds the entry's step count in every coordinate.
  std::size_t n_slots() const;
};

/// One update of `weight` in place. `slots` is n_slots() x weight.size(),
/// slot-major. Coordinates are updated independently. Throws NumericError on
/// a non-finite gradient before touching any state.
void optimizer_step(const OptimizerConfig& cfg, std::span<float> weight, std::span<float> slots,
                    std::span<const double> grad);

}  // namespace desrec
