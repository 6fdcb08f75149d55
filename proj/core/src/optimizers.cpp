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

#include "desrec/optimizers.hpp"

#include <cmath>

#include "desrec/errors.hpp"

namespace desrec {

std::string_view to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::kFtrl: return "ftrl";
    case OptimizerKind::kAdaGrad: return "adagrad";
    case OptimizerKind::kAdam: return "adam";
  }
  return "unknown";
}

OptimizerKind optimizer_kind_from_string(std::string_view name) {
  if (name == "ftrl") return OptimizerKind::kFtrl;
  if (name == "adagrad") return OptimizerKind::kAdaGrad;
  if (name == "adam") return OptimizerKind::kAdam;
  throw ConfigError("unknown optimizer '" + std::string(name) + "'");
}

OptimizerConfig OptimizerConfig::ftrl() {
  OptimizerConfig c;
  c.kind = OptimizerKind::kFtrl;
  return c;
}

OptimizerConfig OptimizerConfig::adagrad() {
  OptimizerConfig c;
  c.kind = OptimizerKind::kAdaGrad;
  c.learning_rate = 0.05;
  return c;
}

OptimizerConfig OptimizerConfig::adam() {
  OptimizerConfig c;
  c.kind = OptimizerKind::kAdam;
  c.learning_rate = 0.001;
  return c;
}

void OptimizerConfig::validate() const {
  if (kind == OptimizerKind::kFtrl) {
    if (!(ftrl_alpha > 0.0)) throw ConfigError("ftrl alpha must be > 0");
    if (ftrl_beta < 0.0 || l1 < 0.0 || l2 < 0.0) throw ConfigError("ftrl beta/l1/l2 must be >= 0");
  } else if (!(learning_rate > 0.0)) {
    throw ConfigError("learning rate must be > 0");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0))
    throw ConfigError("adam betas must lie in [0, 1)");
  if (!(epsilon >= 0.0)) throw ConfigError("epsilon must be >= 0");
}

std::size_t OptimizerConfig::n_slots() const {
  switch (kind) {
    case OptimizerKind::kFtrl: return 2;
    case OptimizerKind::kAdaGrad: return 1;
    case OptimizerKind::kAdam: return 3;
  }
  return 0;
}

void optimizer_step(const OptimizerConfig& cfg, std::span<float> weight, std::span<float> slots,
                    std::span<const double> grad) {
  const std::size_t d = weight.size();
  if (grad.size() != d || slots.size() != cfg.n_slots() * d)
    throw DimensionError("optimizer_step: weight/slot/gradient shapes disagree");
  for (std::size_t k = 0; k < d; ++k) {
    if (!std::isfinite(grad[k])) {
      throw NumericError("optimizer_step: non-finite gradient " + std::to_string(grad[k]) +
                         " at coordinate " + std::to_string(k));
    }
  }

  switch (cfg.kind) {
    case OptimizerKind::kFtrl: {
      auto z = slots.subspan(0, d);
      auto n = slots.subspan(d, d);
      for (std::size_t k = 0; k < d; ++k) {
        const double g = grad[k];
        const double n_old = n[k];
        const double n_new = n_old + g * g;
        const double sigma = (std::sqrt(n_new) - std::sqrt(n_old)) / cfg.ftrl_alpha;
        const double z_new = static_cast<double>(z[k]) + g - sigma * static_cast<double>(weight[k]);
        double w = 0.0;
        if (std::abs(z_new) > cfg.l1) {
          const double sign = z_new > 0.0 ? 1.0 : -1.0;
          w = -(z_new - sign * cfg.l1) / ((cfg.ftrl_beta + std::sqrt(n_new)) / cfg.ftrl_alpha + cfg.l2);
        }
        z[k] = static_cast<float>(z_new);
        n[k] = static_cast<float>(n_new);
        weight[k] = static_cast<float>(w);
      }
      break;
    }
    case OptimizerKind::kAdaGrad: {
      auto acc = slots.subspan(0, d);
      for (std::size_t k = 0; k < d; ++k) {
        const double g = grad[k];
        const double a = static_cast<double>(acc[k]) + g * g;
        const double w = static_cast<double>(weight[k]) - cfg.learning_rate * g / (std::sqrt(a) + cfg.epsilon);
        acc[k] = static_cast<float>(a);
        weight[k] = static_cast<float>(w);
      }
      break;
    }
    case OptimizerKind::kAdam: {
      auto m = slots.subspan(0, d);
      auto v = slots.subspan(d, d);
      auto t = slots.subspan(2 * d, d);
      for (std::size_t k = 0; k < d; ++k) {
        const double g = grad[k];
        const double step = static_cast<double>(t[k]) + 1.0;
        const double m_new = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g;
        const double v_new = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g * g;
        const double m_hat = m_new / (1.0 - std::pow(cfg.beta1, step));
        const double v_hat = v_new / (1.0 - std::pow(cfg.beta2, step));
        const double w = static_cast<double>(weight[k]) - cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
        m[k] = static_cast<float>(m_new);
        v[k] = static_cast<float>(v_new);
        t[k] = static_cast<float>(step);
        weight[k] = static_cast<float>(w);
      }
      break;
    }
  }
}

}  // namespace desrec
