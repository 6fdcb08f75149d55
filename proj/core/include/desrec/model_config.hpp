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
#include <cstdint>
#include <string_view>
#include <vector>

#include "desrec/math.hpp"
#include "desrec/optimizers.hpp"
#include "desrec/sparse_store.hpp"

namespace desrec {

enum class ModelKind { kLr, kFm, kWdl, kDeepFm, kDcn };

std::string_view to_string(ModelKind kind);
ModelKind model_kind_from_string(std::string_view name);

/// Shape and optimizer bindings of a model; identical on every worker.
struct ModelConfig {
  ModelKind kind = ModelKind::kLr;
  std::size_t embed_dim = 8;
  std::size_t field_count = 39;
  std::vector<std::size_t> hidden = {64, 32};  // hidden[0] is the first FC width
  std::size_t dcn_input_dim = 16;
  std::uint64_t seed = 42;

  double linear_init_scale = 0.0;  // 0 means zero-initialised first-order weights
  double embed_init_scale = 0.01;

  OptimizerConfig linear_opt = OptimizerConfig::ftrl();     // first-order weights and bias
  OptimizerConfig embedding_opt = OptimizerConfig::adagrad();
  OptimizerConfig dense_opt = OptimizerConfig::adam();      // first FC, MLP, cross layer

  bool has_linear() const { return kind != ModelKind::kDcn; }
  bool has_fm() const { return kind == ModelKind::kFm || kind == ModelKind::kDeepFm; }
  bool has_deep() const { return kind == ModelKind::kWdl || kind == ModelKind::kDeepFm; }
  bool has_dcn() const { return kind == ModelKind::kDcn; }
  bool has_embedding() const { return has_fm() || has_deep(); }

  std::size_t first_fc_width() const { return hidden.front(); }

  Initializer linear_initializer() const;
  Initializer embedding_initializer() const;

  void validate() const;
};

/// Contiguous split of [0, length) over n ranks; the first length % n ranks
/// get one extra element.
struct SliceRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
};
SliceRange contiguous_slice(std::size_t length, std::size_t n, std::size_t rank);

/// Weight-free hashed dense encoding of a sample: x0[bucket(key)] += value.
DenseVector hashed_dense_input(std::span<const Feature> features, std::size_t dim);

}  // namespace desrec
