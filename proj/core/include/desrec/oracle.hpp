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
#include <map>
#include <vector>

#include "desrec/batch.hpp"
#include "desrec/math.hpp"
#include "desrec/model_config.hpp"

namespace desrec {

class DesModel;

/// How the reference evaluates the order-2 FM term.
enum class FmForm {
  kPairwise,  // sum over i<j of <v_i, v_j> x_i x_j
  kLinear,    // 1/2 |sum v x|^2 - 1/2 sum |v x|^2, same order as the sharded path
};

/// Addresses one scalar parameter of a MonolithicModel.
struct ParamRef {
  enum class Kind { kLinear, kEmbedding, kBias, kFc1, kFc1Bias, kUpperW, kUpperB, kCrossW, kCrossB, kHead };
  Kind kind = Kind::kBias;
  FeatureKey key{};       // kLinear, kEmbedding
  std::size_t tensor = 0; // field for kFc1, layer for kUpperW/kUpperB
  std::size_t index = 0;  // coordinate within the vector or tensor
};

/**
 * Unsharded double-precision evaluation of a model, used as the reference the
 * sharded model is checked against.
 */
class MonolithicModel {
 public:
  explicit MonolithicModel(ModelConfig config);

  /// Copies every weight out of a sharded model.
  static MonolithicModel gather(const DesModel& model);

  const ModelConfig& config() const { return config_; }

  std::vector<double> logits(const SparseBatch& batch, FmForm form = FmForm::kPairwise) const;
  std::vector<double> forward(const SparseBatch& batch, FmForm form = FmForm::kPairwise) const;

  /// Summed binary cross-entropy over the batch, computed from the logits
  /// without clamping.
  double loss(const SparseBatch& batch, FmForm form = FmForm::kPairwise) const;

  double& at(const ParamRef& ref);
  double at(const ParamRef& ref) const;

  std::map<FeatureKey, double> linear;
  std::map<FeatureKey, DenseVector> embedding;
  double bias = 0.0;
  std::vector<DenseVector> fc1;  // per field, d x h row-major
  DenseVector fc1_bias;
  std::vector<DenseVector> upper_w;
  std::vector<std::size_t> upper_cols;
  std::vector<DenseVector> upper_b;
  DenseVector cross_w;
  DenseVector cross_b;
  DenseVector head;

 private:
  double linear_weight(const FeatureKey& key) const;
  DenseVector latent(const FeatureKey& key) const;
  double sample_logit(std::span<const Feature> features, FmForm form) const;

  ModelConfig config_;
};

/// Brute-force pairwise order-2 FM term of one sample.
double fm2_pairwise(std::span<const DenseVector> v, std::span<const double> x);

/// Linear-form order-2 FM term of one sample.
double fm2_linear(std::span<const DenseVector> v, std::span<const double> x);

/// Merges duplicate keys of one sample, keeping first-occurrence order.
std::vector<Feature> merge_duplicates(std::span<const Feature> features);

}  // namespace desrec
