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
#include <vector>

#include "desrec/batch.hpp"
#include "desrec/hashing.hpp"

namespace desrec {

struct SyntheticSpec {
  std::size_t field_count = 10;
  std::size_t vocab_per_field = 1000;
  std::size_t min_tokens = 1;   // tokens drawn per present field
  std::size_t max_tokens = 1;
  double field_presence = 1.0;  // chance a field is present in a sample
  double zipf_exponent = 1.0;   // token popularity skew within a field
  double weight_scale = 1.0;    // std-dev of the hidden per-token weights
  std::uint64_t weight_seed = 7;
  double noise = 0.1;           // label flip probability
  double positive_rate = 0.5;   // target label marginal after noise
  bool separable = false;       // threshold labels instead of Bernoulli draws

  void validate() const;
};

/// Seeded stream of samples labelled by a hidden logistic model.
class SyntheticGenerator {
 public:
  SyntheticGenerator(SyntheticSpec spec, std::uint64_t seed);

  Sample next();
  std::vector<Sample> take(std::size_t n);

  const SyntheticSpec& spec() const { return spec_; }
  double hidden_weight(std::uint32_t field, std::size_t token) const;
  double intercept() const { return intercept_; }
  static FeatureKey key_of(std::uint32_t field, std::size_t token);

 private:
  void draw_features(UniformStream& rng, std::vector<Feature>& out) const;
  double weight_of(std::uint64_t key) const;
  double score(const std::vector<Feature>& features) const;
  std::size_t draw_token(double u) const;

  SyntheticSpec spec_;
  UniformStream rng_;
  std::vector<double> cdf_;
  double intercept_ = 0.0;
};

std::vector<Sample> gen_synthetic(const SyntheticSpec& spec, std::size_t n_samples, std::uint64_t seed);

}  // namespace desrec
