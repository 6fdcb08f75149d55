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

#include "desrec/batch.hpp"

#include <unordered_map>

#include "desrec/errors.hpp"
#include "desrec/sparse_store.hpp"

namespace desrec {

std::vector<Feature> canonicalize(std::span<const Feature> features) {
  std::vector<Feature> out;
  out.reserve(features.size());
  std::unordered_map<FeatureKey, std::size_t, FeatureKeyHash> index;
  index.reserve(features.size());
  for (const auto& f : features) {
    auto [it, inserted] = index.try_emplace(f.key, out.size());
    if (inserted)
      out.push_back(f);
    else
      out[it->second].value += f.value;
  }
  return out;
}

RoutedBatch route(const SparseBatch& batch, std::size_t n_shards) {
  if (n_shards == 0) throw ConfigError("route: zero shards");
  RoutedBatch routed;
  routed.n_shards = n_shards;
  routed.labels.reserve(batch.size());
  routed.canonical.reserve(batch.size());
  routed.slices.resize(n_shards);
  for (std::size_t r = 0; r < n_shards; ++r) {
    routed.slices[r].rank = r;
    routed.slices[r].offsets.assign(1, 0);
  }
  for (const auto& sample : batch.samples) {
    routed.labels.push_back(sample.label);
    routed.canonical.push_back(canonicalize(sample.features));
    for (const auto& f : routed.canonical.back())
      routed.slices[shard_of(f.key.field, n_shards)].features.push_back(f);
    for (auto& slice : routed.slices) slice.offsets.push_back(slice.features.size());
  }
  return routed;
}

std::vector<SparseBatch> make_batches(std::span<const Sample> samples, std::size_t batch_size) {
  if (batch_size == 0) throw ConfigError("batch size must be >= 1");
  std::vector<SparseBatch> out;
  for (std::size_t begin = 0; begin < samples.size(); begin += batch_size) {
    const std::size_t end = std::min(samples.size(), begin + batch_size);
    out.push_back(SparseBatch{{samples.begin() + static_cast<std::ptrdiff_t>(begin),
                               samples.begin() + static_cast<std::ptrdiff_t>(end)}});
  }
  return out;
}

}  // namespace desrec
