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

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace desrec {

struct FeatureKey {
  std::uint32_t field = 0;
  std::uint64_t key = 0;

  auto operator<=>(const FeatureKey&) const = default;
};

struct FeatureKeyHash {
  std::size_t operator()(const FeatureKey& k) const noexcept {
    return std::hash<std::uint64_t>{}(k.key ^ (static_cast<std::uint64_t>(k.field) * 0x9e3779b97f4a7c15ULL));
  }
};

struct Feature {
  FeatureKey key;
  float value = 1.0f;
};

struct Sample {
  int label = 0;
  std::vector<Feature> features;
};

struct SparseBatch {
  std::vector<Sample> samples;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
};

/// Merges repeated keys of one sample (values summed) keeping first-occurrence order.
std::vector<Feature> canonicalize(std::span<const Feature> features);

/// The part of a batch one shard owns, in CSR layout over samples. Features of
/// each sample are canonical and keep the sample's order.
struct ShardSlice {
  std::size_t rank = 0;
  std::vector<std::size_t> offsets;  // size() + 1 entries
  std::vector<Feature> features;

  std::size_t size() const { return offsets.empty() ? 0 : offsets.size() - 1; }
  std::span<const Feature> sample(std::size_t s) const {
    return {features.data() + offsets[s], offsets[s + 1] - offsets[s]};
  }
};

/// The global batch plus one pre-partitioned slice per shard.
struct RoutedBatch {
  std::size_t n_shards = 1;
  std::vector<int> labels;
  std::vector<std::vector<Feature>> canonical;  // per sample, all shards
  std::vector<ShardSlice> slices;

  std::size_t size() const { return labels.size(); }
};

/// Routes every (key, value) to the shard owning its field.
RoutedBatch route(const SparseBatch& batch, std::size_t n_shards);

/// Splits `samples` into consecutive batches of at most `batch_size`.
std::vector<SparseBatch> make_batches(std::span<const Sample> samples, std::size_t batch_size);

}  // namespace desrec
