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
#include <span>
#include <unordered_map>
#include <vector>

#include "desrec/batch.hpp"

namespace desrec {

/// Owning worker of a feature field: field_id mod n.
std::size_t shard_of(std::uint32_t field_id, std::size_t n);

/// Initial values for fresh weights. Uniform draws are keyed by (seed, key),
/// so a weight's initial value does not depend on shard count or on the order
/// keys are first seen.
struct Initializer {
  enum class Kind { kZero, kUniform };

  Kind kind = Kind::kUniform;
  double low = -0.01;
  double high = 0.01;
  std::uint64_t seed = 0;

  static Initializer zero() { return {Kind::kZero, 0.0, 0.0, 0}; }
  static Initializer uniform(double low, double high, std::uint64_t seed) {
    return {Kind::kUniform, low, high, seed};
  }

  void fill(const FeatureKey& key, std::span<float> out) const;
  void fill(std::uint64_t stream, std::span<float> out) const;
};

struct WeightEntry {
  std::vector<float> weight;
  std::vector<std::vector<float>> slots;  // each slot has the weight's shape
};

/// One worker's partition of a sparse table. Single owner, no locking.
class SparseShard {
 public:
  SparseShard(std::size_t rank, std::size_t n_shards, std::size_t dim, std::size_t n_slots,
              Initializer init);

  std::size_t rank() const { return rank_; }
  std::size_t n_shards() const { return n_shards_; }
  std::size_t dim() const { return dim_; }
  std::size_t n_slots() const { return n_slots_; }
  std::size_t size() const { return entries_.size(); }
  const Initializer& initializer() const { return init_; }

  bool owns(const FeatureKey& key) const { return shard_of(key.field, n_shards_) == rank_; }

  /// Lookup-or-insert. Returns a keys.size() x dim row-major block.
  std::vector<float> lookup(std::span<const FeatureKey> keys);

  /// Lookup without inserting; missing keys read as their initial values.
  std::vector<float> peek(std::span<const FeatureKey> keys) const;

  const WeightEntry* find(const FeatureKey& key) const;

  /// Overwrites weights and slots of existing keys. `new_weights` is
  /// keys.size() x dim; `new_slots` is keys.size() x n_slots x dim.
  void apply_update(std::span<const FeatureKey> keys, std::span<const float> new_weights,
                    std::span<const float> new_slots);

  /// Inserts or replaces an entry verbatim (checkpoint restore).
  void put(const FeatureKey& key, WeightEntry entry);

  /// All keys in ascending (field, key) order.
  std::vector<FeatureKey> sorted_keys() const;

 private:
  void check_owner(const FeatureKey& key) const;
  WeightEntry fresh_entry(const FeatureKey& key) const;

  std::size_t rank_;
  std::size_t n_shards_;
  std::size_t dim_;
  std::size_t n_slots_;
  Initializer init_;
  std::unordered_map<FeatureKey, WeightEntry, FeatureKeyHash> entries_;
};

/// Dynamic map from feature key to weight vector, one shard per worker.
class ShardedWeightTable {
 public:
  ShardedWeightTable(std::size_t n_shards, std::size_t dim, std::size_t n_slots, Initializer init);

  std::size_t n_shards() const { return shards_.size(); }
  std::size_t dim() const { return dim_; }
  std::size_t size() const;

  SparseShard& shard(std::size_t r) { return shards_.at(r); }
  const SparseShard& shard(std::size_t r) const { return shards_.at(r); }
  SparseShard& owner(const FeatureKey& key) { return shards_[shard_of(key.field, shards_.size())]; }

  /// Full scan: every stored key sits on shard_of(field, N).
  bool placement_consistent() const;

 private:
  std::size_t dim_;
  std::vector<SparseShard> shards_;
};

/// Sorted, deduplicated keys of `batch` that belong to `shard`.
std::vector<FeatureKey> unique_keys(const SparseBatch& batch, std::size_t shard, std::size_t n_shards);
std::vector<FeatureKey> unique_keys(const ShardSlice& slice);

}  // namespace desrec
