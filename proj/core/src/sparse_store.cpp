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

#include "desrec/sparse_store.hpp"

#include <algorithm>
#include <string>

#include "desrec/errors.hpp"
#include "desrec/hashing.hpp"

namespace desrec {

std::size_t shard_of(std::uint32_t field_id, std::size_t n) {
  if (n == 0) throw ConfigError("shard_of: zero shards");
  return static_cast<std::size_t>(field_id) % n;
}

void Initializer::fill(std::uint64_t stream, std::span<float> out) const {
  if (kind == Kind::kZero) {
    std::fill(out.begin(), out.end(), 0.0f);
    return;
  }
  UniformStream rng(stream ^ splitmix64(seed));
  for (auto& x : out) x = static_cast<float>(low + (high - low) * rng.next());
}

void Initializer::fill(const FeatureKey& key, std::span<float> out) const {
  fill(splitmix64(key.key) ^ (static_cast<std::uint64_t>(key.field) << 40), out);
}

namespace {

std::string describe(const FeatureKey& k) {
  return "(field " + std::to_string(k.field) + ", key " + std::to_string(k.key) + ")";
}

}  // namespace

SparseShard::SparseShard(std::size_t rank, std::size_t n_shards, std::size_t dim, std::size_t n_slots,
                         Initializer init)
    : rank_(rank), n_shards_(n_shards), dim_(dim), n_slots_(n_slots), init_(init) {
  if (n_shards == 0 || rank >= n_shards) throw ConfigError("shard rank outside [0, n_shards)");
  if (dim == 0) throw ConfigError("sparse table dimension must be >= 1");
}

void SparseShard::check_owner(const FeatureKey& key) const {
  if (!owns(key)) {
    throw PlacementError("key " + describe(key) + " belongs to shard " +
                         std::to_string(shard_of(key.field, n_shards_)) + ", not " +
                         std::to_string(rank_));
  }
}

WeightEntry SparseShard::fresh_entry(const FeatureKey& key) const {
  WeightEntry e;
  e.weight.resize(dim_);
  init_.fill(key, e.weight);
  e.slots.assign(n_slots_, std::vector<float>(dim_, 0.0f));
  return e;
}

std::vector<float> SparseShard::lookup(std::span<const FeatureKey> keys) {
  std::vector<float> block(keys.size() * dim_);
  for (std::size_t i = 0; i < keys.size(); ++i) {
    check_owner(keys[i]);
    auto it = entries_.find(keys[i]);
    if (it == entries_.end()) it = entries_.emplace(keys[i], fresh_entry(keys[i])).first;
    std::copy(it->second.weight.begin(), it->second.weight.end(), block.begin() + i * dim_);
  }
  return block;
}

std::vector<float> SparseShard::peek(std::span<const FeatureKey> keys) const {
  std::vector<float> block(keys.size() * dim_);
  for (std::size_t i = 0; i < keys.size(); ++i) {
    check_owner(keys[i]);
    std::span<float> row(block.data() + i * dim_, dim_);
    if (auto it = entries_.find(keys[i]); it != entries_.end())
      std::copy(it->second.weight.begin(), it->second.weight.end(), row.begin());
    else
      init_.fill(keys[i], row);
  }
  return block;
}

const WeightEntry* SparseShard::find(const FeatureKey& key) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

void SparseShard::apply_update(std::span<const FeatureKey> keys, std::span<const float> new_weights,
                               std::span<const float> new_slots) {
  if (new_weights.size() != keys.size() * dim_ || new_slots.size() != keys.size() * n_slots_ * dim_) {
    throw DimensionError("apply_update: " + std::to_string(keys.size()) + " keys with dim " +
                         std::to_string(dim_) + " and " + std::to_string(n_slots_) +
                         " slots, got " + std::to_string(new_weights.size()) + " weights and " +
                         std::to_string(new_slots.size()) + " slot values");
  }
  for (const auto& k : keys) {
    check_owner(k);
    if (!entries_.contains(k)) throw ConsistencyError("apply_update: unknown key " + describe(k));
  }
  for (std::size_t i = 0; i < keys.size(); ++i) {
    auto& e = entries_.at(keys[i]);
    std::copy_n(new_weights.begin() + i * dim_, dim_, e.weight.begin());
    for (std::size_t s = 0; s < n_slots_; ++s)
      std::copy_n(new_slots.begin() + (i * n_slots_ + s) * dim_, dim_, e.slots[s].begin());
  }
}

void SparseShard::put(const FeatureKey& key, WeightEntry entry) {
  check_owner(key);
  if (entry.weight.size() != dim_ || entry.slots.size() != n_slots_)
    throw DimensionError("put: entry shape does not match shard");
  for (const auto& s : entry.slots)
    if (s.size() != dim_) throw DimensionError("put: slot shape differs from weight shape");
  entries_[key] = std::move(entry);
}

std::vector<FeatureKey> SparseShard::sorted_keys() const {
  std::vector<FeatureKey> keys;
  keys.reserve(entries_.size());
  for (const auto& [k, _] : entries_) keys.push_back(k);
  std::sort(keys.begin(), keys.end());
  return keys;
}

ShardedWeightTable::ShardedWeightTable(std::size_t n_shards, std::size_t dim, std::size_t n_slots,
                                       Initializer init)
    : dim_(dim) {
  if (n_shards == 0) throw ConfigError("table needs at least one shard");
  shards_.reserve(n_shards);
  for (std::size_t r = 0; r < n_shards; ++r) shards_.emplace_back(r, n_shards, dim, n_slots, init);
}

std::size_t ShardedWeightTable::size() const {
  std::size_t total = 0;
  for (const auto& s : shards_) total += s.size();
  return total;
}

bool ShardedWeightTable::placement_consistent() const {
  for (const auto& s : shards_)
    for (const auto& k : s.sorted_keys())
      if (shard_of(k.field, shards_.size()) != s.rank()) return false;
  return true;
}

std::vector<FeatureKey> unique_keys(const SparseBatch& batch, std::size_t shard, std::size_t n_shards) {
  std::vector<FeatureKey> keys;
  for (const auto& sample : batch.samples)
    for (const auto& f : sample.features)
      if (shard_of(f.key.field, n_shards) == shard) keys.push_back(f.key);
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  return keys;
}

std::vector<FeatureKey> unique_keys(const ShardSlice& slice) {
  std::vector<FeatureKey> keys;
  keys.reserve(slice.features.size());
  for (const auto& f : slice.features) keys.push_back(f.key);
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  return keys;
}

}  // namespace desrec
