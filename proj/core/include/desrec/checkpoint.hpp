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

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <vector>

#include "desrec/sparse_store.hpp"

namespace desrec {

class DesModel;

/// One checkpoint record: field_id u32, key u64, d u32, d weight floats,
/// n_slots * d slot floats, all little-endian.
struct CheckpointRecord {
  std::uint32_t field = 0;
  std::uint64_t key = 0;
  std::vector<float> weight;
  std::vector<float> slots;  // slot-major
};

void write_record(std::ostream& out, const CheckpointRecord& rec);

/// Reads records until end of stream. The slot count of each record is
/// looked up by its field id, since the format does not store it.
std::vector<CheckpointRecord> read_records(std::istream& in,
                                           const std::function<std::size_t(std::uint32_t)>& n_slots_of);
std::vector<CheckpointRecord> read_records(std::istream& in, std::size_t n_slots);

/// All entries of a shard in ascending key order.
void write_shard(std::ostream& out, const SparseShard& shard);
void restore_shard(SparseShard& shard, const std::vector<CheckpointRecord>& records);

// Dense tensors are stored as records under reserved field ids.
inline constexpr std::uint32_t kDenseFieldBase = 0xFFFFFF00u;
enum class DenseTag : std::uint32_t { kBias = 0, kFc1, kFc1Bias, kUpperW, kUpperB, kCrossW, kCrossB, kHead };
inline constexpr std::uint32_t dense_field(DenseTag tag) { return kDenseFieldBase + static_cast<std::uint32_t>(tag); }

/// Writes linear.<r>.bin, embedding.<r>.bin and dense.<r>.bin per worker.
void save_checkpoint(const DesModel& model, const std::filesystem::path& dir);
void load_checkpoint(DesModel& model, const std::filesystem::path& dir);

}  // namespace desrec
