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

#include "desrec/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <string>

#include "desrec/errors.hpp"
#include "desrec/models.hpp"

namespace desrec {

namespace {

template <typename T>
void put_le(std::ostream& out, T v) {
  char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(buf, sizeof(T));
}

template <typename T>
bool get_le(std::istream& in, T& v) {
  unsigned char buf[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(buf), sizeof(T))) return false;
  v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(buf[i]) << (8 * i);
  return true;
}

void put_floats(std::ostream& out, const std::vector<float>& v) {
  for (float f : v) put_le(out, std::bit_cast<std::uint32_t>(f));
}

void get_floats(std::istream& in, std::vector<float>& v, std::size_t count) {
  v.resize(count);
  for (auto& f : v) {
    std::uint32_t bits = 0;
    if (!get_le(in, bits)) throw ParseError(0, "checkpoint record truncated");
    f = std::bit_cast<float>(bits);
  }
}

std::string shard_file(const char* table, std::size_t rank) {
  return std::string(table) + "." + std::to_string(rank) + ".bin";
}

CheckpointRecord dense_record(DenseTag tag, std::uint64_t key, const DenseParam& p) {
  return {dense_field(tag), key, p.value, p.slots};
}

void restore_dense(DenseParam& p, const CheckpointRecord& rec) {
  if (rec.weight.size() != p.value.size() || rec.slots.size() != p.slots.size())
    throw DimensionError("checkpoint dense tensor shape differs from the model");
  p.value = rec.weight;
  p.slots = rec.slots;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  return in;
}

}  // namespace

void write_record(std::ostream& out, const CheckpointRecord& rec) {
  put_le(out, rec.field);
  put_le(out, rec.key);
  put_le(out, static_cast<std::uint32_t>(rec.weight.size()));
  put_floats(out, rec.weight);
  put_floats(out, rec.slots);
}

std::vector<CheckpointRecord> read_records(std::istream& in,
                                           const std::function<std::size_t(std::uint32_t)>& n_slots_of) {
  std::vector<CheckpointRecord> records;
  while (true) {
    CheckpointRecord rec;
    if (!get_le(in, rec.field)) break;
    std::uint32_t d = 0;
    if (!get_le(in, rec.key) || !get_le(in, d)) throw ParseError(records.size() + 1, "checkpoint header truncated");
    get_floats(in, rec.weight, d);
    get_floats(in, rec.slots, n_slots_of(rec.field) * d);
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<CheckpointRecord> read_records(std::istream& in, std::size_t n_slots) {
  return read_records(in, [n_slots](std::uint32_t) { return n_slots; });
}

void write_shard(std::ostream& out, const SparseShard& shard) {
  for (const auto& k : shard.sorted_keys()) {
    const WeightEntry* e = shard.find(k);
    CheckpointRecord rec{k.field, k.key, e->weight, {}};
    for (const auto& s : e->slots) rec.slots.insert(rec.slots.end(), s.begin(), s.end());
    write_record(out, rec);
  }
}

void restore_shard(SparseShard& shard, const std::vector<CheckpointRecord>& records) {
  const std::size_t d = shard.dim();
  for (const auto& rec : records) {
    if (rec.weight.size() != d || rec.slots.size() != shard.n_slots() * d)
      throw DimensionError("checkpoint record shape differs from the shard");
    WeightEntry e;
    e.weight = rec.weight;
    for (std::size_t s = 0; s < shard.n_slots(); ++s)
      e.slots.emplace_back(rec.slots.begin() + static_cast<std::ptrdiff_t>(s * d),
                           rec.slots.begin() + static_cast<std::ptrdiff_t>((s + 1) * d));
    shard.put({rec.field, rec.key}, std::move(e));
  }
}

void save_checkpoint(const DesModel& model, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto& cfg = model.config();
  for (std::size_t r = 0; r < model.n_workers(); ++r) {
    if (cfg.has_linear()) {
      auto out = open_out(dir / shard_file("linear", r));
      write_shard(out, model.linear_table().shard(r));
    }
    if (cfg.has_embedding()) {
      auto out = open_out(dir / shard_file("embedding", r));
      write_shard(out, model.embedding_table().shard(r));
    }
    auto out = open_out(dir / shard_file("dense", r));
    const auto& rep = model.replica(r);
    write_record(out, dense_record(DenseTag::kBias, 0, rep.bias));
    if (cfg.has_deep()) {
      for (const auto& [f, block] : model.fc1_blocks(r)) write_record(out, dense_record(DenseTag::kFc1, f, block));
      write_record(out, dense_record(DenseTag::kFc1Bias, 0, rep.fc1_bias));
      for (std::size_t i = 0; i < rep.upper_w.size(); ++i) {
        write_record(out, dense_record(DenseTag::kUpperW, i, rep.upper_w[i]));
        write_record(out, dense_record(DenseTag::kUpperB, i, rep.upper_b[i]));
      }
    }
    if (cfg.has_dcn()) {
      write_record(out, dense_record(DenseTag::kCrossW, model.cross_range(r).begin, model.cross_w(r)));
      write_record(out, dense_record(DenseTag::kCrossB, 0, rep.cross_b));
      write_record(out, dense_record(DenseTag::kHead, 0, rep.head));
    }
  }
}

void load_checkpoint(DesModel& model, const std::filesystem::path& dir) {
  const auto& cfg = model.config();
  const std::size_t dense_slots = cfg.dense_opt.n_slots();
  const std::size_t bias_slots = cfg.linear_opt.n_slots();
  for (std::size_t r = 0; r < model.n_workers(); ++r) {
    if (cfg.has_linear()) {
      auto in = open_in(dir / shard_file("linear", r));
      restore_shard(model.linear_table().shard(r), read_records(in, cfg.linear_opt.n_slots()));
    }
    if (cfg.has_embedding()) {
      auto in = open_in(dir / shard_file("embedding", r));
      restore_shard(model.embedding_table().shard(r), read_records(in, cfg.embedding_opt.n_slots()));
    }
    auto in = open_in(dir / shard_file("dense", r));
    const auto records = read_records(in, [&](std::uint32_t field) {
      return field == dense_field(DenseTag::kBias) ? bias_slots : dense_slots;
    });
    auto& rep = model.replica(r);
    for (const auto& rec : records) {
      switch (static_cast<DenseTag>(rec.field - kDenseFieldBase)) {
        case DenseTag::kBias: restore_dense(rep.bias, rec); break;
        case DenseTag::kFc1: {
          auto& blocks = model.fc1_blocks(r);
          auto it = blocks.find(static_cast<std::uint32_t>(rec.key));
          if (it == blocks.end()) throw PlacementError("checkpoint first-FC block for a field this worker does not own");
          restore_dense(it->second, rec);
          break;
        }
        case DenseTag::kFc1Bias: restore_dense(rep.fc1_bias, rec); break;
        case DenseTag::kUpperW: restore_dense(rep.upper_w.at(rec.key), rec); break;
        case DenseTag::kUpperB: restore_dense(rep.upper_b.at(rec.key), rec); break;
        case DenseTag::kCrossW:
          if (rec.key != model.cross_range(r).begin) throw PlacementError("checkpoint cross-weight slice misaligned");
          restore_dense(model.cross_w(r), rec);
          break;
        case DenseTag::kCrossB: restore_dense(rep.cross_b, rec); break;
        case DenseTag::kHead: restore_dense(rep.head, rec); break;
        default: throw ParseError(0, "unknown dense record tag " + std::to_string(rec.field));
      }
    }
  }
}

}  // namespace desrec
