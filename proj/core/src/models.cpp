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

#include "desrec/models.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "desrec/errors.hpp"
#include "desrec/hashing.hpp"
#include "desrec/optimizers.hpp"

namespace desrec {

namespace {

bool same_bits(const std::vector<float>& a, const std::vector<float>& b) {
  return a.size() == b.size() && (a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0);
}

DenseVector widen(std::span<const float> v) { return {v.begin(), v.end()}; }

std::uint64_t tensor_stream(std::string_view name, std::uint64_t index) {
  return splitmix64(hash64(name, 0) + index);
}

Initializer glorot(std::size_t fan_in, std::size_t fan_out, std::uint64_t seed) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  return Initializer::uniform(-limit, limit, seed);
}

double relu(double z) { return z > 0.0 ? z : 0.0; }

void check_routing(const RoutedBatch& batch, std::size_t n) {
  if (batch.n_shards != n || batch.slices.size() != n)
    throw DimensionError("batch routed for " + std::to_string(batch.n_shards) + " shards, group has " +
                         std::to_string(n) + " workers");
}

// Runs a sparse optimizer step over rows of `shard` and writes them back.
void step_sparse(SparseShard& shard, const OptimizerConfig& cfg, std::span<const FeatureKey> keys,
                 std::span<const double> grad) {
  const std::size_t dim = shard.dim();
  const std::size_t ns = shard.n_slots();
  if (grad.size() != keys.size() * dim) throw DimensionError("sparse gradient does not match its keys");
  std::vector<float> weights(keys.size() * dim);
  std::vector<float> slots(keys.size() * ns * dim);
  for (std::size_t i = 0; i < keys.size(); ++i) {
    const WeightEntry* e = shard.find(keys[i]);
    if (e == nullptr) throw ConsistencyError("gradient for a key the shard never stored");
    std::copy(e->weight.begin(), e->weight.end(), weights.begin() + i * dim);
    for (std::size_t s = 0; s < ns; ++s)
      std::copy(e->slots[s].begin(), e->slots[s].end(), slots.begin() + (i * ns + s) * dim);
    optimizer_step(cfg, std::span<float>(weights).subspan(i * dim, dim),
                   std::span<float>(slots).subspan(i * ns * dim, ns * dim), grad.subspan(i * dim, dim));
  }
  shard.apply_update(keys, weights, slots);
}

void step_dense(const OptimizerConfig& cfg, DenseParam& p, std::span<const double> grad) {
  optimizer_step(cfg, p.value, p.slots, grad);
}

}  // namespace

// --- dense parameters --------------------------------------------------------

DenseParam::DenseParam(std::size_t rows, std::size_t cols, std::size_t n_slots)
    : rows(rows), cols(cols), value(rows * cols, 0.0f), slots(n_slots * rows * cols, 0.0f) {}

bool DenseParam::bitwise_equal(const DenseParam& other) const {
  return rows == other.rows && cols == other.cols && same_bits(value, other.value) &&
         same_bits(slots, other.slots);
}

bool ReplicatedDense::bitwise_equal(const ReplicatedDense& other) const {
  if (upper_w.size() != other.upper_w.size() || upper_b.size() != other.upper_b.size()) return false;
  for (std::size_t i = 0; i < upper_w.size(); ++i)
    if (!upper_w[i].bitwise_equal(other.upper_w[i]) || !upper_b[i].bitwise_equal(other.upper_b[i])) return false;
  return bias.bitwise_equal(other.bias) && fc1_bias.bitwise_equal(other.fc1_bias) &&
         cross_b.bitwise_equal(other.cross_b) && head.bitwise_equal(other.head);
}

std::vector<Aggregation> aggregation_plan(const ModelConfig& config, std::size_t batch) {
  const std::size_t scalar = kWireBytesPerElement * batch;
  std::vector<Aggregation> plan;
  if (config.has_linear()) plan.push_back({std::string(kOpLr), scalar});
  if (config.has_fm()) {
    plan.push_back({std::string(kOpFmVector), scalar * config.embed_dim});
    plan.push_back({std::string(kOpFmScalar), scalar});
  }
  if (config.has_deep()) plan.push_back({std::string(kOpDnn), scalar * config.first_fc_width()});
  if (config.has_dcn()) plan.push_back({std::string(kOpDcn), scalar});
  return plan;
}

double forward_bytes_per_worker(const ModelConfig& config, std::size_t batch, std::size_t n_workers) {
  double total = 0.0;
  for (const auto& a : aggregation_plan(config, batch)) total += static_cast<double>(a.bytes);
  const double n = static_cast<double>(n_workers);
  return (2.0 * (n - 1.0) * total) / n;
}

// --- weight blocks ---------------------------------------------------------

std::size_t WeightBlock::index(const FeatureKey& key) const {
  auto it = std::lower_bound(keys.begin(), keys.end(), key);
  if (it == keys.end() || *it != key) {
    if (shard_of(key.field, n_shards) != rank)
      throw PlacementError("feature of field " + std::to_string(key.field) + " is not local to shard " +
                           std::to_string(rank));
    throw ConsistencyError("feature key missing from the looked-up block");
  }
  return static_cast<std::size_t>(it - keys.begin());
}

std::span<const float> WeightBlock::row(const FeatureKey& key) const {
  return {values.data() + index(key) * dim, dim};
}

WeightBlock lookup_block(SparseShard& shard, std::span<const FeatureKey> keys) {
  WeightBlock b{shard.rank(), shard.n_shards(), shard.dim(), {keys.begin(), keys.end()}, {}};
  b.values = shard.lookup(keys);
  return b;
}

WeightBlock peek_block(const SparseShard& shard, std::span<const FeatureKey> keys) {
  WeightBlock b{shard.rank(), shard.n_shards(), shard.dim(), {keys.begin(), keys.end()}, {}};
  b.values = shard.peek(keys);
  return b;
}

// --- sub-operators -----------------------------------------------------------

DenseVector lr_partial(const ShardSlice& slice, const WeightBlock& weights) {
  DenseVector out(slice.size(), 0.0);
  for (std::size_t s = 0; s < slice.size(); ++s) {
    double acc = 0.0;
    for (const auto& f : slice.sample(s))
      acc += static_cast<double>(weights.row(f.key)[0]) * static_cast<double>(f.value);
    out[s] = acc;
  }
  return out;
}

FmPartials fm2_partials(const ShardSlice& slice, const WeightBlock& latent) {
  const std::size_t d = latent.dim;
  FmPartials p{DenseVector(slice.size() * d, 0.0), DenseVector(slice.size(), 0.0)};
  DenseVector vx(d);
  for (std::size_t s = 0; s < slice.size(); ++s) {
    for (const auto& f : slice.sample(s)) {
      auto v = latent.row(f.key);
      const double x = f.value;
      for (std::size_t k = 0; k < d; ++k) {
        vx[k] = static_cast<double>(v[k]) * x;
        p.m1[s * d + k] += vx[k];
      }
      p.m2[s] += dot(vx, vx);
    }
  }
  return p;
}

double fm2_combine(std::span<const double> m1, double m2) { return 0.5 * dot(m1, m1) - 0.5 * m2; }

DenseVector pool_fields(std::span<const Feature> features, const WeightBlock& embeddings,
                        std::span<const std::uint32_t> fields) {
  const std::size_t d = embeddings.dim;
  DenseVector out(fields.size() * d, 0.0);
  for (const auto& f : features) {
    auto it = std::lower_bound(fields.begin(), fields.end(), f.key.field);
    if (it == fields.end() || *it != f.key.field)
      throw PlacementError("field " + std::to_string(f.key.field) + " is not pooled on this shard");
    const std::size_t pos = static_cast<std::size_t>(it - fields.begin());
    auto v = embeddings.row(f.key);
    const double x = f.value;
    for (std::size_t k = 0; k < d; ++k) out[pos * d + k] += static_cast<double>(v[k]) * x;
  }
  return out;
}

DenseVector dnn_first_partial(std::span<const double> v_local, std::span<const double> w_local,
                              std::size_t width) {
  return matvec_t(v_local, w_local, width);
}

// --- standalone forward ops ------------------------------------------------

std::vector<double> lr_forward(WorkerGroup& group, ShardedWeightTable& table, const RoutedBatch& batch,
                               double bias) {
  const auto n = static_cast<std::size_t>(group.size());
  check_routing(batch, n);
  if (table.n_shards() != n || table.dim() != 1) throw DimensionError("lr_forward: table shape mismatch");
  PhaseScope phase(group, Phase::kForward);
  std::vector<double> probs(batch.size());
  run_round(
      group,
      [&](int r) {
        const auto& slice = batch.slices[static_cast<std::size_t>(r)];
        const auto keys = unique_keys(slice);
        const auto block = lookup_block(table.shard(static_cast<std::size_t>(r)), keys);
        return std::vector<Payload>{{std::string(kOpLr), lr_partial(slice, block)}};
      },
      [&](int r, std::span<const DenseVector> agg) {
        if (r != 0) return;
        for (std::size_t s = 0; s < probs.size(); ++s) probs[s] = sigmoid(agg[0][s] + bias);
      });
  return probs;
}

std::vector<double> fm2_forward(WorkerGroup& group, ShardedWeightTable& table, const RoutedBatch& batch) {
  const auto n = static_cast<std::size_t>(group.size());
  check_routing(batch, n);
  if (table.n_shards() != n) throw DimensionError("fm2_forward: table shape mismatch");
  const std::size_t d = table.dim();
  PhaseScope phase(group, Phase::kForward);
  std::vector<double> out(batch.size());
  run_round(
      group,
      [&](int r) {
        const auto& slice = batch.slices[static_cast<std::size_t>(r)];
        const auto keys = unique_keys(slice);
        const auto block = lookup_block(table.shard(static_cast<std::size_t>(r)), keys);
        auto p = fm2_partials(slice, block);
        return std::vector<Payload>{{std::string(kOpFmVector), std::move(p.m1)},
                                    {std::string(kOpFmScalar), std::move(p.m2)}};
      },
      [&](int r, std::span<const DenseVector> agg) {
        if (r != 0) return;
        for (std::size_t s = 0; s < out.size(); ++s)
          out[s] = fm2_combine(std::span<const double>(agg[0]).subspan(s * d, d), agg[1][s]);
      });
  return out;
}

std::vector<DenseVector> dcn_cross_forward(WorkerGroup& group, std::span<const DenseVector> x0,
                                           std::span<const DenseVector> x,
                                           std::span<const DenseVector> w_slices,
                                           std::span<const double> b) {
  const auto n = static_cast<std::size_t>(group.size());
  const std::size_t dim = b.size();
  if (x.size() != x0.size()) throw DimensionError("dcn_cross_forward: x0 and x batch sizes differ");
  if (w_slices.size() != n) throw DimensionError("dcn_cross_forward: one w slice per worker required");
  for (std::size_t s = 0; s < x0.size(); ++s)
    if (x0[s].size() != dim || x[s].size() != dim) throw DimensionError("dcn_cross_forward: input width mismatch");
  for (std::size_t r = 0; r < n; ++r)
    if (w_slices[r].size() != contiguous_slice(dim, n, r).size())
      throw DimensionError("dcn_cross_forward: w slice " + std::to_string(r) + " misaligned with the split");

  PhaseScope phase(group, Phase::kForward);
  std::vector<DenseVector> out(x0.size(), DenseVector(dim));
  run_round(
      group,
      [&](int r) {
        const auto range = contiguous_slice(dim, n, static_cast<std::size_t>(r));
        DenseVector partial(x.size());
        for (std::size_t s = 0; s < x.size(); ++s)
          partial[s] = dot(std::span<const double>(x[s]).subspan(range.begin, range.size()),
                           w_slices[static_cast<std::size_t>(r)]);
        return std::vector<Payload>{{std::string(kOpDcn), std::move(partial)}};
      },
      [&](int r, std::span<const DenseVector> agg) {
        if (r != 0) return;
        for (std::size_t s = 0; s < out.size(); ++s)
          for (std::size_t k = 0; k < dim; ++k) out[s][k] = (x0[s][k] * agg[0][s] + b[k]) + x[s][k];
      });
  return out;
}

// --- composed model --------------------------------------------------------

struct DesModel::Cache {
  std::size_t batch_size = 0;
  WeightBlock linear;
  WeightBlock embedding;
  DenseVector m1;                            // aggregated, B x d
  std::vector<DenseVector> pooled;           // per sample, owned fields x d
  std::vector<std::vector<DenseVector>> acts;  // [upper layer][sample] layer inputs
  std::vector<DenseVector> x0;
  std::vector<DenseVector> y;                // cross layer output
  std::vector<double> logits;
  std::vector<double> probs;
};

struct DesModel::Worker {
  std::size_t rank = 0;
  std::vector<std::uint32_t> fields;
  std::map<std::uint32_t, DenseParam> fc1;
  SliceRange cross_range;
  DenseParam cross_w;
  ReplicatedDense replica;
  Cache train;
  Cache eval;
};

DesModel::DesModel(ModelConfig config, WorkerGroup& group) : config_(std::move(config)), group_(group) {
  config_.validate();
  const auto n = n_workers();
  const std::size_t d = config_.embed_dim;
  if (config_.has_linear())
    linear_ = std::make_unique<ShardedWeightTable>(n, 1, config_.linear_opt.n_slots(), config_.linear_initializer());
  if (config_.has_embedding())
    embedding_ = std::make_unique<ShardedWeightTable>(n, d, config_.embedding_opt.n_slots(),
                                                      config_.embedding_initializer());

  const std::size_t dense_slots = config_.dense_opt.n_slots();
  const std::uint64_t seed = splitmix64(config_.seed ^ 0x33);

  ReplicatedDense replica;
  replica.bias = DenseParam(1, 1, config_.linear_opt.n_slots());
  if (config_.has_deep()) {
    const std::size_t h = config_.first_fc_width();
    replica.fc1_bias = DenseParam(1, h, dense_slots);
    std::vector<std::size_t> widths = config_.hidden;
    widths.push_back(1);
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
      DenseParam w(widths[i], widths[i + 1], dense_slots);
      glorot(widths[i], widths[i + 1], seed).fill(tensor_stream("mlp.w", i), w.value);
      replica.upper_w.push_back(std::move(w));
      replica.upper_b.emplace_back(1, widths[i + 1], dense_slots);
    }
  }
  DenseParam full_cross;
  if (config_.has_dcn()) {
    const std::size_t dim = config_.dcn_input_dim;
    full_cross = DenseParam(1, dim, 0);
    glorot(dim, 1, seed).fill(tensor_stream("cross.w", 0), full_cross.value);
    replica.cross_b = DenseParam(1, dim, dense_slots);
    replica.head = DenseParam(1, dim, dense_slots);
    glorot(dim, 1, seed).fill(tensor_stream("head", 0), replica.head.value);
  }

  workers_.resize(n);
  for (std::size_t r = 0; r < n; ++r) {
    auto& w = workers_[r];
    w.rank = r;
    w.fields = owned_fields(r);
    w.replica = replica;
    if (config_.has_deep()) {
      const std::size_t h = config_.first_fc_width();
      for (auto f : w.fields) {
        DenseParam block(d, h, dense_slots);
        glorot(config_.field_count * d, h, seed).fill(tensor_stream("fc1", f), block.value);
        w.fc1.emplace(f, std::move(block));
      }
    }
    if (config_.has_dcn()) {
      w.cross_range = contiguous_slice(config_.dcn_input_dim, n, r);
      w.cross_w = DenseParam(1, w.cross_range.size(), dense_slots);
      std::copy_n(full_cross.value.begin() + static_cast<std::ptrdiff_t>(w.cross_range.begin),
                  w.cross_range.size(), w.cross_w.value.begin());
    }
  }
}

DesModel::~DesModel() = default;

std::vector<std::uint32_t> DesModel::owned_fields(std::size_t rank) const {
  std::vector<std::uint32_t> fields;
  for (std::uint32_t f = 0; f < config_.field_count; ++f)
    if (shard_of(f, n_workers()) == rank) fields.push_back(f);
  return fields;
}

ShardedWeightTable& DesModel::linear_table() {
  if (!linear_) throw ConfigError("model has no first-order table");
  return *linear_;
}
ShardedWeightTable& DesModel::embedding_table() {
  if (!embedding_) throw ConfigError("model has no embedding table");
  return *embedding_;
}
const ShardedWeightTable& DesModel::linear_table() const {
  if (!linear_) throw ConfigError("model has no first-order table");
  return *linear_;
}
const ShardedWeightTable& DesModel::embedding_table() const {
  if (!embedding_) throw ConfigError("model has no embedding table");
  return *embedding_;
}
const std::map<std::uint32_t, DenseParam>& DesModel::fc1_blocks(std::size_t rank) const { return workers_.at(rank).fc1; }
std::map<std::uint32_t, DenseParam>& DesModel::fc1_blocks(std::size_t rank) { return workers_.at(rank).fc1; }
const DenseParam& DesModel::cross_w(std::size_t rank) const { return workers_.at(rank).cross_w; }
DenseParam& DesModel::cross_w(std::size_t rank) { return workers_.at(rank).cross_w; }
SliceRange DesModel::cross_range(std::size_t rank) const { return workers_.at(rank).cross_range; }
const ReplicatedDense& DesModel::replica(std::size_t rank) const { return workers_.at(rank).replica; }
ReplicatedDense& DesModel::replica(std::size_t rank) { return workers_.at(rank).replica; }

bool DesModel::replicas_identical() const {
  for (std::size_t r = 1; r < workers_.size(); ++r)
    if (!workers_[r].replica.bitwise_equal(workers_[0].replica)) return false;
  return true;
}

DesModel::Cache& DesModel::cache_for(std::size_t rank, ForwardMode mode) {
  auto& w = workers_[rank];
  return mode == ForwardMode::kTrain ? w.train : w.eval;
}

std::vector<Payload> DesModel::produce(int rank, const RoutedBatch& batch, ForwardMode mode) {
  const auto r = static_cast<std::size_t>(rank);
  auto& w = workers_[r];
  auto& c = cache_for(r, mode);
  c = Cache{};
  const std::size_t B = batch.size();
  c.batch_size = B;
  const auto& slice = batch.slices[r];
  const bool train = mode == ForwardMode::kTrain;
  std::vector<Payload> out;

  std::vector<FeatureKey> keys;
  if (config_.has_linear() || config_.has_embedding()) keys = unique_keys(slice);
  if (config_.has_linear()) {
    c.linear = train ? lookup_block(linear_->shard(r), keys) : peek_block(linear_->shard(r), keys);
    out.push_back({std::string(kOpLr), lr_partial(slice, c.linear)});
  }
  if (config_.has_embedding())
    c.embedding = train ? lookup_block(embedding_->shard(r), keys) : peek_block(embedding_->shard(r), keys);
  if (config_.has_fm()) {
    auto p = fm2_partials(slice, c.embedding);
    out.push_back({std::string(kOpFmVector), std::move(p.m1)});
    out.push_back({std::string(kOpFmScalar), std::move(p.m2)});
  }
  if (config_.has_deep()) {
    const std::size_t h = config_.first_fc_width();
    DenseVector w_local;
    for (const auto& [f, block] : w.fc1) w_local.insert(w_local.end(), block.value.begin(), block.value.end());
    DenseVector partial(B * h);
    c.pooled.resize(B);
    for (std::size_t s = 0; s < B; ++s) {
      c.pooled[s] = pool_fields(slice.sample(s), c.embedding, w.fields);
      auto z = dnn_first_partial(c.pooled[s], w_local, h);
      std::copy(z.begin(), z.end(), partial.begin() + static_cast<std::ptrdiff_t>(s * h));
    }
    out.push_back({std::string(kOpDnn), std::move(partial)});
  }
  if (config_.has_dcn()) {
    const auto local_w = widen(w.cross_w.value);
    DenseVector partial(B);
    c.x0.resize(B);
    for (std::size_t s = 0; s < B; ++s) {
      c.x0[s] = hashed_dense_input(batch.canonical[s], config_.dcn_input_dim);
      partial[s] = dot(std::span<const double>(c.x0[s]).subspan(w.cross_range.begin, w.cross_range.size()), local_w);
    }
    out.push_back({std::string(kOpDcn), std::move(partial)});
  }
  return out;
}

void DesModel::consume(int rank, const RoutedBatch& batch, ForwardMode mode,
                       std::span<const DenseVector> aggregated) {
  const auto r = static_cast<std::size_t>(rank);
  const auto& rep = workers_[r].replica;
  auto& c = cache_for(r, mode);
  const std::size_t B = batch.size();
  const std::size_t d = config_.embed_dim;

  std::size_t next = 0;
  const DenseVector* lr_agg = config_.has_linear() ? &aggregated[next++] : nullptr;
  const DenseVector* m1_agg = config_.has_fm() ? &aggregated[next++] : nullptr;
  const DenseVector* m2_agg = config_.has_fm() ? &aggregated[next++] : nullptr;
  const DenseVector* dnn_agg = config_.has_deep() ? &aggregated[next++] : nullptr;
  const DenseVector* dcn_agg = config_.has_dcn() ? &aggregated[next++] : nullptr;

  const double bias = rep.bias.value[0];
  std::vector<DenseVector> upper_w, upper_b;
  for (const auto& p : rep.upper_w) upper_w.push_back(p.as_double());
  for (const auto& p : rep.upper_b) upper_b.push_back(p.as_double());
  const DenseVector fc1_bias = rep.fc1_bias.as_double();
  const DenseVector cross_b = rep.cross_b.as_double();
  const DenseVector head = rep.head.as_double();

  c.logits.assign(B, 0.0);
  c.probs.assign(B, 0.0);
  if (m1_agg != nullptr) c.m1 = *m1_agg;
  if (dnn_agg != nullptr) c.acts.assign(upper_w.size(), std::vector<DenseVector>(B));
  if (dcn_agg != nullptr) c.y.assign(B, DenseVector());

  for (std::size_t s = 0; s < B; ++s) {
    double logit = 0.0;
    if (dcn_agg != nullptr) {
      const auto& x0 = c.x0[s];
      DenseVector y(x0.size());
      for (std::size_t k = 0; k < x0.size(); ++k) y[k] = (x0[k] * (*dcn_agg)[s] + cross_b[k]) + x0[k];
      logit = dot(head, y) + bias;
      c.y[s] = std::move(y);
    } else {
      logit = (*lr_agg)[s] + bias;
      if (m1_agg != nullptr)
        logit += fm2_combine(std::span<const double>(*m1_agg).subspan(s * d, d), (*m2_agg)[s]);
      if (dnn_agg != nullptr) {
        const std::size_t h = config_.first_fc_width();
        DenseVector a(h);
        for (std::size_t k = 0; k < h; ++k) a[k] = relu((*dnn_agg)[s * h + k] + fc1_bias[k]);
        for (std::size_t i = 0; i < upper_w.size(); ++i) {
          const std::size_t width = rep.upper_w[i].cols;
          DenseVector z = matvec_t(a, upper_w[i], width);
          for (std::size_t k = 0; k < width; ++k) z[k] += upper_b[i][k];
          c.acts[i][s] = std::move(a);
          if (i + 1 < upper_w.size())
            for (auto& v : z) v = relu(v);
          a = std::move(z);
        }
        logit += a[0];
      }
    }
    c.logits[s] = logit;
    c.probs[s] = sigmoid(logit);
  }
}

ForwardOutput DesModel::forward(const RoutedBatch& batch, ForwardMode mode) {
  const auto n = n_workers();
  check_routing(batch, n);
  if (batch.canonical.size() != batch.size()) throw DimensionError("routed batch is missing canonical samples");
  if (config_.has_deep()) {
    for (const auto& sample : batch.canonical)
      for (const auto& f : sample)
        if (f.key.field >= config_.field_count)
          throw DimensionError("field " + std::to_string(f.key.field) + " outside the model's " +
                               std::to_string(config_.field_count) + " fields");
  }
  if (mode == ForwardMode::kTrain) has_train_forward_ = false;
  if (batch.size() == 0) {
    for (std::size_t r = 0; r < n; ++r) cache_for(r, mode) = Cache{};
    return {};
  }

  {
    PhaseScope phase(group_, mode == ForwardMode::kTrain ? Phase::kForward : Phase::kEval);
    run_round(
        group_, [&](int r) { return produce(r, batch, mode); },
        [&](int r, std::span<const DenseVector> agg) { consume(r, batch, mode, agg); });
  }

  const auto& lead = cache_for(0, mode);
  for (std::size_t r = 1; r < n; ++r) {
    const auto& other = cache_for(r, mode);
    if (std::memcmp(other.logits.data(), lead.logits.data(), lead.logits.size() * sizeof(double)) != 0)
      throw ConsistencyError("worker " + std::to_string(r) + " computed different logits than worker 0");
  }
  if (mode == ForwardMode::kTrain) {
    forward_epoch_ = group_.epoch();
    has_train_forward_ = true;
  }
  return {lead.logits, lead.probs};
}

void DesModel::backward_worker(int rank, const RoutedBatch& batch, WorkerGradients& g) {
  const auto r = static_cast<std::size_t>(rank);
  const auto& w = workers_[r];
  const auto& c = w.train;
  const auto& slice = batch.slices[r];
  const auto& rep = w.replica;
  const std::size_t B = batch.size();
  const std::size_t d = config_.embed_dim;

  std::vector<double> delta(B);
  double bias_grad = 0.0;
  for (std::size_t s = 0; s < B; ++s) {
    delta[s] = c.probs[s] - static_cast<double>(batch.labels[s]);
    bias_grad += delta[s];
  }
  g.dense.bias = {bias_grad};

  if (config_.has_linear()) {
    g.linear_keys = c.linear.keys;
    g.linear.assign(g.linear_keys.size(), 0.0);
    for (std::size_t s = 0; s < B; ++s)
      for (const auto& f : slice.sample(s)) g.linear[c.linear.index(f.key)] += delta[s] * static_cast<double>(f.value);
  }

  if (config_.has_embedding()) {
    g.embedding_keys = c.embedding.keys;
    g.embedding.assign(g.embedding_keys.size() * d, 0.0);
  }

  if (config_.has_fm()) {
    for (std::size_t s = 0; s < B; ++s) {
      for (const auto& f : slice.sample(s)) {
        const std::size_t i = c.embedding.index(f.key);
        const double x = f.value;
        for (std::size_t k = 0; k < d; ++k) {
          const double v = c.embedding.values[i * d + k];
          g.embedding[i * d + k] += delta[s] * (x * c.m1[s * d + k] - x * x * v);
        }
      }
    }
  }

  if (config_.has_deep()) {
    const std::size_t h = config_.first_fc_width();
    const std::size_t L = rep.upper_w.size();
    std::vector<DenseVector> upper_w;
    for (const auto& p : rep.upper_w) upper_w.push_back(p.as_double());
    g.dense.upper_w.resize(L);
    g.dense.upper_b.resize(L);
    for (std::size_t i = 0; i < L; ++i) {
      g.dense.upper_w[i].assign(rep.upper_w[i].size(), 0.0);
      g.dense.upper_b[i].assign(rep.upper_b[i].size(), 0.0);
    }
    g.dense.fc1_bias.assign(h, 0.0);
    std::vector<DenseVector> fc1_w;
    for (const auto& [f, block] : w.fc1) {
      g.fc1[f].assign(block.size(), 0.0);
      fc1_w.push_back(block.as_double());
    }

    DenseVector u(d);
    for (std::size_t s = 0; s < B; ++s) {
      DenseVector dz{delta[s]};
      for (std::size_t i = L; i-- > 0;) {
        const auto& a_in = c.acts[i][s];
        const std::size_t in = rep.upper_w[i].rows;
        const std::size_t out = rep.upper_w[i].cols;
        auto& gw = g.dense.upper_w[i];
        for (std::size_t row = 0; row < in; ++row)
          for (std::size_t col = 0; col < out; ++col) gw[row * out + col] += a_in[row] * dz[col];
        for (std::size_t col = 0; col < out; ++col) g.dense.upper_b[i][col] += dz[col];
        DenseVector prev(in, 0.0);
        for (std::size_t row = 0; row < in; ++row) {
          if (!(a_in[row] > 0.0)) continue;
          double acc = 0.0;
          for (std::size_t col = 0; col < out; ++col) acc += upper_w[i][row * out + col] * dz[col];
          prev[row] = acc;
        }
        dz = std::move(prev);
      }
      for (std::size_t k = 0; k < h; ++k) g.dense.fc1_bias[k] += dz[k];

      const auto& pooled = c.pooled[s];
      std::size_t p = 0;
      for (const auto& [f, block] : w.fc1) {
        auto& gb = g.fc1[f];
        for (std::size_t row = 0; row < d; ++row) {
          const double v = pooled[p * d + row];
          if (v == 0.0) continue;
          for (std::size_t col = 0; col < h; ++col) gb[row * h + col] += v * dz[col];
        }
        ++p;
      }
      for (const auto& f : slice.sample(s)) {
        const auto it = std::lower_bound(w.fields.begin(), w.fields.end(), f.key.field);
        const auto& wf = fc1_w[static_cast<std::size_t>(it - w.fields.begin())];
        for (std::size_t row = 0; row < d; ++row) {
          double acc = 0.0;
          for (std::size_t col = 0; col < h; ++col) acc += wf[row * h + col] * dz[col];
          u[row] = acc;
        }
        const std::size_t i = c.embedding.index(f.key);
        const double x = f.value;
        for (std::size_t row = 0; row < d; ++row) g.embedding[i * d + row] += x * u[row];
      }
    }
  }

  if (config_.has_dcn()) {
    const std::size_t dim = config_.dcn_input_dim;
    const DenseVector head = rep.head.as_double();
    g.dense.head.assign(dim, 0.0);
    g.dense.cross_b.assign(dim, 0.0);
    g.cross_w.assign(w.cross_range.size(), 0.0);
    DenseVector gy(dim);
    for (std::size_t s = 0; s < B; ++s) {
      const auto& x0 = c.x0[s];
      for (std::size_t k = 0; k < dim; ++k) {
        gy[k] = delta[s] * head[k];
        g.dense.head[k] += delta[s] * c.y[s][k];
        g.dense.cross_b[k] += gy[k];
      }
      const double a = dot(gy, x0);
      for (std::size_t k = 0; k < w.cross_range.size(); ++k) g.cross_w[k] += a * x0[w.cross_range.begin + k];
    }
  }
}

std::vector<WorkerGradients> DesModel::backward(const RoutedBatch& batch) {
  if (!has_train_forward_ || forward_epoch_ != group_.epoch())
    throw ProtocolError("backward without a training forward in epoch " + std::to_string(group_.epoch()));
  check_routing(batch, n_workers());
  if (batch.size() != workers_[0].train.batch_size)
    throw ProtocolError("backward batch differs from the batch of the last forward");
  PhaseScope phase(group_, Phase::kBackward);
  std::vector<WorkerGradients> grads(n_workers());
  group_.for_each_worker([&](int r) { backward_worker(r, batch, grads[static_cast<std::size_t>(r)]); });
  return grads;
}

void DesModel::apply_worker(int rank, const WorkerGradients& g) {
  const auto r = static_cast<std::size_t>(rank);
  auto& w = workers_[r];
  auto& rep = w.replica;
  if (config_.has_linear()) step_sparse(linear_->shard(r), config_.linear_opt, g.linear_keys, g.linear);
  if (config_.has_embedding())
    step_sparse(embedding_->shard(r), config_.embedding_opt, g.embedding_keys, g.embedding);
  step_dense(config_.linear_opt, rep.bias, g.dense.bias);
  if (config_.has_deep()) {
    for (auto& [f, block] : w.fc1) {
      auto it = g.fc1.find(f);
      if (it == g.fc1.end()) throw ConsistencyError("missing first-FC gradient for field " + std::to_string(f));
      step_dense(config_.dense_opt, block, it->second);
    }
    step_dense(config_.dense_opt, rep.fc1_bias, g.dense.fc1_bias);
    for (std::size_t i = 0; i < rep.upper_w.size(); ++i) {
      step_dense(config_.dense_opt, rep.upper_w[i], g.dense.upper_w.at(i));
      step_dense(config_.dense_opt, rep.upper_b[i], g.dense.upper_b.at(i));
    }
  }
  if (config_.has_dcn()) {
    step_dense(config_.dense_opt, w.cross_w, g.cross_w);
    step_dense(config_.dense_opt, rep.cross_b, g.dense.cross_b);
    step_dense(config_.dense_opt, rep.head, g.dense.head);
  }
}

void DesModel::apply(const std::vector<WorkerGradients>& grads) {
  if (grads.size() != n_workers()) throw DimensionError("one gradient set per worker required");
  {
    PhaseScope phase(group_, Phase::kOptimizer);
    group_.for_each_worker([&](int r) { apply_worker(r, grads[static_cast<std::size_t>(r)]); });
  }
  has_train_forward_ = false;
  for (std::size_t r = 1; r < workers_.size(); ++r) {
    if (!workers_[r].replica.bitwise_equal(workers_[0].replica))
      throw ConsistencyError("replicated dense weights of worker " + std::to_string(r) +
                             " diverged from worker 0 at epoch " + std::to_string(group_.epoch()));
  }
}

ForwardOutput DesModel::train_step(const RoutedBatch& batch) {
  auto out = forward(batch, ForwardMode::kTrain);
  if (batch.size() > 0) apply(backward(batch));
  group_.barrier();
  return out;
}

}  // namespace desrec
