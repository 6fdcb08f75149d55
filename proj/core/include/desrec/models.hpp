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
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "desrec/batch.hpp"
#include "desrec/collectives.hpp"
#include "desrec/math.hpp"
#include "desrec/model_config.hpp"
#include "desrec/sparse_store.hpp"

namespace desrec {

// Ledger op names of the sub-operator aggregations.
inline constexpr std::string_view kOpLr = "lr.m1";
inline constexpr std::string_view kOpFmVector = "fm2.m1";
inline constexpr std::string_view kOpFmScalar = "fm2.m2";
inline constexpr std::string_view kOpDnn = "dnn.m1";
inline constexpr std::string_view kOpDcn = "dcn.cross";

/// Dense tensor with co-located optimizer slots (slot-major, same shape).
struct DenseParam {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> value;
  std::vector<float> slots;

  DenseParam() = default;
  DenseParam(std::size_t rows, std::size_t cols, std::size_t n_slots);

  std::size_t size() const { return rows * cols; }
  bool bitwise_equal(const DenseParam& other) const;
  DenseVector as_double() const { return {value.begin(), value.end()}; }
};

/// Weights every worker holds an identical copy of.
struct ReplicatedDense {
  DenseParam bias;                  // 1 x 1, shared logit bias b
  DenseParam fc1_bias;              // 1 x h
  std::vector<DenseParam> upper_w;  // in x out, ending in a single logit
  std::vector<DenseParam> upper_b;
  DenseParam cross_b;               // 1 x D
  DenseParam head;                  // 1 x D

  bool bitwise_equal(const ReplicatedDense& other) const;
};

struct ReplicatedGrads {
  DenseVector bias;
  DenseVector fc1_bias;
  std::vector<DenseVector> upper_w;
  std::vector<DenseVector> upper_b;
  DenseVector cross_b;
  DenseVector head;
};

/// Gradients one worker produced, all for weights it owns or replicates.
struct WorkerGradients {
  std::vector<FeatureKey> linear_keys;   // sorted
  DenseVector linear;                    // linear_keys.size() x 1
  std::vector<FeatureKey> embedding_keys;
  DenseVector embedding;                 // embedding_keys.size() x d
  std::map<std::uint32_t, DenseVector> fc1;  // owned field -> d x h block
  DenseVector cross_w;                   // local slice of w
  ReplicatedGrads dense;
};

/// Rows of a shard looked up for one batch, addressable by key.
struct WeightBlock {
  std::size_t rank = 0;
  std::size_t n_shards = 1;
  std::size_t dim = 1;
  std::vector<FeatureKey> keys;  // sorted
  std::vector<float> values;     // keys.size() x dim

  std::size_t index(const FeatureKey& key) const;
  std::span<const float> row(const FeatureKey& key) const;
};

WeightBlock lookup_block(SparseShard& shard, std::span<const FeatureKey> keys);
WeightBlock peek_block(const SparseShard& shard, std::span<const FeatureKey> keys);

struct Aggregation {
  std::string op;
  std::size_t bytes = 0;  // per-rank payload S
};

/// The aggregations one forward of `config` performs on a batch of B samples.
std::vector<Aggregation> aggregation_plan(const ModelConfig& config, std::size_t batch);

/// Ring all-reduce bytes per worker of one forward: 2(N-1) sum(S) / N.
double forward_bytes_per_worker(const ModelConfig& config, std::size_t batch, std::size_t n_workers);

// --- sub-operators (per shard) -------------------------------------------

/// Per-sample sum of w_j x_j over the slice's features.
DenseVector lr_partial(const ShardSlice& slice, const WeightBlock& weights);

struct FmPartials {
  DenseVector m1;  // B x d, sum of v_j x_j
  DenseVector m2;  // B, sum of <v_j x_j, v_j x_j>
};
FmPartials fm2_partials(const ShardSlice& slice, const WeightBlock& latent);

/// 1/2 <M1, M1> - 1/2 M2 for one sample's aggregated partials.
double fm2_combine(std::span<const double> m1, double m2);

/// Field-pooled embedding of one sample restricted to `fields` (ascending),
/// concatenated: sum over a field's features of v_j x_j.
DenseVector pool_fields(std::span<const Feature> features, const WeightBlock& embeddings,
                        std::span<const std::uint32_t> fields);

/// V_i^T W_i for the locally owned row block (|V_i| x h).
DenseVector dnn_first_partial(std::span<const double> v_local, std::span<const double> w_local,
                              std::size_t width);

// --- standalone DES forward ops -------------------------------------------

/// sigma(sum over shards of lr_partial + b) per sample; one aggregation.
std::vector<double> lr_forward(WorkerGroup& group, ShardedWeightTable& table, const RoutedBatch& batch,
                               double bias);

/// FM order-2 term per sample; two aggregations (B x d and B).
std::vector<double> fm2_forward(WorkerGroup& group, ShardedWeightTable& table, const RoutedBatch& batch);

/// One cross layer over a batch: y' = x0 * sum_r(x_r . w_r) + b + x.
/// `w_slices[r]` is rank r's contiguous slice of w; x0, x and b are replicated.
std::vector<DenseVector> dcn_cross_forward(WorkerGroup& group, std::span<const DenseVector> x0,
                                           std::span<const DenseVector> x,
                                           std::span<const DenseVector> w_slices,
                                           std::span<const double> b);

// --- composed model --------------------------------------------------------

enum class ForwardMode {
  kTrain,  // lookup-or-insert, keeps activations for backward
  kEval,   // read-only lookups, charged to the eval phase
};

struct ForwardOutput {
  std::vector<double> logits;
  std::vector<double> probs;
};

/**
 * A DES model spread over the workers of a group.
 *
 * Each worker owns the sparse rows, first-FC row blocks and cross-weight slice
 * for its fields, plus its own replica of the dense upper layers. Forward runs
 * one aggregation round; backward and the optimizer step are purely local.
 */
class DesModel {
 public:
  DesModel(ModelConfig config, WorkerGroup& group);
  ~DesModel();
  DesModel(const DesModel&) = delete;
  DesModel& operator=(const DesModel&) = delete;

  const ModelConfig& config() const { return config_; }
  WorkerGroup& group() { return group_; }
  std::size_t n_workers() const { return static_cast<std::size_t>(group_.size()); }

  ForwardOutput forward(const RoutedBatch& batch, ForwardMode mode = ForwardMode::kTrain);

  /// Gradients of the summed log-loss for the batch of the last training
  /// forward in this epoch. Charges nothing to the ledger.
  std::vector<WorkerGradients> backward(const RoutedBatch& batch);

  /// Shard-local optimizer step; verifies the replicas stay bitwise identical.
  void apply(const std::vector<WorkerGradients>& grads);

  /// forward + backward + apply + barrier. Returns the forward output.
  ForwardOutput train_step(const RoutedBatch& batch);

  // Introspection.
  ShardedWeightTable& linear_table();
  ShardedWeightTable& embedding_table();
  const ShardedWeightTable& linear_table() const;
  const ShardedWeightTable& embedding_table() const;
  const std::map<std::uint32_t, DenseParam>& fc1_blocks(std::size_t rank) const;
  const DenseParam& cross_w(std::size_t rank) const;
  SliceRange cross_range(std::size_t rank) const;
  const ReplicatedDense& replica(std::size_t rank) const;
  ReplicatedDense& replica(std::size_t rank);
  std::map<std::uint32_t, DenseParam>& fc1_blocks(std::size_t rank);
  DenseParam& cross_w(std::size_t rank);

  bool replicas_identical() const;

  /// Fields owned by a rank, ascending.
  std::vector<std::uint32_t> owned_fields(std::size_t rank) const;

 private:
  struct Worker;
  struct Cache;

  Cache& cache_for(std::size_t rank, ForwardMode mode);
  std::vector<Payload> produce(int rank, const RoutedBatch& batch, ForwardMode mode);
  void consume(int rank, const RoutedBatch& batch, ForwardMode mode, std::span<const DenseVector> aggregated);
  void backward_worker(int rank, const RoutedBatch& batch, WorkerGradients& out);
  void apply_worker(int rank, const WorkerGradients& grads);

  ModelConfig config_;
  WorkerGroup& group_;
  std::unique_ptr<ShardedWeightTable> linear_;
  std::unique_ptr<ShardedWeightTable> embedding_;
  std::vector<Worker> workers_;
  std::uint64_t forward_epoch_ = 0;
  bool has_train_forward_ = false;
};

}  // namespace desrec
