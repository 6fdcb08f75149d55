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

#include <gtest/gtest.h>

#include <cmath>

#include "desrec/errors.hpp"
#include "desrec/models.hpp"
#include "desrec/oracle.hpp"
#include "desrec/verify.hpp"

using namespace desrec;

namespace {

ShardSlice slice_of(std::vector<std::vector<Feature>> samples) {
  ShardSlice s;
  s.offsets.push_back(0);
  for (auto& smp : samples) {
    s.features.insert(s.features.end(), smp.begin(), smp.end());
    s.offsets.push_back(s.features.size());
  }
  return s;
}

WeightBlock block(std::vector<FeatureKey> keys, std::vector<float> values, std::size_t dim) {
  return WeightBlock{0, 1, dim, std::move(keys), std::move(values)};
}

void set_row(ShardedWeightTable& t, const FeatureKey& k, std::vector<float> w) {
  auto& shard = t.owner(k);
  shard.lookup(std::span(&k, 1));
  shard.apply_update(std::span(&k, 1), w, {});
}

Sample sample(int label, std::vector<Feature> f) { return {label, std::move(f)}; }

ModelConfig small(ModelKind kind) {
  ModelConfig c;
  c.kind = kind;
  c.field_count = 6;
  c.embed_dim = 3;
  c.hidden = {5, 3};
  c.dcn_input_dim = 7;
  c.linear_init_scale = 0.3;
  c.embed_init_scale = 0.3;
  return c;
}

SparseBatch small_batch() {
  return {{sample(1, {{{0, 1}, 1.0f}, {{1, 2}, 0.5f}, {{4, 3}, 2.0f}}),
           sample(0, {{{2, 1}, 1.0f}, {{3, 9}, -1.0f}, {{0, 1}, 1.0f}, {{0, 1}, 0.5f}}),
           sample(1, {{{5, 4}, 1.5f}})}};
}

}  // namespace

TEST(LrPartial, Examples) {
  const FeatureKey a{0, 1}, b{0, 2};
  const auto w = block({a, b}, {0.5f, -1.0f}, 1);
  EXPECT_EQ(lr_partial(slice_of({{}}), w), (DenseVector{0.0}));
  EXPECT_EQ(lr_partial(slice_of({{{a, 1.0f}, {b, 2.0f}}}), w), (DenseVector{-1.5}));
}

TEST(LrPartial, DuplicateKeysSumValues) {
  const FeatureKey a{0, 1};
  const auto canon = canonicalize(std::vector<Feature>{{a, 1.0f}, {a, 2.5f}});
  ASSERT_EQ(canon.size(), 1u);
  const auto w = block({a}, {0.5f}, 1);
  EXPECT_EQ(lr_partial(slice_of({canon}), w), (DenseVector{0.5 * 3.5}));
}

TEST(LrForward, CancellingPartialsGiveHalf) {
  WorkerGroup g(2);
  ShardedWeightTable t(2, 1, 0, Initializer::zero());
  set_row(t, {0, 1}, {0.3f});
  set_row(t, {1, 1}, {-0.3f});
  SparseBatch b{{sample(1, {{{0, 1}, 1.0f}, {{1, 1}, 1.0f}})}};
  EXPECT_EQ(lr_forward(g, t, route(b, 2), 0.0)[0], 0.5);
}

TEST(Fm2Partials, Examples) {
  const FeatureKey a{0, 1}, b{0, 2};
  const auto v = block({a, b}, {1, 1, 2, 0}, 2);
  const auto empty = fm2_partials(slice_of({{}}), v);
  EXPECT_EQ(empty.m1, (DenseVector{0, 0}));
  EXPECT_EQ(empty.m2, (DenseVector{0}));
  const auto one = fm2_partials(slice_of({{{a, 1.0f}}}), v);
  EXPECT_EQ(one.m1, (DenseVector{1, 1}));
  EXPECT_EQ(one.m2, (DenseVector{2}));
  const auto two = fm2_partials(slice_of({{{a, 1.0f}, {b, 1.0f}}}), v);
  EXPECT_EQ(two.m1, (DenseVector{3, 1}));
  EXPECT_EQ(two.m2, (DenseVector{6}));
}

TEST(Fm2Forward, HandCaseAndSingleFeature) {
  for (int n : {1, 2}) {
    WorkerGroup g(n);
    ShardedWeightTable t(n, 2, 0, Initializer::zero());
    set_row(t, {0, 1}, {1, 1});
    set_row(t, {1, 2}, {2, 0});
    SparseBatch b{{sample(1, {{{0, 1}, 1.0f}, {{1, 2}, 1.0f}}), sample(0, {{{0, 1}, 1.0f}})}};
    const auto out = fm2_forward(g, t, route(b, n));
    EXPECT_EQ(out[0], 2.0);
    EXPECT_EQ(out[1], 0.0);
    EXPECT_EQ(g.ledger().op_count(Phase::kForward), 2u);
    EXPECT_EQ(g.ledger().total_bytes(Phase::kForward), n > 1 ? 48u : 0u);  // ring 2(N-1)(16 + 8)
  }
}

TEST(Fm2Forward, SixFeatureInstanceAcrossSplits) {
  std::vector<Feature> feats;
  std::vector<DenseVector> v;
  std::vector<double> x;
  for (std::uint32_t f = 0; f < 6; ++f) {
    const float val = 0.5f + 0.25f * static_cast<float>(f);
    feats.push_back({{f, 100u + f}, val});
    v.push_back({0.1 * f - 0.2, 0.3 - 0.05 * f, 0.07 * f});
    x.push_back(val);
  }
  const double oracle = fm2_pairwise(v, x);
  for (int n : {1, 2, 3}) {
    WorkerGroup g(n);
    ShardedWeightTable t(n, 3, 0, Initializer::zero());
    for (std::size_t i = 0; i < 6; ++i)
      set_row(t, feats[i].key, {static_cast<float>(v[i][0]), static_cast<float>(v[i][1]), static_cast<float>(v[i][2])});
    // Reference uses the float-stored latents.
    std::vector<DenseVector> vf;
    for (const auto& vi : v) vf.push_back({static_cast<float>(vi[0]), static_cast<float>(vi[1]), static_cast<float>(vi[2])});
    const auto out = fm2_forward(g, t, route(SparseBatch{{sample(0, feats)}}, n));
    EXPECT_NEAR(out[0], fm2_pairwise(vf, x), 1e-5 * std::max(1.0, std::abs(oracle)));
  }
}

TEST(DnnFirstPartial, BlockSumEqualsFullProduct) {
  const DenseVector v{1, 2, 3, 4};
  const DenseVector w{1, 2, 3, 4, 5, 6, 7, 8};  // 4 x 2
  const auto full = matvec_t(v, w, 2);
  const auto top = dnn_first_partial(std::span(v).first(2), std::span(w).first(4), 2);
  const auto bottom = dnn_first_partial(std::span(v).last(2), std::span(w).last(4), 2);
  EXPECT_EQ(full, (DenseVector{top[0] + bottom[0], top[1] + bottom[1]}));
  EXPECT_EQ(dnn_first_partial(v, DenseVector(8, 0.0), 2), (DenseVector{0, 0}));
}

TEST(DcnCross, Examples) {
  for (int n : {1, 2}) {
    WorkerGroup g(n);
    const std::vector<DenseVector> x0{{1, 2}}, x{{0.5, 0.5}};
    std::vector<DenseVector> w = n == 1 ? std::vector<DenseVector>{{1, 1}} : std::vector<DenseVector>{{1}, {1}};
    const DenseVector b{0, 0};
    EXPECT_EQ(dcn_cross_forward(g, x0, x, w, b)[0], (DenseVector{1.5, 2.5}));
    std::vector<DenseVector> zero = n == 1 ? std::vector<DenseVector>{{0, 0}} : std::vector<DenseVector>{{0}, {0}};
    const DenseVector b2{0.25, -1};
    EXPECT_EQ(dcn_cross_forward(g, x0, x, zero, b2)[0], (DenseVector{0.75, -0.5}));
  }
}

TEST(ComposedForward, AggregationCountsAndPayloads) {
  const std::size_t B = 3;
  struct Case {
    ModelKind kind;
    std::size_t ops;
  };
  for (auto [kind, ops] : {Case{ModelKind::kLr, 1}, Case{ModelKind::kFm, 3}, Case{ModelKind::kWdl, 2},
                           Case{ModelKind::kDeepFm, 4}, Case{ModelKind::kDcn, 1}}) {
    WorkerGroup g(4);
    DesModel m(small(kind), g);
    m.forward(route(small_batch(), 4));
    EXPECT_EQ(g.ledger().op_count(Phase::kForward), ops) << to_string(kind);
    EXPECT_EQ(g.ledger().bytes_per_worker(Phase::kForward), forward_bytes_per_worker(m.config(), B, 4));
    for (const auto& rec : g.ledger().records()) {
      std::size_t want = 4 * B;
      if (rec.op == kOpFmVector) want = 4 * 3 * B;
      if (rec.op == kOpDnn) want = 4 * 5 * B;
      EXPECT_EQ(rec.payload_bytes, want) << rec.op;
    }
  }
}

TEST(ComposedForward, DeepFmWithNulledComponentsIsLr) {
  auto cfg = small(ModelKind::kDeepFm);
  cfg.embed_init_scale = 0.0;
  WorkerGroup g1(2), g2(2);
  DesModel deepfm(cfg, g1);
  for (std::size_t r = 0; r < 2; ++r)
    for (auto& [f, blk] : deepfm.fc1_blocks(r)) std::fill(blk.value.begin(), blk.value.end(), 0.0f);
  auto lr_cfg = cfg;
  lr_cfg.kind = ModelKind::kLr;
  DesModel lr(lr_cfg, g2);
  const auto batch = route(small_batch(), 2);
  EXPECT_EQ(deepfm.forward(batch).logits, lr.forward(batch).logits);
}

TEST(ComposedForward, N1BitwiseAndN4WithinTolerance) {
  for (auto kind : {ModelKind::kWdl, ModelKind::kDeepFm, ModelKind::kDcn}) {
    for (int n : {1, 4}) {
      WorkerGroup g(n);
      DesModel m(small(kind), g);
      const auto out = m.forward(route(small_batch(), n));
      const auto oracle = MonolithicModel::gather(m);
      const auto ref = oracle.forward(small_batch(), n == 1 ? FmForm::kLinear : FmForm::kPairwise);
      for (std::size_t s = 0; s < ref.size(); ++s) {
        if (n == 1)
          EXPECT_EQ(out.probs[s], ref[s]);
        else
          EXPECT_NEAR(out.probs[s], ref[s], 1e-5 * std::max(1.0, std::abs(ref[s])));
      }
    }
  }
}

TEST(ComposedForward, FieldOutsideModelRejected) {
  WorkerGroup g(2);
  DesModel m(small(ModelKind::kWdl), g);
  SparseBatch b{{sample(0, {{{9, 1}, 1.0f}})}};
  EXPECT_THROW(m.forward(route(b, 2)), DimensionError);
}

TEST(ComposedForward, EvalDoesNotInsertAndIsChargedToEval) {
  WorkerGroup g(2);
  DesModel m(small(ModelKind::kFm), g);
  m.forward(route(small_batch(), 2), ForwardMode::kEval);
  EXPECT_EQ(m.linear_table().size(), 0u);
  EXPECT_EQ(m.embedding_table().size(), 0u);
  EXPECT_EQ(g.ledger().total_bytes(Phase::kForward), 0u);
  EXPECT_GT(g.ledger().total_bytes(Phase::kEval), 0u);
}

TEST(Backward, ZeroBytesAndNeedsForwardThisEpoch) {
  WorkerGroup g(3);
  DesModel m(small(ModelKind::kDeepFm), g);
  const auto batch = route(small_batch(), 3);
  EXPECT_THROW(m.backward(batch), ProtocolError);
  m.forward(batch);
  const auto grads = m.backward(batch);
  EXPECT_EQ(g.ledger().total_bytes(Phase::kBackward), 0u);
  m.apply(grads);
  g.barrier();
  EXPECT_THROW(m.backward(batch), ProtocolError);
  EXPECT_EQ(g.ledger().total_bytes(Phase::kOptimizer), 0u);
}

TEST(Backward, NearPerfectPredictionGivesVanishingGradients) {
  // The probability clamp keeps p one epsilon away from y, so the gradient
  // shrinks to that epsilon rather than to exactly zero.
  auto cfg = small(ModelKind::kLr);
  cfg.linear_init_scale = 0.0;
  WorkerGroup g(2);
  DesModel m(cfg, g);
  for (std::size_t r = 0; r < 2; ++r) m.replica(r).bias.value[0] = 60.0f;
  SparseBatch b{{sample(1, {{{0, 1}, 1.0f}, {{1, 1}, 2.0f}})}};
  const auto routed = route(b, 2);
  m.forward(routed);
  const auto grads = m.backward(routed);
  for (const auto& gr : grads) {
    for (double v : gr.linear) EXPECT_LE(std::abs(v), 2 * 2 * kProbabilityEpsilon);
    EXPECT_LE(std::abs(gr.dense.bias[0]), 2 * kProbabilityEpsilon);
  }
}

TEST(Backward, GradientsOnlyForOwnedKeys) {
  WorkerGroup g(4);
  DesModel m(small(ModelKind::kDeepFm), g);
  const auto batch = route(small_batch(), 4);
  m.forward(batch);
  const auto grads = m.backward(batch);
  for (std::size_t r = 0; r < 4; ++r) {
    for (const auto& k : grads[r].linear_keys) EXPECT_EQ(shard_of(k.field, 4), r);
    for (const auto& k : grads[r].embedding_keys) EXPECT_EQ(shard_of(k.field, 4), r);
    for (const auto& [f, blk] : grads[r].fc1) EXPECT_EQ(shard_of(f, 4), r);
    EXPECT_EQ(grads[r].dense.upper_w, grads[0].dense.upper_w);
    EXPECT_EQ(grads[r].dense.bias, grads[0].dense.bias);
  }
}

TEST(Apply, DivergedReplicaIsDetected) {
  WorkerGroup g(2);
  DesModel m(small(ModelKind::kWdl), g);
  const auto batch = route(small_batch(), 2);
  m.forward(batch);
  auto grads = m.backward(batch);
  grads[1].dense.fc1_bias[0] += 1.0;
  EXPECT_THROW(m.apply(grads), ConsistencyError);
}

TEST(TrainStep, ThreadedEqualsSequentialBitwise) {
  for (auto kind : {ModelKind::kFm, ModelKind::kDeepFm, ModelKind::kDcn}) {
    WorkerGroup gs(4), gt(4, ExecutionMode::kThreaded);
    DesModel ms(small(kind), gs), mt(small(kind), gt);
    for (int step = 0; step < 5; ++step) {
      const auto batch = route(small_batch(), 4);
      EXPECT_EQ(ms.train_step(batch).logits, mt.train_step(batch).logits);
    }
    EXPECT_TRUE(mt.replicas_identical());
    EXPECT_TRUE(ms.replica(0).bitwise_equal(mt.replica(0)));
  }
}

TEST(TrainStep, StoredKeysStayOnTheirShard) {
  WorkerGroup g(4);
  DesModel m(small(ModelKind::kDeepFm), g);
  for (int step = 0; step < 3; ++step) m.train_step(route(small_batch(), 4));
  EXPECT_TRUE(m.linear_table().placement_consistent());
  EXPECT_TRUE(m.embedding_table().placement_consistent());
}

TEST(TrainStep, EmptyBatchIsANoOp) {
  WorkerGroup g(2);
  DesModel m(small(ModelKind::kFm), g);
  const auto out = m.train_step(route(SparseBatch{}, 2));
  EXPECT_TRUE(out.probs.empty());
  EXPECT_EQ(g.ledger().records().size(), 0u);
}

TEST(RandomInstance, WithinSuiteLimits) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto inst = random_instance(ModelKind::kDeepFm, seed);
    EXPECT_LE(inst.config.field_count, 10u);
    EXPECT_LE(inst.config.embed_dim, 8u);
    std::size_t occurrences = 0;
    for (const auto& s : inst.batch.samples) occurrences += s.features.size();
    EXPECT_LE(occurrences, 100u);
  }
}
