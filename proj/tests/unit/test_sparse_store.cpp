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

#include <map>
#include <random>
#include <set>

#include "desrec/checkpoint.hpp"
#include "desrec/errors.hpp"
#include "desrec/sparse_store.hpp"
#include "desrec/synthetic.hpp"

#include <sstream>

using namespace desrec;

TEST(ShardOf, Examples) {
  EXPECT_EQ(shard_of(5, 4), 1u);
  for (std::size_t k = 1; k < 10; ++k) EXPECT_EQ(shard_of(0, k), 0u);
  EXPECT_EQ(shard_of(7, 1), 0u);
}

TEST(Lookup, ExistingKeyReturnsStoredVector) {
  SparseShard s(0, 1, 2, 0, Initializer::zero());
  const FeatureKey k{0, 42};
  s.lookup(std::span(&k, 1));
  const std::vector<float> w{1.5f, -2.0f};
  s.apply_update(std::span(&k, 1), w, {});
  EXPECT_EQ(s.lookup(std::span(&k, 1)), w);
}

TEST(Lookup, FreshKeyZeroInitializer) {
  SparseShard s(0, 1, 4, 0, Initializer::zero());
  const FeatureKey k{3, 9};
  EXPECT_EQ(s.lookup(std::span(&k, 1)), std::vector<float>(4, 0.0f));
}

TEST(Lookup, SeededUniformReproducibleAndOrderIndependent) {
  const auto init = Initializer::uniform(-0.01, 0.01, 77);
  std::vector<FeatureKey> keys{{0, 1}, {0, 2}, {0, 3}};
  SparseShard a(0, 1, 3, 0, init), b(0, 1, 3, 0, init);
  const auto va = a.lookup(keys);
  std::vector<FeatureKey> rev(keys.rbegin(), keys.rend());
  b.lookup(rev);
  EXPECT_EQ(b.lookup(keys), va);
  for (float v : va) {
    EXPECT_GE(v, -0.01f);
    EXPECT_LE(v, 0.01f);
  }
}

TEST(Lookup, PeekDoesNotInsert) {
  SparseShard s(0, 1, 2, 0, Initializer::uniform(-1, 1, 5));
  const FeatureKey k{0, 11};
  const auto peeked = s.peek(std::span(&k, 1));
  EXPECT_EQ(s.size(), 0u);
  EXPECT_EQ(s.lookup(std::span(&k, 1)), peeked);
  EXPECT_EQ(s.size(), 1u);
}

TEST(Lookup, ForeignKeyRejected) {
  SparseShard s(1, 4, 1, 0, Initializer::zero());
  const FeatureKey k{4, 1};  // field 4 belongs to shard 0
  EXPECT_THROW(s.lookup(std::span(&k, 1)), PlacementError);
}

TEST(ApplyUpdate, ZeroDeltaLeavesTableIdentical) {
  SparseShard s(0, 1, 3, 2, Initializer::uniform(-1, 1, 1));
  std::vector<FeatureKey> keys{{0, 1}, {0, 2}};
  const auto w = s.lookup(keys);
  std::vector<float> slots(keys.size() * 2 * 3, 0.0f);
  s.apply_update(keys, w, slots);
  std::ostringstream before, after;
  SparseShard fresh(0, 1, 3, 2, Initializer::uniform(-1, 1, 1));
  fresh.lookup(keys);
  write_shard(before, fresh);
  write_shard(after, s);
  EXPECT_EQ(before.str(), after.str());
}

TEST(ApplyUpdate, ThousandRandomUpdatesMatchShadowMap) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<float> u(-1, 1);
  SparseShard s(0, 1, 2, 1, Initializer::zero());
  std::map<FeatureKey, std::pair<std::vector<float>, std::vector<float>>> shadow;
  for (int t = 0; t < 1000; ++t) {
    const FeatureKey k{0, rng() % 50};
    s.lookup(std::span(&k, 1));
    std::vector<float> w{u(rng), u(rng)}, sl{u(rng), u(rng)};
    s.apply_update(std::span(&k, 1), w, sl);
    shadow[k] = {w, sl};
  }
  EXPECT_EQ(s.size(), shadow.size());
  for (const auto& [k, ws] : shadow) {
    const auto* e = s.find(k);
    ASSERT_NE(e, nullptr);
    EXPECT_EQ(e->weight, ws.first);
    EXPECT_EQ(e->slots[0], ws.second);
  }
}

TEST(UniqueKeys, DuplicatesAndEmpty) {
  SparseBatch b{{{0, {{{0, 5}, 1.0f}, {{0, 5}, 2.0f}, {{2, 5}, 1.0f}}}}};
  EXPECT_EQ(unique_keys(b, 0, 2), (std::vector<FeatureKey>{{0, 5}, {2, 5}}));
  EXPECT_TRUE(unique_keys(SparseBatch{}, 0, 2).empty());
}

TEST(UniqueKeys, MatchesSetOracleOn512Samples) {
  SyntheticSpec spec;
  spec.vocab_per_field = 50;
  spec.max_tokens = 3;
  const auto samples = gen_synthetic(spec, 512, 4);
  SparseBatch b{samples};
  for (std::size_t n : {1, 3, 4}) {
    std::size_t total = 0;
    for (std::size_t r = 0; r < n; ++r) {
      std::set<FeatureKey> oracle;
      for (const auto& s : samples)
        for (const auto& f : s.features)
          if (shard_of(f.key.field, n) == r) oracle.insert(f.key);
      const auto keys = unique_keys(b, r, n);
      EXPECT_EQ(std::vector<FeatureKey>(oracle.begin(), oracle.end()), keys);
      total += keys.size();
    }
    EXPECT_GT(total, 0u);
  }
}

TEST(Table, PlacementConsistentAfterLookups) {
  ShardedWeightTable t(4, 2, 1, Initializer::uniform(-1, 1, 2));
  for (std::uint32_t f = 0; f < 20; ++f) {
    const FeatureKey k{f, f * 7ULL};
    t.owner(k).lookup(std::span(&k, 1));
  }
  EXPECT_EQ(t.size(), 20u);
  EXPECT_TRUE(t.placement_consistent());
}

TEST(Checkpoint, RecordRoundTrip) {
  SparseShard s(1, 2, 3, 2, Initializer::uniform(-1, 1, 8));
  std::vector<FeatureKey> keys{{1, 10}, {3, 2}, {1, 4}};
  s.lookup(keys);
  std::stringstream buf;
  write_shard(buf, s);
  const auto recs = read_records(buf, 2);
  ASSERT_EQ(recs.size(), 3u);
  SparseShard restored(1, 2, 3, 2, Initializer::zero());
  restore_shard(restored, recs);
  std::stringstream again;
  write_shard(again, restored);
  std::stringstream orig;
  write_shard(orig, s);
  EXPECT_EQ(orig.str(), again.str());
}
