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

#include <random>
#include <thread>

#include "desrec/collectives.hpp"
#include "desrec/errors.hpp"

using namespace desrec;

TEST(AllReduce, SingleWorkerIsIdentityAndFree) {
  WorkerGroup g(1);
  std::vector<DenseVector> locals{{5, 7}};
  EXPECT_EQ(g.all_reduce_sum(locals, "t"), (DenseVector{5, 7}));
  EXPECT_EQ(g.ledger().total_bytes(Phase::kForward), 0u);
}

TEST(AllReduce, TwoWorkersSum) {
  WorkerGroup g(2);
  std::vector<DenseVector> locals{{1, 2}, {3, 4}};
  EXPECT_EQ(g.all_reduce_sum(locals, "t"), (DenseVector{4, 6}));
}

TEST(AllReduce, RingBytesFor1024BytePayload) {
  WorkerGroup g(4);
  std::vector<DenseVector> locals(4, DenseVector(256, 1.0));  // 1024 bytes on the wire
  g.all_reduce_sum(locals, "t");
  EXPECT_EQ(g.ledger().bytes_per_worker(Phase::kForward), 1536.0);
  EXPECT_EQ(g.ledger().op_count(Phase::kForward), 1u);
}

TEST(AllReduce, NonDivisibleChunksStillTotal2NMinus1S) {
  for (std::size_t n : {2, 3, 5, 8})
    for (std::size_t elements : {1, 7, 13, 100}) {
      const auto bytes = ring_allreduce_bytes(n, elements);
      std::uint64_t total = 0;
      for (auto b : bytes) total += b;
      EXPECT_EQ(total, 2 * (n - 1) * elements * kWireBytesPerElement);
    }
}

TEST(AllReduce, ResultRoundedToWireAndRankOrdered) {
  WorkerGroup g(3);
  std::vector<DenseVector> locals{{0.1}, {1e8}, {-1e8}};
  const auto r = g.all_reduce_sum(locals, "t");
  const double expect = to_wire((to_wire(0.1) + to_wire(1e8)) + to_wire(-1e8));
  EXPECT_EQ(r[0], expect);
}

TEST(AllReduce, ThreadedMatchesSequentialBitwise) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int n : {2, 3, 4, 8}) {
    std::vector<DenseVector> locals(n, DenseVector(17));
    for (auto& l : locals)
      for (auto& e : l) e = u(rng);
    WorkerGroup seq(n);
    const auto expect = seq.all_reduce_sum(locals, "t");
    WorkerGroup thr(n, ExecutionMode::kThreaded);
    std::vector<DenseVector> got(n);
    thr.for_each_worker([&](int r) { got[r] = thr.all_reduce_sum(r, locals[r], "t"); });
    for (int r = 0; r < n; ++r) EXPECT_EQ(got[r], expect);
    EXPECT_EQ(thr.ledger().total_bytes(Phase::kForward), seq.ledger().total_bytes(Phase::kForward));
  }
}

TEST(AllReduce, MismatchedLengthsThrow) {
  WorkerGroup g(2);
  std::vector<DenseVector> locals{{1, 2}, {3}};
  EXPECT_THROW(g.all_reduce_sum(locals, "t"), ProtocolError);
}

TEST(AllGather, Examples) {
  WorkerGroup one(1);
  std::vector<DenseVector> l1{{3}};
  EXPECT_EQ(one.all_gather(l1, "g"), (std::vector<DenseVector>{{3}}));
  WorkerGroup two(2);
  std::vector<DenseVector> l2{{1}, {2}};
  EXPECT_EQ(two.all_gather(l2, "g"), (std::vector<DenseVector>{{1}, {2}}));
}

TEST(AllGather, HundredBytesEachOnFourWorkers) {
  WorkerGroup g(4);
  std::vector<DenseVector> locals(4, DenseVector(25, 0.5));
  g.all_gather(locals, "g");
  EXPECT_EQ(g.ledger().bytes_per_worker(Phase::kForward), 300.0);
}

TEST(RingTime, Examples) {
  EXPECT_EQ(ring_time({0.0, 1.0}, 1, 1e6), 0.0);
  EXPECT_EQ(ring_time({0.0, 1.0}, 2, 4.0), 4.0);
  EXPECT_EQ(ring_time({1.0, 1e9}, 4, 0.0), 6.0);
}

TEST(DesTime, Examples) {
  const NetworkParams p{0.0, 1.0};
  const std::vector<double> one{123.0}, two{4.0, 4.0};
  EXPECT_EQ(des_time(p, 3, one), ring_time(p, 3, 123.0));
  EXPECT_EQ(des_time(p, 2, two), 8.0);
  EXPECT_EQ(des_time(p, 1, two), 0.0);
}

TEST(Rendezvous, MissingRankTimesOut) {
  WorkerGroup g(2, ExecutionMode::kThreaded, std::chrono::milliseconds(50));
  DenseVector v{1.0};
  EXPECT_THROW(g.all_reduce_sum(0, v, "lonely"), ProtocolError);
}

TEST(Ledger, PhaseAttribution) {
  WorkerGroup g(2);
  std::vector<DenseVector> locals{{1}, {2}};
  {
    PhaseScope s(g, Phase::kEval);
    g.all_reduce_sum(locals, "e");
  }
  g.all_reduce_sum(locals, "f");
  EXPECT_EQ(g.ledger().op_count(Phase::kEval), 1u);
  EXPECT_EQ(g.ledger().op_count(Phase::kForward), 1u);
  EXPECT_EQ(g.ledger().total_bytes(Phase::kBackward), 0u);
  EXPECT_NE(g.ledger().to_tsv().find("eval\te"), std::string::npos);
}
