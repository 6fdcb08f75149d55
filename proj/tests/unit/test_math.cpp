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
#include <random>

#include "desrec/math.hpp"

using namespace desrec;

TEST(Dot, Examples) {
  EXPECT_EQ(dot(DenseVector{1, 0}, DenseVector{0, 1}), 0.0);
  EXPECT_EQ(dot(DenseVector{0.5, -1}, DenseVector{1, 2}), -1.5);
  EXPECT_EQ(dot(DenseVector{3, 4}, DenseVector{3, 4}), 25.0);
}

TEST(Dot, CommutesWithinOneUlp) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-10, 10);
  for (int t = 0; t < 500; ++t) {
    DenseVector a(1 + rng() % 40), b(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = u(rng), b[i] = u(rng);
    const double ab = dot(a, b), ba = dot(b, a);
    EXPECT_LE(std::abs(ab - ba), std::abs(std::nextafter(ab, INFINITY) - ab));
  }
}

TEST(Dot, LengthMismatchThrows) { EXPECT_ANY_THROW(dot(DenseVector{1, 2}, DenseVector{1})); }

TEST(MatvecT, Examples) {
  EXPECT_EQ(matvec_t(DenseVector{1, 0}, DenseMatrix(2, 2, {1, 0, 0, 1})), (DenseVector{1, 0}));
  EXPECT_EQ(matvec_t(DenseVector{1, 2}, DenseMatrix(2, 2, {2, 0, 0, 2})), (DenseVector{2, 4}));
  EXPECT_EQ(matvec_t(DenseVector{1, 2}, DenseMatrix(2, 2, {1, 3, 2, 4})), (DenseVector{5, 11}));
}

TEST(MatvecT, MatchesDoubleLoopOracle) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int t = 0; t < 200; ++t) {
    const std::size_t r = 1 + rng() % 12, c = 1 + rng() % 9;
    DenseMatrix w(r, c);
    DenseVector v(r);
    for (auto& e : w.elements()) e = u(rng);
    for (auto& e : v) e = (rng() % 4 == 0) ? 0.0 : u(rng);
    DenseVector expect(c, 0.0);
    for (std::size_t col = 0; col < c; ++col)
      for (std::size_t row = 0; row < r; ++row) expect[col] += v[row] * w(row, col);
    EXPECT_EQ(matvec_t(v, w), expect);
  }
}

TEST(Sigmoid, Examples) {
  EXPECT_EQ(sigmoid(0.0), 0.5);
  EXPECT_LT(sigmoid(40.0), 1.0);
  EXPECT_GE(sigmoid(40.0), 1.0 - kProbabilityEpsilon);
  EXPECT_GT(sigmoid(-800.0), 0.0);
  EXPECT_NEAR(sigmoid(-1.25), 0.22270, 5e-6);
}

TEST(Sigmoid, SymmetryWithin1e12) {
  for (double z = -30; z <= 30; z += 0.37) EXPECT_NEAR(sigmoid(z) + sigmoid(-z), 1.0, 1e-12);
}
