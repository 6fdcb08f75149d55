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
#include <span>
#include <vector>

namespace desrec {

using DenseVector = std::vector<double>;

/// Row-major dense matrix. All accumulation is left-to-right in double.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> elements);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<const double> elements() const { return data_; }
  std::span<double> elements() { return data_; }

  bool operator==(const DenseMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Clamp bound applied by sigmoid() so that log-loss stays finite.
inline constexpr double kProbabilityEpsilon = 1e-15;

double dot(std::span<const double> a, std::span<const double> b);

/// result_c = sum_r v_r * W(r, c), rows visited in ascending order.
DenseVector matvec_t(std::span<const double> v, const DenseMatrix& w);

/// Same contraction with W given as a row-major block of `cols` columns.
DenseVector matvec_t(std::span<const double> v, std::span<const double> w, std::size_t cols);

double sigmoid(double z);

/// a += scale * b
void axpy(double scale, std::span<const double> b, std::span<double> a);

bool all_finite(std::span<const double> v);

}  // namespace desrec
