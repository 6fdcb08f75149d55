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

#include "desrec/math.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "desrec/errors.hpp"

namespace desrec {

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> elements)
    : rows_(rows), cols_(cols), data_(std::move(elements)) {
  if (data_.size() != rows_ * cols_) {
    throw DimensionError("DenseMatrix: " + std::to_string(rows_) + "x" + std::to_string(cols_) +
                         " needs " + std::to_string(rows_ * cols_) + " elements, got " +
                         std::to_string(data_.size()));
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DimensionError("dot: length " + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
  }
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) acc += a[k] * b[k];
  return acc;
}

DenseVector matvec_t(std::span<const double> v, std::span<const double> w, std::size_t cols) {
  const bool shape_ok = cols == 0 ? w.empty() : w.size() == v.size() * cols;
  if (!shape_ok) {
    throw DimensionError("matvec_t: vector length " + std::to_string(v.size()) +
                         " does not match a block of " + std::to_string(w.size()) +
                         " elements with " + std::to_string(cols) + " columns");
  }
  DenseVector out(cols, 0.0);
  for (std::size_t r = 0; r < v.size(); ++r) {
    const double vr = v[r];
    if (vr == 0.0) continue;  // adds only signed zeros to a +0-seeded sum
    const double* wr = w.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) out[c] += vr * wr[c];
  }
  return out;
}

DenseVector matvec_t(std::span<const double> v, const DenseMatrix& w) {
  if (v.size() != w.rows()) {
    throw DimensionError("matvec_t: vector length " + std::to_string(v.size()) + " vs " +
                         std::to_string(w.rows()) + " matrix rows");
  }
  return matvec_t(v, w.elements(), w.cols());
}

double sigmoid(double z) {
  double p;
  if (z >= 0.0) {
    p = 1.0 / (1.0 + std::exp(-z));
  } else {
    const double e = std::exp(z);
    p = e / (1.0 + e);
  }
  return std::clamp(p, kProbabilityEpsilon, 1.0 - kProbabilityEpsilon);
}

void axpy(double scale, std::span<const double> b, std::span<double> a) {
  if (a.size() != b.size()) {
    throw DimensionError("axpy: length " + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
  }
  for (std::size_t k = 0; k < a.size(); ++k) a[k] += scale * b[k];
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace desrec
