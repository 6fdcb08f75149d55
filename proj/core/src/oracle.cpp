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

#include "desrec/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "desrec/errors.hpp"
#include "desrec/models.hpp"

namespace desrec {

std::vector<Feature> merge_duplicates(std::span<const Feature> features) {
  std::vector<Feature> out;
  for (const auto& f : features) {
    bool merged = false;
    for (auto& g : out) {
      if (g.key == f.key) {
        g.value += f.value;
        merged = true;
        break;
      }
    }
    if (!merged) out.push_back(f);
  }
  return out;
}

double fm2_pairwise(std::span<const DenseVector> v, std::span<const double> x) {
  if (v.size() != x.size()) throw DimensionError("fm2_pairwise: latent/value count mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i)
    for (std::size_t j = i + 1; j < v.size(); ++j) total += dot(v[i], v[j]) * x[i] * x[j];
  return total;
}

double fm2_linear(std::span<const DenseVector> v, std::span<const double> x) {
  if (v.size() != x.size()) throw DimensionError("fm2_linear: latent/value count mismatch");
  if (v.empty()) return 0.0;
  const std::size_t d = v.front().size();
  DenseVector m1(d, 0.0), vx(d);
  double m2 = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    for (std::size_t k = 0; k < d; ++k) {
      vx[k] = v[i][k] * x[i];
      m1[k] += vx[k];
    }
    m2 += dot(vx, vx);
  }
  return 0.5 * dot(m1, m1) - 0.5 * m2;
}

MonolithicModel::MonolithicModel(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  const std::size_t d = config_.embed_dim;
  if (config_.has_deep()) {
    const std::size_t h = config_.first_fc_width();
    fc1.assign(config_.field_count, DenseVector(d * h, 0.0));
    fc1_bias.assign(h, 0.0);
    std::vector<std::size_t> widths = config_.hidden;
    widths.push_back(1);
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
      upper_w.emplace_back(widths[i] * widths[i + 1], 0.0);
      upper_cols.push_back(widths[i + 1]);
      upper_b.emplace_back(widths[i + 1], 0.0);
    }
  }
  if (config_.has_dcn()) {
    cross_w.assign(config_.dcn_input_dim, 0.0);
    cross_b.assign(config_.dcn_input_dim, 0.0);
    head.assign(config_.dcn_input_dim, 0.0);
  }
}

MonolithicModel MonolithicModel::gather(const DesModel& model) {
  MonolithicModel m(model.config());
  const auto& cfg = model.config();
  const std::size_t n = model.n_workers();
  auto widen = [](const std::vector<float>& v) { return DenseVector(v.begin(), v.end()); };
  for (std::size_t r = 0; r < n; ++r) {
    if (cfg.has_linear()) {
      const auto& shard = model.linear_table().shard(r);
      for (const auto& k : shard.sorted_keys()) m.linear[k] = shard.find(k)->weight[0];
    }
    if (cfg.has_embedding()) {
      const auto& shard = model.embedding_table().shard(r);
      for (const auto& k : shard.sorted_keys()) m.embedding[k] = widen(shard.find(k)->weight);
    }
    if (cfg.has_deep())
      for (const auto& [f, block] : model.fc1_blocks(r)) m.fc1.at(f) = widen(block.value);
    if (cfg.has_dcn()) {
      const auto range = model.cross_range(r);
      const auto& w = model.cross_w(r).value;
      for (std::size_t k = 0; k < range.size(); ++k) m.cross_w.at(range.begin + k) = w[k];
    }
  }
  const auto& rep = model.replica(0);
  m.bias = rep.bias.value.at(0);
  if (cfg.has_deep()) {
    m.fc1_bias = widen(rep.fc1_bias.value);
    for (std::size_t i = 0; i < rep.upper_w.size(); ++i) {
      m.upper_w[i] = widen(rep.upper_w[i].value);
      m.upper_b[i] = widen(rep.upper_b[i].value);
    }
  }
  if (cfg.has_dcn()) {
    m.cross_b = widen(rep.cross_b.value);
    m.head = widen(rep.head.value);
  }
  return m;
}

double MonolithicModel::linear_weight(const FeatureKey& key) const {
  if (auto it = linear.find(key); it != linear.end()) return it->second;
  float w = 0.0f;
  config_.linear_initializer().fill(key, std::span<float>(&w, 1));
  return w;
}

DenseVector MonolithicModel::latent(const FeatureKey& key) const {
  if (auto it = embedding.find(key); it != embedding.end()) return it->second;
  std::vector<float> v(config_.embed_dim);
  config_.embedding_initializer().fill(key, v);
  return {v.begin(), v.end()};
}

double MonolithicModel::sample_logit(std::span<const Feature> raw, FmForm form) const {
  const auto features = merge_duplicates(raw);
  const std::size_t d = config_.embed_dim;

  if (config_.has_dcn()) {
    const std::size_t dim = config_.dcn_input_dim;
    const DenseVector x0 = hashed_dense_input(features, dim);
    const double s = dot(x0, cross_w);
    DenseVector y(dim);
    for (std::size_t k = 0; k < dim; ++k) y[k] = (x0[k] * s + cross_b[k]) + x0[k];
    return dot(head, y) + bias;
  }

  double wx = 0.0;
  for (const auto& f : features) wx += linear_weight(f.key) * static_cast<double>(f.value);
  double logit = wx + bias;

  std::vector<DenseVector> v;
  std::vector<double> x;
  if (config_.has_embedding()) {
    for (const auto& f : features) {
      v.push_back(latent(f.key));
      x.push_back(f.value);
    }
  }
  if (config_.has_fm()) logit += form == FmForm::kPairwise ? fm2_pairwise(v, x) : fm2_linear(v, x);

  if (config_.has_deep()) {
    const std::size_t F = config_.field_count;
    const std::size_t h = config_.first_fc_width();
    DenseVector pooled(F * d, 0.0);
    for (std::size_t i = 0; i < features.size(); ++i) {
      const std::size_t field = features[i].key.field;
      if (field >= F) throw DimensionError("field " + std::to_string(field) + " outside the model");
      for (std::size_t k = 0; k < d; ++k) pooled[field * d + k] += v[i][k] * x[i];
    }
    DenseVector w_full;
    w_full.reserve(F * d * h);
    for (const auto& block : fc1) w_full.insert(w_full.end(), block.begin(), block.end());
    DenseVector z = matvec_t(pooled, w_full, h);
    DenseVector a(h);
    for (std::size_t k = 0; k < h; ++k) a[k] = std::max(0.0, z[k] + fc1_bias[k]);
    for (std::size_t i = 0; i < upper_w.size(); ++i) {
      DenseVector next = matvec_t(a, upper_w[i], upper_cols[i]);
      for (std::size_t k = 0; k < next.size(); ++k) next[k] += upper_b[i][k];
      if (i + 1 < upper_w.size())
        for (auto& e : next) e = std::max(0.0, e);
      a = std::move(next);
    }
    logit += a[0];
  }
  return logit;
}

std::vector<double> MonolithicModel::logits(const SparseBatch& batch, FmForm form) const {
  std::vector<double> out;
  out.reserve(batch.size());
  for (const auto& s : batch.samples) out.push_back(sample_logit(s.features, form));
  return out;
}

std::vector<double> MonolithicModel::forward(const SparseBatch& batch, FmForm form) const {
  auto z = logits(batch, form);
  for (auto& v : z) v = sigmoid(v);
  return z;
}

double MonolithicModel::loss(const SparseBatch& batch, FmForm form) const {
  // softplus(z) - y z: the unclamped loss whose derivative is p - y, finite
  // even where sigmoid(z) rounds to 0 or 1.
  const auto z = logits(batch, form);
  double total = 0.0;
  for (std::size_t s = 0; s < z.size(); ++s) {
    const double softplus = std::max(z[s], 0.0) + std::log1p(std::exp(-std::abs(z[s])));
    total += softplus - (batch.samples[s].label == 1 ? z[s] : 0.0);
  }
  return total;
}

double& MonolithicModel::at(const ParamRef& ref) {
  switch (ref.kind) {
    case ParamRef::Kind::kLinear: {
      auto it = linear.find(ref.key);
      if (it == linear.end()) it = linear.emplace(ref.key, linear_weight(ref.key)).first;
      return it->second;
    }
    case ParamRef::Kind::kEmbedding: {
      auto it = embedding.find(ref.key);
      if (it == embedding.end()) it = embedding.emplace(ref.key, latent(ref.key)).first;
      return it->second.at(ref.index);
    }
    case ParamRef::Kind::kBias: return bias;
    case ParamRef::Kind::kFc1: return fc1.at(ref.tensor).at(ref.index);
    case ParamRef::Kind::kFc1Bias: return fc1_bias.at(ref.index);
    case ParamRef::Kind::kUpperW: return upper_w.at(ref.tensor).at(ref.index);
    case ParamRef::Kind::kUpperB: return upper_b.at(ref.tensor).at(ref.index);
    case ParamRef::Kind::kCrossW: return cross_w.at(ref.index);
    case ParamRef::Kind::kCrossB: return cross_b.at(ref.index);
    case ParamRef::Kind::kHead: return head.at(ref.index);
  }
  throw ConfigError("unknown parameter kind");
}

double MonolithicModel::at(const ParamRef& ref) const {
  switch (ref.kind) {
    case ParamRef::Kind::kLinear: return linear_weight(ref.key);
    case ParamRef::Kind::kEmbedding: return latent(ref.key).at(ref.index);
    case ParamRef::Kind::kBias: return bias;
    case ParamRef::Kind::kFc1: return fc1.at(ref.tensor).at(ref.index);
    case ParamRef::Kind::kFc1Bias: return fc1_bias.at(ref.index);
    case ParamRef::Kind::kUpperW: return upper_w.at(ref.tensor).at(ref.index);
    case ParamRef::Kind::kUpperB: return upper_b.at(ref.tensor).at(ref.index);
    case ParamRef::Kind::kCrossW: return cross_w.at(ref.index);
    case ParamRef::Kind::kCrossB: return cross_b.at(ref.index);
    case ParamRef::Kind::kHead: return head.at(ref.index);
  }
  throw ConfigError("unknown parameter kind");
}

}  // namespace desrec
