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

#include "desrec/model_config.hpp"

#include <algorithm>
#include <string>

#include "desrec/errors.hpp"
#include "desrec/hashing.hpp"

namespace desrec {

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kLr: return "lr";
    case ModelKind::kFm: return "fm";
    case ModelKind::kWdl: return "wdl";
    case ModelKind::kDeepFm: return "deepfm";
    case ModelKind::kDcn: return "dcn-demo";
  }
  return "unknown";
}

ModelKind model_kind_from_string(std::string_view name) {
  if (name == "lr") return ModelKind::kLr;
  if (name == "fm") return ModelKind::kFm;
  if (name == "wdl") return ModelKind::kWdl;
  if (name == "deepfm") return ModelKind::kDeepFm;
  if (name == "dcn-demo" || name == "dcn") return ModelKind::kDcn;
  throw ConfigError("unknown model kind '" + std::string(name) + "'");
}

Initializer ModelConfig::linear_initializer() const {
  if (linear_init_scale == 0.0) return Initializer::zero();
  return Initializer::uniform(-linear_init_scale, linear_init_scale, splitmix64(seed ^ 0x11));
}

Initializer ModelConfig::embedding_initializer() const {
  if (embed_init_scale == 0.0) return Initializer::zero();
  return Initializer::uniform(-embed_init_scale, embed_init_scale, splitmix64(seed ^ 0x22));
}

void ModelConfig::validate() const {
  if (embed_dim == 0) throw ConfigError("embedding dimension must be >= 1");
  if (field_count == 0) throw ConfigError("field count must be >= 1");
  if (has_deep()) {
    if (hidden.empty()) throw ConfigError("deep models need at least one hidden width");
    for (auto h : hidden)
      if (h == 0) throw ConfigError("hidden widths must be >= 1");
  }
  if (has_dcn() && dcn_input_dim == 0) throw ConfigError("cross layer input dimension must be >= 1");
  if (linear_init_scale < 0.0 || embed_init_scale < 0.0) throw ConfigError("init scales must be >= 0");
  linear_opt.validate();
  embedding_opt.validate();
  dense_opt.validate();
}

SliceRange contiguous_slice(std::size_t length, std::size_t n, std::size_t rank) {
  if (n == 0 || rank >= n) throw ConfigError("contiguous_slice: rank outside [0, n)");
  const std::size_t base = length / n;
  const std::size_t extra = length % n;
  const std::size_t begin = rank * base + std::min(rank, extra);
  return {begin, begin + base + (rank < extra ? 1 : 0)};
}

DenseVector hashed_dense_input(std::span<const Feature> features, std::size_t dim) {
  if (dim == 0) throw DimensionError("hashed_dense_input: zero dimension");
  DenseVector x0(dim, 0.0);
  for (const auto& f : features) {
    const std::uint64_t h = splitmix64(f.key.key ^ (static_cast<std::uint64_t>(f.key.field) * 0x9e3779b97f4a7c15ULL));
    x0[h % dim] += static_cast<double>(f.value);
  }
  return x0;
}

}  // namespace desrec
