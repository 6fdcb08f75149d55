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

#include "desrec/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "desrec/errors.hpp"
#include "desrec/math.hpp"

namespace desrec {

namespace {

constexpr std::size_t kCalibrationSamples = 20000;

}  // namespace

void SyntheticSpec::validate() const {
  if (field_count == 0 || vocab_per_field == 0) throw ConfigError("synthetic: cardinalities must be >= 1");
  if (min_tokens == 0 || max_tokens < min_tokens) throw ConfigError("synthetic: need 1 <= min_tokens <= max_tokens");
  if (!(field_presence > 0.0 && field_presence <= 1.0)) throw ConfigError("synthetic: field presence in (0, 1]");
  if (!(noise >= 0.0 && noise < 0.5)) throw ConfigError("synthetic: noise must lie in [0, 0.5)");
  if (!(positive_rate > 0.0 && positive_rate < 1.0)) throw ConfigError("synthetic: positive rate in (0, 1)");
  if (!(zipf_exponent >= 0.0) || !(weight_scale >= 0.0)) throw ConfigError("synthetic: exponent and scale >= 0");
}

FeatureKey SyntheticGenerator::key_of(std::uint32_t field, std::size_t token) {
  return {field, hash64("f" + std::to_string(field) + ":" + std::to_string(token), 0)};
}

double SyntheticGenerator::hidden_weight(std::uint32_t field, std::size_t token) const {
  return weight_of(key_of(field, token).key);
}

double SyntheticGenerator::weight_of(std::uint64_t key) const {
  UniformStream g(splitmix64(spec_.weight_seed) ^ key);
  const double u1 = 1.0 - g.next();
  const double u2 = g.next();
  return spec_.weight_scale * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t SyntheticGenerator::draw_token(double u) const {
  const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u * cdf_.back());
  return std::min(static_cast<std::size_t>(it - cdf_.begin()), cdf_.size() - 1);
}

void SyntheticGenerator::draw_features(UniformStream& rng, std::vector<Feature>& out) const {
  out.clear();
  const std::size_t span = spec_.max_tokens - spec_.min_tokens + 1;
  for (std::uint32_t f = 0; f < spec_.field_count; ++f) {
    if (spec_.field_presence < 1.0 && rng.next() >= spec_.field_presence) continue;
    std::size_t count = spec_.min_tokens;
    if (span > 1) count += std::min(span - 1, static_cast<std::size_t>(rng.next() * static_cast<double>(span)));
    for (std::size_t t = 0; t < count; ++t) out.push_back({key_of(f, draw_token(rng.next())), 1.0f});
  }
}

double SyntheticGenerator::score(const std::vector<Feature>& features) const {
  double s = 0.0;
  for (const auto& f : features) s += weight_of(f.key.key) * static_cast<double>(f.value);
  return s;
}

SyntheticGenerator::SyntheticGenerator(SyntheticSpec spec, std::uint64_t seed)
    : spec_(spec), rng_(splitmix64(seed) ^ 0x5eed) {
  spec_.validate();
  cdf_.resize(spec_.vocab_per_field);
  double acc = 0.0;
  for (std::size_t r = 0; r < cdf_.size(); ++r) {
    acc += 1.0 / std::pow(static_cast<double>(r + 1), spec_.zipf_exponent);
    cdf_[r] = acc;
  }

  // Pick the intercept so that the label marginal after noise hits the target.
  UniformStream cal(splitmix64(seed) ^ 0xca11);
  std::vector<double> scores(kCalibrationSamples);
  std::vector<Feature> buf;
  for (auto& s : scores) {
    draw_features(cal, buf);
    s = score(buf);
  }
  const double target = std::clamp((spec_.positive_rate - spec_.noise) / (1.0 - 2.0 * spec_.noise), 1e-3, 1.0 - 1e-3);
  if (spec_.separable) {
    std::sort(scores.begin(), scores.end());
    const auto idx = static_cast<std::size_t>((1.0 - target) * static_cast<double>(scores.size() - 1));
    intercept_ = -scores[idx];
  } else {
    double lo = -50.0, hi = 50.0;
    for (int it = 0; it < 100; ++it) {
      const double mid = 0.5 * (lo + hi);
      double mean = 0.0;
      for (double s : scores) mean += sigmoid(s + mid);
      mean /= static_cast<double>(scores.size());
      (mean < target ? lo : hi) = mid;
    }
    intercept_ = 0.5 * (lo + hi);
  }
}

Sample SyntheticGenerator::next() {
  Sample s;
  draw_features(rng_, s.features);
  const double z = score(s.features) + intercept_;
  int label = spec_.separable ? (z > 0.0 ? 1 : 0) : (rng_.next() < sigmoid(z) ? 1 : 0);
  if (spec_.noise > 0.0 && rng_.next() < spec_.noise) label = 1 - label;
  s.label = label;
  return s;
}

std::vector<Sample> SyntheticGenerator::take(std::size_t n) {
  std::vector<Sample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(next());
  return out;
}

std::vector<Sample> gen_synthetic(const SyntheticSpec& spec, std::size_t n_samples, std::uint64_t seed) {
  return SyntheticGenerator(spec, seed).take(n_samples);
}

}  // namespace desrec
