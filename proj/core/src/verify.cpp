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

#include "desrec/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

#include "desrec/collectives.hpp"
#include "desrec/errors.hpp"
#include "desrec/hashing.hpp"
#include "desrec/models.hpp"
#include "desrec/oracle.hpp"
#include "desrec/sparse_store.hpp"
#include "json.hpp"

namespace desrec {

namespace {

std::uint64_t case_seed(std::uint64_t base, ModelKind kind, std::size_t n, std::size_t trial) {
  return splitmix64(base ^ splitmix64((static_cast<std::uint64_t>(kind) << 40) ^ (n << 20) ^ trial));
}

std::string fmt(const char* f, double a, double b) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

void fail(CheckResult& r, const std::string& what) {
  if (r.failures == 0) r.first_failure = what;
  ++r.failures;
}

std::string label(ModelKind kind) { return std::string(to_string(kind)); }

SparseBatch draw_batch(std::mt19937_64& rng, std::size_t fields, std::size_t tokens, bool unit_values,
                       std::uint64_t key_salt) {
  std::uniform_int_distribution<std::size_t> b_dist(1, 8);
  const std::size_t b = b_dist(rng);
  const std::size_t per_sample = std::min<std::size_t>(20, 100 / b);
  std::uniform_int_distribution<std::size_t> m_dist(1, per_sample);
  std::uniform_int_distribution<std::size_t> f_dist(0, fields - 1);
  std::uniform_int_distribution<std::size_t> t_dist(0, tokens - 1);
  std::uniform_real_distribution<double> v_dist(-2.0, 2.0);
  SparseBatch batch;
  for (std::size_t s = 0; s < b; ++s) {
    Sample smp;
    smp.label = static_cast<int>(rng() & 1);
    const std::size_t m = m_dist(rng);
    for (std::size_t j = 0; j < m; ++j) {
      const auto field = static_cast<std::uint32_t>(f_dist(rng));
      const std::uint64_t key = splitmix64(key_salt + t_dist(rng));
      smp.features.push_back({{field, key}, unit_values ? 1.0f : static_cast<float>(v_dist(rng))});
    }
    batch.samples.push_back(std::move(smp));
  }
  return batch;
}

bool close(double a, double b, double tol) { return std::abs(a - b) <= tol * std::max(1.0, std::abs(b)); }

// --- gradient lookup in the per-worker output ---------------------------

double sparse_grad(const std::vector<FeatureKey>& keys, const DenseVector& grad, std::size_t dim,
                   const FeatureKey& key, std::size_t coord) {
  auto it = std::lower_bound(keys.begin(), keys.end(), key);
  if (it == keys.end() || *it != key) return 0.0;
  return grad[static_cast<std::size_t>(it - keys.begin()) * dim + coord];
}

double des_grad(const DesModel& model, const std::vector<WorkerGradients>& grads, const ParamRef& p) {
  const std::size_t n = model.n_workers();
  const auto& cfg = model.config();
  switch (p.kind) {
    case ParamRef::Kind::kLinear: {
      const auto& g = grads[shard_of(p.key.field, n)];
      return sparse_grad(g.linear_keys, g.linear, 1, p.key, 0);
    }
    case ParamRef::Kind::kEmbedding: {
      const auto& g = grads[shard_of(p.key.field, n)];
      return sparse_grad(g.embedding_keys, g.embedding, cfg.embed_dim, p.key, p.index);
    }
    case ParamRef::Kind::kFc1: {
      const auto& g = grads[shard_of(static_cast<std::uint32_t>(p.tensor), n)];
      auto it = g.fc1.find(static_cast<std::uint32_t>(p.tensor));
      return it == g.fc1.end() ? 0.0 : it->second[p.index];
    }
    case ParamRef::Kind::kCrossW:
      for (std::size_t r = 0; r < n; ++r) {
        const auto range = model.cross_range(r);
        if (p.index >= range.begin && p.index < range.end) return grads[r].cross_w[p.index - range.begin];
      }
      throw DimensionError("cross weight index outside every slice");
    case ParamRef::Kind::kBias: return grads[0].dense.bias[0];
    case ParamRef::Kind::kFc1Bias: return grads[0].dense.fc1_bias[p.index];
    case ParamRef::Kind::kUpperW: return grads[0].dense.upper_w[p.tensor][p.index];
    case ParamRef::Kind::kUpperB: return grads[0].dense.upper_b[p.tensor][p.index];
    case ParamRef::Kind::kCrossB: return grads[0].dense.cross_b[p.index];
    case ParamRef::Kind::kHead: return grads[0].dense.head[p.index];
  }
  return 0.0;
}

std::string describe(const ParamRef& p) {
  static const char* names[] = {"linear", "embedding", "bias",   "fc1",    "fc1_bias",
                                "upper_w", "upper_b",  "cross_w", "cross_b", "head"};
  std::ostringstream out;
  out << names[static_cast<int>(p.kind)] << "[field=" << p.key.field << " tensor=" << p.tensor
      << " index=" << p.index << "]";
  return out.str();
}

// Parameters the gradient check probes: the weights-rich tensors named by the
// criteria plus the replicated ones.
std::vector<ParamRef> probe_params(const ModelConfig& cfg, const SparseBatch& batch, std::mt19937_64& rng) {
  std::vector<FeatureKey> keys;
  std::vector<std::uint32_t> fields;
  for (const auto& s : batch.samples)
    for (const auto& f : s.features) {
      keys.push_back(f.key);
      fields.push_back(f.key.field);
    }
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  std::sort(fields.begin(), fields.end());
  fields.erase(std::unique(fields.begin(), fields.end()), fields.end());
  std::shuffle(keys.begin(), keys.end(), rng);

  std::vector<ParamRef> out;
  const std::size_t take = std::min<std::size_t>(keys.size(), 8);
  const std::size_t d = cfg.embed_dim;
  using K = ParamRef::Kind;
  if (cfg.has_linear()) {
    for (std::size_t i = 0; i < take; ++i) out.push_back({K::kLinear, keys[i], 0, 0});
    out.push_back({K::kBias, {}, 0, 0});
  }
  if (cfg.has_embedding())
    for (std::size_t i = 0; i < take; ++i) out.push_back({K::kEmbedding, keys[i], 0, rng() % d});
  if (cfg.has_deep()) {
    const std::size_t h = cfg.first_fc_width();
    for (std::size_t i = 0; i < 8; ++i) out.push_back({K::kFc1, {}, fields[rng() % fields.size()], rng() % (d * h)});
    out.push_back({K::kFc1Bias, {}, 0, rng() % h});
    std::vector<std::size_t> widths = cfg.hidden;
    widths.push_back(1);
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
      out.push_back({K::kUpperW, {}, l, rng() % (widths[l] * widths[l + 1])});
      out.push_back({K::kUpperB, {}, l, rng() % widths[l + 1]});
    }
  }
  if (cfg.has_dcn()) {
    for (std::size_t i = 0; i < cfg.dcn_input_dim; ++i) out.push_back({K::kCrossW, {}, 0, i});
    out.push_back({K::kCrossB, {}, 0, rng() % cfg.dcn_input_dim});
    out.push_back({K::kHead, {}, 0, rng() % cfg.dcn_input_dim});
    out.push_back({K::kBias, {}, 0, 0});
  }
  return out;
}

struct Difference {
  double central = 0.0;
  double forward = 0.0;
  double backward = 0.0;
};

Difference finite_difference(MonolithicModel& m, const ParamRef& p, const SparseBatch& batch) {
  double& w = m.at(p);
  const double w0 = w;
  const double h = 1e-6 * std::max(1.0, std::abs(w0));
  const double mid = m.loss(batch);
  w = w0 + h;
  const double up = m.loss(batch);
  w = w0 - h;
  const double down = m.loss(batch);
  w = w0;
  return {(up - down) / (2.0 * h), (up - mid) / h, (mid - down) / h};
}

}  // namespace

RandomInstance random_instance(ModelKind kind, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  RandomInstance inst;
  inst.seed = seed;
  auto& cfg = inst.config;
  cfg.kind = kind;
  cfg.field_count = 1 + rng() % 10;
  cfg.embed_dim = 1 + rng() % 8;
  cfg.hidden = {1 + rng() % 12};
  if (rng() & 1) cfg.hidden.push_back(1 + rng() % 6);
  cfg.dcn_input_dim = 1 + rng() % 12;
  cfg.seed = rng();
  cfg.linear_init_scale = 0.5;
  cfg.embed_init_scale = 0.5;
  const std::size_t tokens = 1 + rng() % std::max<std::size_t>(1, 100 / cfg.field_count);
  const bool unit = (rng() & 1) != 0;
  inst.batch = draw_batch(rng, cfg.field_count, tokens, unit, seed);
  // Half the follow-up keys repeat, half are fresh.
  inst.second = draw_batch(rng, cfg.field_count, 2 * tokens, unit, seed);
  return inst;
}

CheckResult check_equivalence(ModelKind kind, std::size_t n, const VerifyOptions& opts) {
  CheckResult r;
  r.name = "equivalence[" + label(kind) + ",N=" + std::to_string(n) + "]";
  for (std::size_t t = 0; t < opts.equivalence_trials; ++t) {
    const std::uint64_t seed = case_seed(opts.seed, kind, n, t);
    const auto inst = random_instance(kind, seed);
    const auto mode = (t % 2 == 1 && n > 1) ? ExecutionMode::kThreaded : ExecutionMode::kSequential;
    WorkerGroup group(static_cast<int>(n), mode);
    DesModel model(inst.config, group);
    const std::string tag = " (seed " + std::to_string(seed) + ")";

    auto compare = [&](const SparseBatch& batch, const ForwardOutput& out, const char* stage) {
      const auto oracle = MonolithicModel::gather(model);
      const auto ref = oracle.forward(batch, n == 1 ? FmForm::kLinear : FmForm::kPairwise);
      const auto pair = n == 1 ? oracle.forward(batch, FmForm::kPairwise) : ref;
      for (std::size_t s = 0; s < ref.size(); ++s) {
        const double err = std::abs(out.probs[s] - pair[s]) / std::max(1.0, std::abs(pair[s]));
        r.worst = std::max(r.worst, err);
        if (n == 1 && out.probs[s] != ref[s]) {
          fail(r, std::string(stage) + ": N=1 output not bitwise equal to the reference" + tag);
          return;
        }
        if (!close(out.probs[s], pair[s], opts.equivalence_tol)) {
          fail(r, std::string(stage) + fmt(": des %.17g vs reference %.17g", out.probs[s], pair[s]) + tag);
          return;
        }
      }
    };

    ++r.cases;
    const auto routed = route(inst.batch, n);
    const auto out = model.forward(routed);
    compare(inst.batch, out, "initial forward");

    const double expected = forward_bytes_per_worker(inst.config, inst.batch.size(), n);
    const auto& ledger = group.ledger();
    if (ledger.bytes_per_worker(Phase::kForward) != expected)
      fail(r, fmt("forward bytes %.17g, closed form %.17g", ledger.bytes_per_worker(Phase::kForward), expected) +
                  tag);
    const std::size_t expected_ops = n > 1 ? aggregation_plan(inst.config, inst.batch.size()).size() : 0;
    if (n > 1 && ledger.op_count(Phase::kForward) != expected_ops)
      fail(r, "forward op count " + std::to_string(ledger.op_count(Phase::kForward)) + ", expected " +
                  std::to_string(expected_ops) + tag);

    model.apply(model.backward(routed));
    group.barrier();
    if (ledger.total_bytes(Phase::kBackward) != 0 || ledger.total_bytes(Phase::kOptimizer) != 0)
      fail(r, "backward or optimizer phase charged bytes" + tag);
    if (!model.replicas_identical()) fail(r, "replicas diverged after one step" + tag);

    const auto eval = model.forward(route(inst.second, n), ForwardMode::kEval);
    compare(inst.second, eval, "post-step eval");
  }
  return r;
}

CheckResult check_fm_identity(const VerifyOptions& opts) {
  CheckResult r;
  r.name = "fm-identity";
  for (std::size_t t = 0; t < opts.fm_identity_trials; ++t) {
    const std::uint64_t seed = case_seed(opts.seed, ModelKind::kFm, 0, t);
    std::mt19937_64 rng(seed);
    const std::size_t m = rng() % 31;
    const std::size_t d = 1 + rng() % 16;
    const std::size_t shards = 1 + rng() % 8;
    std::uniform_real_distribution<double> vd(-1.0, 1.0), xd(-2.0, 2.0);
    std::vector<DenseVector> v(m, DenseVector(d));
    std::vector<double> x(m);
    std::vector<std::size_t> owner(m);
    for (std::size_t i = 0; i < m; ++i) {
      for (auto& c : v[i]) c = vd(rng);
      x[i] = xd(rng);
      owner[i] = rng() % shards;
    }
    // Per-shard partial sums, aggregated in rank order.
    DenseVector m1(d, 0.0);
    double m2 = 0.0;
    for (std::size_t s = 0; s < shards; ++s) {
      DenseVector p1(d, 0.0), vx(d);
      double p2 = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        if (owner[i] != s) continue;
        for (std::size_t k = 0; k < d; ++k) {
          vx[k] = v[i][k] * x[i];
          p1[k] += vx[k];
        }
        p2 += dot(vx, vx);
      }
      for (std::size_t k = 0; k < d; ++k) m1[k] += p1[k];
      m2 += p2;
    }
    const double substituted =
        opts.fault == Fault::kFmCombinerSign ? 0.5 * dot(m1, m1) + 0.5 * m2 : fm2_combine(m1, m2);
    const double brute = fm2_pairwise(v, x);
    const double err = std::abs(substituted - brute);
    r.worst = std::max(r.worst, err);
    ++r.cases;
    if (err > opts.fm_identity_tol)
      fail(r, fmt("pairwise %.17g vs substituted %.17g", brute, substituted) + " (seed " + std::to_string(seed) +
                  ")");
  }
  return r;
}

CheckResult check_gradients(ModelKind kind, const VerifyOptions& opts, std::span<const std::size_t> workers,
                            double tol, std::string_view name) {
  CheckResult r;
  r.name = std::string(name) + "[" + label(kind) + "]";
  if (workers.empty()) return r;
  for (std::size_t t = 0; t < opts.gradient_trials; ++t) {
    const std::size_t n = workers[t % workers.size()];
    const std::uint64_t seed = case_seed(opts.seed ^ 0x6772ULL, kind, n, t);
    const auto inst = random_instance(kind, seed);
    WorkerGroup group(static_cast<int>(n));
    DesModel model(inst.config, group);
    const auto routed = route(inst.batch, n);
    model.forward(routed);
    const auto grads = model.backward(routed);
    auto oracle = MonolithicModel::gather(model);
    std::mt19937_64 rng(seed);
    ++r.cases;
    for (const auto& p : probe_params(inst.config, inst.batch, rng)) {
      const double g = des_grad(model, grads, p);
      const auto fd = finite_difference(oracle, p, inst.batch);
      const double scale = std::max(std::abs(fd.central), 1e-4);
      ++r.probes;
      // Curvature moves the one-sided slopes apart by about h |f''|; a kink
      // moves them apart by the jump in slope.
      if (std::abs(fd.forward - fd.backward) >
          1e-3 * std::max({1.0, std::abs(fd.forward), std::abs(fd.backward)})) {
        ++r.skipped;
        continue;
      }
      const double err = std::abs(g - fd.central) / scale;
      r.worst = std::max(r.worst, err);
      if (err > tol) {
        fail(r, describe(p) + fmt(": backward %.12g vs finite difference %.12g", g, fd.central) + " at N=" +
                    std::to_string(n) + " (seed " + std::to_string(seed) + ")");
        break;
      }
    }
  }
  if (r.probes > 0 && static_cast<double>(r.skipped) > opts.max_kink_fraction * static_cast<double>(r.probes))
    fail(r, std::to_string(r.skipped) + " of " + std::to_string(r.probes) + " probes sat on a kink");
  return r;
}

CheckResult check_backward_zero_bytes(const VerifyOptions& opts) {
  CheckResult r;
  r.name = "backward-zero-bytes";
  for (auto kind : opts.models)
    for (auto n : opts.workers) {
      const std::uint64_t seed = case_seed(opts.seed ^ 0x627766ULL, kind, n, 0);
      const auto inst = random_instance(kind, seed);
      WorkerGroup group(static_cast<int>(n));
      DesModel model(inst.config, group);
      for (int step = 0; step < 3; ++step) model.train_step(route(step % 2 ? inst.second : inst.batch, n));
      ++r.cases;
      const auto bytes = group.ledger().total_bytes(Phase::kBackward);
      r.worst = std::max(r.worst, static_cast<double>(bytes));
      if (bytes != 0 || (n > 1 && group.ledger().total_bytes(Phase::kForward) == 0))
        fail(r, label(kind) + " N=" + std::to_string(n) + ": backward bytes " + std::to_string(bytes) +
                    " (seed " + std::to_string(seed) + ")");
    }
  return r;
}

VerifyReport run_verify(const VerifyOptions& opts) {
  VerifyReport report;
  for (auto kind : opts.models)
    for (auto n : opts.workers) report.checks.push_back(check_equivalence(kind, n, opts));
  report.checks.push_back(check_fm_identity(opts));
  for (auto kind : opts.models)
    report.checks.push_back(check_gradients(kind, opts, opts.gradient_workers, opts.gradient_tol));
  if (!opts.sharded_gradient_workers.empty())
    for (auto kind : opts.models)
      report.checks.push_back(check_gradients(kind, opts, opts.sharded_gradient_workers, opts.sharded_gradient_tol,
                                              "gradient-sharded"));
  report.checks.push_back(check_backward_zero_bytes(opts));
  return report;
}

bool CheckResult::passed() const { return failures == 0 && cases > 0; }

bool VerifyReport::passed() const {
  return !checks.empty() && std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed(); });
}

std::string VerifyReport::to_text() const {
  std::ostringstream out;
  for (const auto& c : checks) {
    char worst[40];
    std::snprintf(worst, sizeof worst, "%.3g", c.worst);
    out << (c.passed() ? "PASS " : "FAIL ") << c.name << "  cases=" << c.cases << " failures=" << c.failures
        << " worst=" << worst;
    if (c.skipped > 0) out << " kinks=" << c.skipped << '/' << c.probes;
    out << '\n';
    if (!c.passed() && !c.first_failure.empty()) out << "     " << c.first_failure << '\n';
  }
  out << (passed() ? "verify: all checks passed\n" : "verify: FAILED\n");
  return out.str();
}

std::string VerifyReport::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& c : checks)
    arr.push_back({{"name", c.name},
                   {"passed", c.passed()},
                   {"cases", c.cases},
                   {"failures", c.failures},
                   {"worst", c.worst},
                   {"probes", c.probes},
                   {"skipped", c.skipped},
                   {"first_failure", c.first_failure}});
  return nlohmann::json{{"passed", passed()}, {"checks", arr}}.dump(2);
}

}  // namespace desrec
