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

#include "desrec/collectives.hpp"

#include <algorithm>
#include <cstdio>
#include <exception>
#include <numeric>
#include <sstream>
#include <thread>

#include "desrec/errors.hpp"
#include "json.hpp"

namespace desrec {

std::string_view to_string(Phase phase) {
  switch (phase) {
    case Phase::kForward: return "forward";
    case Phase::kBackward: return "backward";
    case Phase::kOptimizer: return "optimizer";
    case Phase::kEval: return "eval";
  }
  return "unknown";
}

std::string_view to_string(CollectiveKind kind) {
  return kind == CollectiveKind::kAllReduce ? "all_reduce" : "all_gather";
}

std::uint64_t LedgerRecord::total_bytes() const {
  return std::accumulate(bytes_by_rank.begin(), bytes_by_rank.end(), std::uint64_t{0});
}

double LedgerRecord::bytes_per_worker() const {
  if (bytes_by_rank.empty()) return 0.0;
  return static_cast<double>(total_bytes()) / static_cast<double>(bytes_by_rank.size());
}

void CommLedger::record(LedgerRecord rec) { records_.push_back(std::move(rec)); }

std::uint64_t CommLedger::total_bytes(Phase phase) const {
  std::uint64_t total = 0;
  for (const auto& r : records_)
    if (r.phase == phase) total += r.total_bytes();
  return total;
}

double CommLedger::bytes_per_worker(Phase phase) const {
  return static_cast<double>(total_bytes(phase)) / static_cast<double>(n_workers_);
}

std::size_t CommLedger::op_count(Phase phase) const {
  return static_cast<std::size_t>(
      std::count_if(records_.begin(), records_.end(), [&](const auto& r) { return r.phase == phase; }));
}

std::uint64_t CommLedger::total_bytes(Phase phase, std::string_view prefix) const {
  std::uint64_t total = 0;
  for (const auto& r : records_)
    if (r.phase == phase && std::string_view(r.op).starts_with(prefix)) total += r.total_bytes();
  return total;
}

std::size_t CommLedger::op_count(Phase phase, std::string_view prefix) const {
  return static_cast<std::size_t>(std::count_if(records_.begin(), records_.end(), [&](const auto& r) {
    return r.phase == phase && std::string_view(r.op).starts_with(prefix);
  }));
}

namespace {

std::string format_bytes(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string CommLedger::to_tsv() const {
  std::ostringstream out;
  out << "phase\top\tepoch\tbytes_per_worker\n";
  for (const auto& r : records_) {
    out << to_string(r.phase) << '\t' << r.op << '\t' << r.epoch << '\t'
        << format_bytes(r.bytes_per_worker()) << '\n';
  }
  return out.str();
}

std::string CommLedger::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : records_) {
    arr.push_back({{"phase", std::string(to_string(r.phase))},
                   {"op", r.op},
                   {"epoch", r.epoch},
                   {"bytes_per_worker", r.bytes_per_worker()}});
  }
  return arr.dump(2);
}

void NetworkParams::validate() const {
  if (!(alpha >= 0.0)) throw ConfigError("network latency alpha must be >= 0");
  if (!(bandwidth > 0.0)) throw ConfigError("network bandwidth must be > 0");
}

double ring_time(const NetworkParams& params, std::size_t n, double s_bytes) {
  if (n <= 1) return 0.0;
  const double nd = static_cast<double>(n);
  return 2.0 * (nd - 1.0) * (params.alpha + s_bytes / (nd * params.bandwidth));
}

double des_time(const NetworkParams& params, std::size_t n, std::span<const double> sub_sizes) {
  double total = 0.0;
  for (double s : sub_sizes) total += ring_time(params, n, s);
  return total;
}

std::vector<std::uint64_t> ring_allreduce_bytes(std::size_t n, std::size_t elements,
                                                std::size_t element_bytes) {
  std::vector<std::uint64_t> sent(n, 0);
  if (n <= 1) return sent;
  std::vector<std::uint64_t> chunk(n);
  for (std::size_t j = 0; j < n; ++j)
    chunk[j] = (elements / n + (j < elements % n ? 1 : 0)) * element_bytes;

  // Reduce-scatter: at step s rank r forwards its partial of chunk (r - s).
  for (std::size_t s = 0; s + 1 < n; ++s)
    for (std::size_t r = 0; r < n; ++r) sent[r] += chunk[(r + n - s) % n];
  // All-gather: rank r now owns chunk (r + 1) and forwards (r + 1 - s).
  for (std::size_t s = 0; s + 1 < n; ++s)
    for (std::size_t r = 0; r < n; ++r) sent[r] += chunk[(r + 1 + n - s) % n];
  return sent;
}

std::vector<std::uint64_t> ring_allgather_bytes(std::size_t n, std::size_t elements_per_rank,
                                                std::size_t element_bytes) {
  std::vector<std::uint64_t> sent(n, 0);
  if (n <= 1) return sent;
  const std::uint64_t block = elements_per_rank * element_bytes;
  for (std::size_t s = 0; s + 1 < n; ++s)
    for (std::size_t r = 0; r < n; ++r) sent[r] += block;
  return sent;
}

struct WorkerGroup::Rendezvous {
  std::mutex mu;
  std::condition_variable cv;
  std::uint64_t generation = 0;
  int arrived = 0;
  std::string op;
  CollectiveKind kind = CollectiveKind::kAllReduce;
  std::vector<std::optional<DenseVector>> slots;
  // Outcome of the most recently completed generation. A rank cannot start
  // the next generation before it has read this one, so one slot suffices.
  std::shared_ptr<const std::vector<DenseVector>> result;
  std::string broken;
  bool deadlock = false;
};

WorkerGroup::WorkerGroup(int n_workers, ExecutionMode mode, std::chrono::milliseconds timeout)
    : n_workers_(n_workers),
      mode_(mode),
      timeout_(timeout),
      ledger_(n_workers),
      rendezvous_(std::make_unique<Rendezvous>()) {
  if (n_workers < 1) throw ConfigError("worker group needs at least one worker");
  rendezvous_->slots.resize(static_cast<std::size_t>(n_workers));
}

WorkerGroup::~WorkerGroup() = default;

void WorkerGroup::check_contributions(std::span<const DenseVector> locals, std::string_view op) const {
  if (locals.size() != static_cast<std::size_t>(n_workers_)) {
    throw ProtocolError("collective '" + std::string(op) + "': " + std::to_string(locals.size()) +
                        " contributions for " + std::to_string(n_workers_) + " workers");
  }
  for (const auto& l : locals) {
    if (l.size() != locals.front().size()) {
      throw ProtocolError("collective '" + std::string(op) + "': payload length " +
                          std::to_string(l.size()) + " differs from " +
                          std::to_string(locals.front().size()));
    }
  }
}

DenseVector WorkerGroup::reduce(std::span<const DenseVector> locals, std::string_view op) {
  const std::size_t len = locals.front().size();
  LedgerRecord rec{phase_, std::string(op), epoch_, CollectiveKind::kAllReduce,
                   len * kWireBytesPerElement,
                   ring_allreduce_bytes(static_cast<std::size_t>(n_workers_), len)};
  ledger_.record(std::move(rec));

  if (n_workers_ == 1) return locals.front();
  DenseVector out(len);
  for (std::size_t k = 0; k < len; ++k) {
    double acc = to_wire(locals[0][k]);
    for (std::size_t r = 1; r < locals.size(); ++r) acc += to_wire(locals[r][k]);
    out[k] = to_wire(acc);
  }
  return out;
}

std::vector<DenseVector> WorkerGroup::gather(std::span<const DenseVector> locals, std::string_view op) {
  const std::size_t len = locals.front().size();
  LedgerRecord rec{phase_, std::string(op), epoch_, CollectiveKind::kAllGather,
                   len * kWireBytesPerElement,
                   ring_allgather_bytes(static_cast<std::size_t>(n_workers_), len)};
  ledger_.record(std::move(rec));

  std::vector<DenseVector> out(locals.begin(), locals.end());
  if (n_workers_ > 1)
    for (auto& v : out)
      for (auto& x : v) x = to_wire(x);
  return out;
}

DenseVector WorkerGroup::all_reduce_sum(std::span<const DenseVector> locals, std::string_view op) {
  check_contributions(locals, op);
  return reduce(locals, op);
}

std::vector<DenseVector> WorkerGroup::all_gather(std::span<const DenseVector> locals,
                                                 std::string_view op) {
  check_contributions(locals, op);
  return gather(locals, op);
}

DenseVector WorkerGroup::all_reduce_sum(int rank, std::span<const double> local, std::string_view op) {
  auto result = rendezvous(rank, local, op, CollectiveKind::kAllReduce);
  return result.front();
}

std::vector<DenseVector> WorkerGroup::all_gather(int rank, std::span<const double> local,
                                                 std::string_view op) {
  return rendezvous(rank, local, op, CollectiveKind::kAllGather);
}

std::vector<DenseVector> WorkerGroup::rendezvous(int rank, std::span<const double> local,
                                                 std::string_view op, CollectiveKind kind) {
  if (rank < 0 || rank >= n_workers_)
    throw ProtocolError("rank " + std::to_string(rank) + " outside group of " +
                        std::to_string(n_workers_));
  auto& rv = *rendezvous_;
  std::unique_lock lock(rv.mu);

  auto throw_broken = [&rv]() {
    if (rv.deadlock) throw DeadlockError(rv.broken);
    throw ProtocolError(rv.broken);
  };
  if (!rv.broken.empty()) throw_broken();

  const auto r = static_cast<std::size_t>(rank);
  if (rv.slots[r].has_value()) {
    rv.broken = "rank " + std::to_string(rank) + " contributed twice to '" + rv.op + "'";
    rv.cv.notify_all();
    throw_broken();
  }
  if (rv.arrived == 0) {
    rv.op = std::string(op);
    rv.kind = kind;
  } else {
    std::size_t expected = 0;
    for (const auto& s : rv.slots)
      if (s) expected = s->size();
    if (rv.op != op || rv.kind != kind || expected != local.size()) {
      rv.broken = "rank " + std::to_string(rank) + " called " + std::string(to_string(kind)) + " '" +
                  std::string(op) + "' with " + std::to_string(local.size()) +
                  " elements while the group is in " + std::string(to_string(rv.kind)) + " '" +
                  rv.op + "' with " + std::to_string(expected);
      rv.cv.notify_all();
      throw_broken();
    }
  }
  rv.slots[r] = DenseVector(local.begin(), local.end());
  ++rv.arrived;

  if (rv.arrived == n_workers_) {
    std::vector<DenseVector> locals;
    locals.reserve(rv.slots.size());
    for (auto& s : rv.slots) {
      locals.push_back(std::move(*s));
      s.reset();
    }
    std::vector<DenseVector> result;
    if (kind == CollectiveKind::kAllReduce)
      result.push_back(reduce(locals, op));
    else
      result = gather(locals, op);
    rv.result = std::make_shared<const std::vector<DenseVector>>(std::move(result));
    rv.arrived = 0;
    ++rv.generation;
    rv.cv.notify_all();
    return *rv.result;
  }

  const std::uint64_t my_generation = rv.generation;
  const bool completed = rv.cv.wait_for(lock, timeout_, [&] {
    return rv.generation != my_generation || !rv.broken.empty();
  });
  if (rv.generation != my_generation) return *rv.result;
  if (!completed) {
    rv.broken = "deadlock: rank " + std::to_string(rank) + " waited " +
                std::to_string(timeout_.count()) + " ms in '" + rv.op + "' with " +
                std::to_string(rv.arrived) + "/" + std::to_string(n_workers_) +
                " contributions at epoch " + std::to_string(epoch_);
    rv.deadlock = true;
    rv.cv.notify_all();
  }
  throw_broken();
  return {};
}

void WorkerGroup::abort(const std::string& reason) {
  auto& rv = *rendezvous_;
  std::lock_guard lock(rv.mu);
  if (rv.broken.empty()) rv.broken = "aborted: " + reason;
  rv.cv.notify_all();
}

void WorkerGroup::for_each_worker(const std::function<void(int)>& fn) {
  if (mode_ == ExecutionMode::kSequential || n_workers_ == 1) {
    for (int r = 0; r < n_workers_; ++r) fn(r);
    return;
  }
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n_workers_));
  {
    std::vector<std::jthread> threads;
    threads.reserve(errors.size());
    for (int r = 0; r < n_workers_; ++r) {
      threads.emplace_back([&, r] {
        try {
          fn(r);
        } catch (const std::exception& e) {
          errors[static_cast<std::size_t>(r)] = std::current_exception();
          abort("rank " + std::to_string(r) + " failed: " + e.what());
        } catch (...) {
          errors[static_cast<std::size_t>(r)] = std::current_exception();
          abort("rank " + std::to_string(r) + " failed");
        }
      });
    }
  }
  // Prefer the root cause over the errors it induced in peers.
  std::exception_ptr first;
  for (const auto& e : errors) {
    if (!e) continue;
    if (!first) first = e;
    try {
      std::rethrow_exception(e);
    } catch (const ProtocolError&) {
    } catch (...) {
      std::rethrow_exception(e);
    }
  }
  if (first) std::rethrow_exception(first);
}

void run_round(WorkerGroup& group, const std::function<std::vector<Payload>(int)>& produce,
               const std::function<void(int, std::span<const DenseVector>)>& consume) {
  const int n = group.size();
  if (group.mode() == ExecutionMode::kSequential || n == 1) {
    std::vector<std::vector<Payload>> produced(static_cast<std::size_t>(n));
    for (int r = 0; r < n; ++r) produced[static_cast<std::size_t>(r)] = produce(r);
    const std::size_t n_ops = produced.front().size();
    for (const auto& p : produced)
      if (p.size() != n_ops) throw ProtocolError("run_round: ranks produced different op counts");
    std::vector<DenseVector> aggregated;
    aggregated.reserve(n_ops);
    for (std::size_t j = 0; j < n_ops; ++j) {
      std::vector<DenseVector> locals;
      locals.reserve(produced.size());
      for (auto& p : produced) {
        if (p[j].op != produced.front()[j].op)
          throw ProtocolError("run_round: op '" + p[j].op + "' does not match '" + produced.front()[j].op + "'");
        locals.push_back(std::move(p[j].values));
      }
      aggregated.push_back(group.all_reduce_sum(locals, produced.front()[j].op));
    }
    for (int r = 0; r < n; ++r) consume(r, aggregated);
    return;
  }
  group.for_each_worker([&](int r) {
    auto payloads = produce(r);
    std::vector<DenseVector> aggregated;
    aggregated.reserve(payloads.size());
    for (const auto& p : payloads) aggregated.push_back(group.all_reduce_sum(r, p.values, p.op));
    consume(r, aggregated);
  });
}

}  // namespace desrec
