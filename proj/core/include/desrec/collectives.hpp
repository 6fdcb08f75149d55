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

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "desrec/math.hpp"

namespace desrec {

enum class Phase { kForward, kBackward, kOptimizer, kEval };
enum class CollectiveKind { kAllReduce, kAllGather };

std::string_view to_string(Phase phase);
std::string_view to_string(CollectiveKind kind);

/// Values cross a worker boundary as float32.
inline constexpr std::size_t kWireBytesPerElement = sizeof(float);

struct LedgerRecord {
  Phase phase = Phase::kForward;
  std::string op;
  std::uint64_t epoch = 0;
  CollectiveKind kind = CollectiveKind::kAllReduce;
  std::uint64_t payload_bytes = 0;           // per-rank contribution size S
  std::vector<std::uint64_t> bytes_by_rank;  // bytes each rank put on the wire

  std::uint64_t total_bytes() const;
  double bytes_per_worker() const;
};

/// Append-only record of every collective the group executed.
class CommLedger {
 public:
  explicit CommLedger(int n_workers) : n_workers_(n_workers) {}

  void record(LedgerRecord rec);
  void clear() { records_.clear(); }

  const std::vector<LedgerRecord>& records() const { return records_; }
  int n_workers() const { return n_workers_; }

  std::uint64_t total_bytes(Phase phase) const;
  double bytes_per_worker(Phase phase) const;
  std::size_t op_count(Phase phase) const;

  /// Totals restricted to ops whose name starts with `prefix`.
  std::uint64_t total_bytes(Phase phase, std::string_view prefix) const;
  std::size_t op_count(Phase phase, std::string_view prefix) const;

  /// Flat {phase, op, epoch, bytes_per_worker} record set.
  std::string to_tsv() const;
  std::string to_json() const;

 private:
  int n_workers_;
  std::vector<LedgerRecord> records_;
};

struct NetworkParams {
  double alpha = 0.0;      // latency, seconds
  double bandwidth = 1.0;  // C, bytes per second

  void validate() const;
};

/// 2(n-1)(alpha + s/(n C)).
double ring_time(const NetworkParams& params, std::size_t n, double s_bytes);

/// Sum of ring_time over the sub-operator payload sizes.
double des_time(const NetworkParams& params, std::size_t n, std::span<const double> sub_sizes);

/// Bytes each rank sends in a reduce-scatter + all-gather ring over `elements`
/// values split into n element-granular chunks (the first elements % n chunks
/// carry one extra element).
std::vector<std::uint64_t> ring_allreduce_bytes(std::size_t n, std::size_t elements,
                                                std::size_t element_bytes = kWireBytesPerElement);

/// Bytes each rank sends in a ring all-gather of equal-sized contributions.
std::vector<std::uint64_t> ring_allgather_bytes(std::size_t n, std::size_t elements_per_rank,
                                                std::size_t element_bytes = kWireBytesPerElement);

/// Round-trip a value through the float32 wire format.
inline double to_wire(double x) { return static_cast<double>(static_cast<float>(x)); }

enum class ExecutionMode { kSequential, kThreaded };

/**
 * N logical workers sharing an in-process aggregation channel.
 *
 * Collectives come in two flavours with identical results and accounting:
 * the round-robin form takes every rank's contribution in one call, the
 * rendezvous form is called once per rank (typically from that rank's thread)
 * and blocks until all N contributions for the op have arrived.
 *
 * Reduction is always performed in ascending rank order, so the result does
 * not depend on arrival order. With N > 1 every contribution and the reduced
 * result are rounded to float32, which is what the ledger charges for.
 */
class WorkerGroup {
 public:
  explicit WorkerGroup(int n_workers, ExecutionMode mode = ExecutionMode::kSequential,
                       std::chrono::milliseconds timeout = std::chrono::seconds(30));
  ~WorkerGroup();

  WorkerGroup(const WorkerGroup&) = delete;
  WorkerGroup& operator=(const WorkerGroup&) = delete;

  int size() const { return n_workers_; }
  ExecutionMode mode() const { return mode_; }

  std::uint64_t epoch() const { return epoch_; }
  void barrier() { ++epoch_; }

  Phase phase() const { return phase_; }
  void set_phase(Phase phase) { phase_ = phase; }

  CommLedger& ledger() { return ledger_; }
  const CommLedger& ledger() const { return ledger_; }

  DenseVector all_reduce_sum(std::span<const DenseVector> locals, std::string_view op);
  std::vector<DenseVector> all_gather(std::span<const DenseVector> locals, std::string_view op);

  DenseVector all_reduce_sum(int rank, std::span<const double> local, std::string_view op);
  std::vector<DenseVector> all_gather(int rank, std::span<const double> local, std::string_view op);

  /// Runs fn(rank) for every rank: in rank order, or one thread per rank.
  /// The first failure is rethrown after all ranks finish.
  void for_each_worker(const std::function<void(int)>& fn);

  /// Wakes every blocked rank with a ProtocolError; the group stays unusable.
  void abort(const std::string& reason);

 private:
  struct Rendezvous;

  std::vector<DenseVector> rendezvous(int rank, std::span<const double> local, std::string_view op,
                                      CollectiveKind kind);
  DenseVector reduce(std::span<const DenseVector> locals, std::string_view op);
  std::vector<DenseVector> gather(std::span<const DenseVector> locals, std::string_view op);
  void check_contributions(std::span<const DenseVector> locals, std::string_view op) const;

  int n_workers_;
  ExecutionMode mode_;
  std::chrono::milliseconds timeout_;
  std::uint64_t epoch_ = 0;
  Phase phase_ = Phase::kForward;
  CommLedger ledger_;
  std::unique_ptr<Rendezvous> rendezvous_;
};

/// Sets the group phase for the lifetime of the scope.
class PhaseScope {
 public:
  PhaseScope(WorkerGroup& group, Phase phase) : group_(group), saved_(group.phase()) {
    group_.set_phase(phase);
  }
  ~PhaseScope() { group_.set_phase(saved_); }
  PhaseScope(const PhaseScope&) = delete;
  PhaseScope& operator=(const PhaseScope&) = delete;

 private:
  WorkerGroup& group_;
  Phase saved_;
};

struct Payload {
  std::string op;
  DenseVector values;
};

/**
 * One forward aggregation round. Every rank produces its payloads, each op is
 * all-reduced across ranks, then every rank consumes the aggregated results.
 * Sequential groups run produce/reduce/consume as three loops; threaded groups
 * run each rank on its own thread through the rendezvous collectives.
 */
void run_round(WorkerGroup& group, const std::function<std::vector<Payload>(int)>& produce,
               const std::function<void(int, std::span<const DenseVector>)>& consume);

}  // namespace desrec
