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
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "desrec/batch.hpp"
#include "desrec/model_config.hpp"

namespace desrec {

/// A seeded random model shape plus a batch drawn for it. Small enough that
/// the pairwise reference stays cheap: at most 10 fields, 100 feature
/// occurrences per batch and d <= 8.
struct RandomInstance {
  std::uint64_t seed = 0;
  ModelConfig config;
  SparseBatch batch;
  SparseBatch second;  // a follow-up batch with partly unseen keys
};

RandomInstance random_instance(ModelKind kind, std::uint64_t seed);

/// Deliberate defects for mutation testing of the checks themselves.
enum class Fault {
  kNone,
  kFmCombinerSign,  // combiner computes 1/2 <M1,M1> + 1/2 M2
};

struct VerifyOptions {
  std::vector<ModelKind> models = {ModelKind::kLr, ModelKind::kFm, ModelKind::kWdl, ModelKind::kDeepFm,
                                   ModelKind::kDcn};
  std::vector<std::size_t> workers = {1, 2, 4, 8};
  std::size_t equivalence_trials = 100;  // per model and N
  std::size_t gradient_trials = 50;      // per model
  std::size_t fm_identity_trials = 1000;
  std::uint64_t seed = 1;
  Fault fault = Fault::kNone;

  double equivalence_tol = 1e-5;  // relative, max(1, |ref|) scaled
  double fm_identity_tol = 1e-10; // absolute
  double gradient_tol = 1e-4;     // relative to max(|fd|, 1e-4)
  // The strict gradient check runs where the forward is pure double (N=1);
  // sharded forwards round aggregates to float32, so their gradients are
  // checked against the same finite differences with a looser bound.
  std::vector<std::size_t> gradient_workers = {1};
  std::vector<std::size_t> sharded_gradient_workers = {2, 4, 8};
  double sharded_gradient_tol = 1e-3;
  double max_kink_fraction = 0.05;  // probes skipped as non-differentiable
};

struct CheckResult {
  std::string name;
  std::size_t cases = 0;
  std::size_t failures = 0;
  std::size_t probes = 0;   // individual comparisons made
  std::size_t skipped = 0;  // probes at a non-differentiable point
  double worst = 0.0;         // largest observed error measure
  std::string first_failure;  // includes the instance seed for replay

  bool passed() const;
};

struct VerifyReport {
  std::vector<CheckResult> checks;

  bool passed() const;
  std::string to_text() const;
  std::string to_json() const;
};

/// DES forward vs the monolithic reference over the N grid, before and after
/// one training step; also checks forward ledger bytes against the closed
/// form and that backward and optimizer phases charge nothing.
CheckResult check_equivalence(ModelKind kind, std::size_t n_workers, const VerifyOptions& opts);

/// Pairwise order-2 FM sum vs the aggregated linear form in double precision.
CheckResult check_fm_identity(const VerifyOptions& opts);

/// Backward gradients vs central finite differences of the reference loss,
/// cycling through `workers`. Probes where the one-sided differences disagree
/// (a ReLU kink inside the step) are counted as skipped; the check fails when
/// more than opts.max_kink_fraction of the probes are skipped.
CheckResult check_gradients(ModelKind kind, const VerifyOptions& opts, std::span<const std::size_t> workers,
                            double tol, std::string_view name = "gradient");

/// Backward ledger bytes are exactly zero for every model and N.
CheckResult check_backward_zero_bytes(const VerifyOptions& opts);

VerifyReport run_verify(const VerifyOptions& opts);

}  // namespace desrec
