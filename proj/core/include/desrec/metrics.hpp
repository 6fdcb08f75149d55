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

#include <span>

namespace desrec {

/// Rank-based ROC AUC; tied scores count one half. Throws
/// UndefinedMetricError unless both classes are present.
double auc(std::span<const double> scores, std::span<const int> labels);

/// Mean binary cross-entropy with probabilities clamped to [eps, 1 - eps].
double logloss(std::span<const double> probs, std::span<const int> labels);

}  // namespace desrec
