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

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "desrec/batch.hpp"

namespace desrec {

inline constexpr std::size_t kCriteoIntegerFields = 13;
inline constexpr std::size_t kCriteoCategoricalFields = 26;
inline constexpr std::size_t kCriteoColumns = 1 + kCriteoIntegerFields + kCriteoCategoricalFields;

struct CriteoRecord {
  int label = 0;
  std::array<std::optional<std::int64_t>, kCriteoIntegerFields> integers;
  std::array<std::optional<std::string>, kCriteoCategoricalFields> categories;
};

/// Parses one TSV line (label, I1..I13, C1..C26). Throws ParseError carrying
/// `line_no` on a wrong column count or a malformed label or integer.
CriteoRecord parse_criteo(std::string_view line, std::size_t line_no = 0);

/// Integer column i becomes field i with value log(1 + x) (0 for x < 0);
/// categorical column j becomes field 13 + j with value 1. Missing columns
/// emit nothing.
Sample featurize(const CriteoRecord& record, std::uint64_t hash_seed);

struct CriteoSplit {
  std::vector<Sample> train;
  std::vector<Sample> test;
};

/// Reads up to `max_lines` lines (0 = all) and splits them by position: the
/// first `train_fraction` of the lines train, the rest test.
CriteoSplit load_criteo(const std::filesystem::path& path, std::uint64_t hash_seed, std::size_t max_lines = 0,
                        double train_fraction = 0.95);

}  // namespace desrec
