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

#include "desrec/criteo.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

#include "desrec/errors.hpp"
#include "desrec/hashing.hpp"

namespace desrec {

CriteoRecord parse_criteo(std::string_view line, std::size_t line_no) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::array<std::string_view, kCriteoColumns> cols;
  std::size_t n = 0;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    const auto piece = line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start);
    if (n < kCriteoColumns) cols[n] = piece;
    ++n;
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  if (n != kCriteoColumns)
    throw ParseError(line_no, "expected " + std::to_string(kCriteoColumns) + " tab-separated fields, found " +
                                  std::to_string(n));

  CriteoRecord rec;
  if (cols[0] == "0")
    rec.label = 0;
  else if (cols[0] == "1")
    rec.label = 1;
  else
    throw ParseError(line_no, "label must be 0 or 1, got '" + std::string(cols[0]) + "'");

  for (std::size_t i = 0; i < kCriteoIntegerFields; ++i) {
    const auto text = cols[1 + i];
    if (text.empty()) continue;
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size())
      throw ParseError(line_no, "integer column I" + std::to_string(i + 1) + " is not an integer");
    rec.integers[i] = v;
  }
  for (std::size_t j = 0; j < kCriteoCategoricalFields; ++j) {
    const auto text = cols[1 + kCriteoIntegerFields + j];
    if (!text.empty()) rec.categories[j] = std::string(text);
  }
  return rec;
}

Sample featurize(const CriteoRecord& record, std::uint64_t hash_seed) {
  Sample s;
  s.label = record.label;
  for (std::size_t i = 0; i < kCriteoIntegerFields; ++i) {
    if (!record.integers[i]) continue;
    const auto x = static_cast<double>(*record.integers[i]);
    const double value = x >= 0.0 ? std::log1p(x) : 0.0;
    s.features.push_back({{static_cast<std::uint32_t>(i), hash64("I" + std::to_string(i + 1), hash_seed)},
                          static_cast<float>(value)});
  }
  for (std::size_t j = 0; j < kCriteoCategoricalFields; ++j) {
    if (!record.categories[j]) continue;
    const std::string token = "C" + std::to_string(j + 1) + ":" + *record.categories[j];
    s.features.push_back({{static_cast<std::uint32_t>(kCriteoIntegerFields + j), hash64(token, hash_seed)}, 1.0f});
  }
  return s;
}

CriteoSplit load_criteo(const std::filesystem::path& path, std::uint64_t hash_seed, std::size_t max_lines,
                        double train_fraction) {
  if (!(train_fraction >= 0.0 && train_fraction <= 1.0)) throw ConfigError("train fraction must lie in [0, 1]");
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<Sample> samples;
  std::string line;
  std::size_t line_no = 0;
  while ((max_lines == 0 || line_no < max_lines) && std::getline(in, line)) {
    ++line_no;
    samples.push_back(featurize(parse_criteo(line, line_no), hash_seed));
  }
  const auto n_train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(samples.size())));
  CriteoSplit split;
  split.train.assign(std::make_move_iterator(samples.begin()),
                     std::make_move_iterator(samples.begin() + static_cast<std::ptrdiff_t>(n_train)));
  split.test.assign(std::make_move_iterator(samples.begin() + static_cast<std::ptrdiff_t>(n_train)),
                    std::make_move_iterator(samples.end()));
  return split;
}

}  // namespace desrec
