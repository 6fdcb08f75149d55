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

#include <cstdint>
#include <string_view>

namespace desrec {

std::uint64_t splitmix64(std::uint64_t x);

/// Seeded 64-bit FNV-1a with a splitmix64 finaliser. Stable across platforms
/// and runs; used for the feature hashing trick.
std::uint64_t hash64(std::string_view text, std::uint64_t seed);

/// Counter-based uniform stream: draw i of stream `key` is a pure function of
/// (key, i), so initial values never depend on insertion order.
class UniformStream {
 public:
  explicit UniformStream(std::uint64_t key) : state_(splitmix64(key)) {}
  /// Uniform in [0, 1) with 53 random bits.
  double next();

 private:
  std::uint64_t state_;
};

}  // namespace desrec
