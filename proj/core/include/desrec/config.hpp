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
#include <filesystem>
#include <string>

#include "desrec/collectives.hpp"
#include "desrec/model_config.hpp"
#include "desrec/synthetic.hpp"

namespace desrec {

inline constexpr int kConfigVersion = 1;

/// Everything a training run depends on; a run is reproducible from this alone.
struct RunConfig {
  ModelConfig model;
  std::size_t workers = 4;
  std::size_t batch = 4096;
  std::size_t epochs = 1;
  std::uint64_t seed = 42;
  ExecutionMode execution = ExecutionMode::kSequential;

  std::string data = "synthetic";  // "synthetic" or a Criteo TSV path
  std::size_t max_lines = 0;       // Criteo lines to read, 0 = all
  double train_fraction = 0.95;

  SyntheticSpec synthetic;
  std::size_t synthetic_samples = 50000;

  std::string out_dir;  // empty = no files written

  void validate() const;
};

/// Versioned JSON document. Missing keys keep their defaults; unknown
/// versions and invalid values throw ConfigError.
std::string to_json(const RunConfig& cfg);
RunConfig run_config_from_json(std::string_view text);
RunConfig load_run_config(const std::filesystem::path& path);

std::string to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(std::string_view text);

}  // namespace desrec
