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

#include "desrec/config.hpp"

#include <fstream>
#include <sstream>

#include "desrec/errors.hpp"
#include "json.hpp"

namespace desrec {

using nlohmann::json;

namespace {

json optimizer_json(const OptimizerConfig& o) {
  return {{"kind", to_string(o.kind)}, {"learning_rate", o.learning_rate}, {"ftrl_alpha", o.ftrl_alpha},
          {"ftrl_beta", o.ftrl_beta},  {"l1", o.l1},                       {"l2", o.l2},
          {"beta1", o.beta1},          {"beta2", o.beta2},                 {"epsilon", o.epsilon}};
}

OptimizerConfig optimizer_from(const json& j, OptimizerConfig o) {
  if (j.contains("kind")) {
    // A kind change starts from that optimizer's defaults.
    const auto kind = optimizer_kind_from_string(j.at("kind").get<std::string>());
    if (kind != o.kind) {
      o = kind == OptimizerKind::kFtrl ? OptimizerConfig::ftrl()
          : kind == OptimizerKind::kAdam ? OptimizerConfig::adam()
                                         : OptimizerConfig::adagrad();
    }
  }
  o.learning_rate = j.value("learning_rate", o.learning_rate);
  o.ftrl_alpha = j.value("ftrl_alpha", o.ftrl_alpha);
  o.ftrl_beta = j.value("ftrl_beta", o.ftrl_beta);
  o.l1 = j.value("l1", o.l1);
  o.l2 = j.value("l2", o.l2);
  o.beta1 = j.value("beta1", o.beta1);
  o.beta2 = j.value("beta2", o.beta2);
  o.epsilon = j.value("epsilon", o.epsilon);
  return o;
}

json model_json(const ModelConfig& m) {
  return {{"kind", to_string(m.kind)},
          {"embed_dim", m.embed_dim},
          {"field_count", m.field_count},
          {"hidden", m.hidden},
          {"dcn_input_dim", m.dcn_input_dim},
          {"seed", m.seed},
          {"linear_init_scale", m.linear_init_scale},
          {"embed_init_scale", m.embed_init_scale},
          {"optimizers",
           {{"linear", optimizer_json(m.linear_opt)},
            {"embedding", optimizer_json(m.embedding_opt)},
            {"dense", optimizer_json(m.dense_opt)}}}};
}

ModelConfig model_from(const json& j, ModelConfig m) {
  if (j.contains("kind")) m.kind = model_kind_from_string(j.at("kind").get<std::string>());
  m.embed_dim = j.value("embed_dim", m.embed_dim);
  m.field_count = j.value("field_count", m.field_count);
  if (j.contains("hidden")) m.hidden = j.at("hidden").get<std::vector<std::size_t>>();
  m.dcn_input_dim = j.value("dcn_input_dim", m.dcn_input_dim);
  m.seed = j.value("seed", m.seed);
  m.linear_init_scale = j.value("linear_init_scale", m.linear_init_scale);
  m.embed_init_scale = j.value("embed_init_scale", m.embed_init_scale);
  if (j.contains("optimizers")) {
    const auto& o = j.at("optimizers");
    if (o.contains("linear")) m.linear_opt = optimizer_from(o.at("linear"), m.linear_opt);
    if (o.contains("embedding")) m.embedding_opt = optimizer_from(o.at("embedding"), m.embedding_opt);
    if (o.contains("dense")) m.dense_opt = optimizer_from(o.at("dense"), m.dense_opt);
  }
  return m;
}

json synthetic_json(const SyntheticSpec& s) {
  return {{"field_count", s.field_count},     {"vocab_per_field", s.vocab_per_field},
          {"min_tokens", s.min_tokens},       {"max_tokens", s.max_tokens},
          {"field_presence", s.field_presence}, {"zipf_exponent", s.zipf_exponent},
          {"weight_scale", s.weight_scale},   {"weight_seed", s.weight_seed},
          {"noise", s.noise},                 {"positive_rate", s.positive_rate},
          {"separable", s.separable}};
}

SyntheticSpec synthetic_from(const json& j, SyntheticSpec s) {
  s.field_count = j.value("field_count", s.field_count);
  s.vocab_per_field = j.value("vocab_per_field", s.vocab_per_field);
  s.min_tokens = j.value("min_tokens", s.min_tokens);
  s.max_tokens = j.value("max_tokens", s.max_tokens);
  s.field_presence = j.value("field_presence", s.field_presence);
  s.zipf_exponent = j.value("zipf_exponent", s.zipf_exponent);
  s.weight_scale = j.value("weight_scale", s.weight_scale);
  s.weight_seed = j.value("weight_seed", s.weight_seed);
  s.noise = j.value("noise", s.noise);
  s.positive_rate = j.value("positive_rate", s.positive_rate);
  s.separable = j.value("separable", s.separable);
  return s;
}

json parse(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
}

void check_version(const json& j) {
  const int version = j.value("version", kConfigVersion);
  if (version != kConfigVersion)
    throw ConfigError("unsupported config version " + std::to_string(version) + " (expected " +
                      std::to_string(kConfigVersion) + ")");
}

}  // namespace

void RunConfig::validate() const {
  model.validate();
  if (workers == 0) throw ConfigError("workers must be >= 1");
  if (batch == 0) throw ConfigError("batch size must be >= 1");
  if (data.empty()) throw ConfigError("data source must be 'synthetic' or a path");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train fraction must lie in (0, 1)");
  if (data == "synthetic") {
    synthetic.validate();
    if (synthetic_samples == 0) throw ConfigError("synthetic sample count must be >= 1");
  }
}

std::string to_json(const ModelConfig& cfg) {
  json j = model_json(cfg);
  j["version"] = kConfigVersion;
  return j.dump(2);
}

ModelConfig model_config_from_json(std::string_view text) {
  const json j = parse(text);
  check_version(j);
  try {
    auto m = model_from(j, ModelConfig{});
    m.validate();
    return m;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad model config: ") + e.what());
  }
}

std::string to_json(const RunConfig& cfg) {
  json j{{"version", kConfigVersion},
         {"model", model_json(cfg.model)},
         {"run",
          {{"workers", cfg.workers},
           {"batch", cfg.batch},
           {"epochs", cfg.epochs},
           {"seed", cfg.seed},
           {"execution", cfg.execution == ExecutionMode::kThreaded ? "threaded" : "sequential"},
           {"out", cfg.out_dir}}},
         {"data",
          {{"source", cfg.data},
           {"max_lines", cfg.max_lines},
           {"train_fraction", cfg.train_fraction},
           {"synthetic_samples", cfg.synthetic_samples},
           {"synthetic", synthetic_json(cfg.synthetic)}}}};
  return j.dump(2);
}

RunConfig run_config_from_json(std::string_view text) {
  const json j = parse(text);
  check_version(j);
  RunConfig cfg;
  try {
    if (j.contains("model")) cfg.model = model_from(j.at("model"), cfg.model);
    if (j.contains("run")) {
      const auto& r = j.at("run");
      cfg.workers = r.value("workers", cfg.workers);
      cfg.batch = r.value("batch", cfg.batch);
      cfg.epochs = r.value("epochs", cfg.epochs);
      cfg.seed = r.value("seed", cfg.seed);
      const std::string mode = r.value("execution", std::string("sequential"));
      if (mode == "threaded")
        cfg.execution = ExecutionMode::kThreaded;
      else if (mode == "sequential")
        cfg.execution = ExecutionMode::kSequential;
      else
        throw ConfigError("execution must be 'sequential' or 'threaded'");
      cfg.out_dir = r.value("out", cfg.out_dir);
    }
    if (j.contains("data")) {
      const auto& d = j.at("data");
      cfg.data = d.value("source", cfg.data);
      cfg.max_lines = d.value("max_lines", cfg.max_lines);
      cfg.train_fraction = d.value("train_fraction", cfg.train_fraction);
      cfg.synthetic_samples = d.value("synthetic_samples", cfg.synthetic_samples);
      if (d.contains("synthetic")) cfg.synthetic = synthetic_from(d.at("synthetic"), cfg.synthetic);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad run config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return run_config_from_json(buf.str());
}

}  // namespace desrec
