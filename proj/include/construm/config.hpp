// Copyright 2026 The ConStruM Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "construm/context_tree.hpp"
#include "construm/gateway.hpp"
#include "construm/pipeline.hpp"

namespace construm {

// Fully resolved settings for one command: defaults < config file < environment < flags.
struct RunConfig {
  std::string backend = "live";  // "live" or "scripted:<script path>"
  std::string embedder = "hash"; // "hash" or "live"
  std::size_t hash_dimension = 64;
  std::uint64_t hash_seed = 17;
  HttpEndpoint endpoint;         // api_key is never serialized
  bool cache = true;
  std::optional<std::filesystem::path> cache_dir;
  TreeParams tree;
  double tau = 0.9;
  std::optional<double> source_tau;
  bool include_table_name = true;
  PipelineConfig match;
  double pair_tau = 0.9;
  std::size_t min_separation = 5;
  bool mask_source = false;
  bool mask_target = false;
  std::size_t workers = 1;
  // Per-query latency in outputs; unset means on for live backends only, so
  // scripted runs stay byte-reproducible.
  std::optional<bool> record_latency;

  bool scripted() const { return backend.rfind("scripted:", 0) == 0; }
  bool latency_recorded() const { return record_latency.value_or(!scripted()); }
  double tau_for(Side side) const { return side == Side::kSource && source_tau ? *source_tau : tau; }
};

nlohmann::json to_json(const RunConfig& config);
RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base = {});
RunConfig load_run_config(const std::filesystem::path& path, RunConfig base = {});

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
EnvLookup process_environment();
// CONSTRUM_API_KEY (or OPENAI_API_KEY) and CONSTRUM_BASE_URL.
void apply_environment(RunConfig& config, const EnvLookup& env);

// Without `need_chat` the chat side is a stub that refuses calls, so
// embedding-only commands run without chat credentials.
std::shared_ptr<ModelGateway> make_gateway(const RunConfig& config, bool need_chat = true);

}  // namespace construm
