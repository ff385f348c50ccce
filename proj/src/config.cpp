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

#include <cstdlib>
#include <fstream>

#include "construm/config.hpp"
#include "construm/error.hpp"

namespace construm {

using nlohmann::json;

json to_json(const RunConfig& c) {
  json gateway = {{"base_url", c.endpoint.base_url},
                  {"chat_model", c.endpoint.chat_model},
                  {"embedding_model", c.endpoint.embedding_model},
                  {"decoding", c.endpoint.decoding},
                  {"cache", c.cache},
                  {"cache_dir", c.cache_dir ? json(c.cache_dir->string()) : json(nullptr)}};
  return {{"backend", c.backend},
          {"embedder", c.embedder},
          {"hash_dimension", c.hash_dimension},
          {"hash_seed", c.hash_seed},
          {"gateway", std::move(gateway)},
          {"tree", to_json(c.tree)},
          {"graph", {{"tau", c.tau},
                     {"source_tau", c.source_tau ? json(*c.source_tau) : json(nullptr)},
                     {"include_table_name", c.include_table_name}}},
          {"match", to_json(c.match)},
          {"bench", {{"pair_tau", c.pair_tau}, {"min_separation", c.min_separation}}},
          {"mask", {{"source", c.mask_source}, {"target", c.mask_target}}},
          {"workers", c.workers},
          {"record_latency", c.record_latency ? json(*c.record_latency) : json(nullptr)}};
}

RunConfig run_config_from_json(const json& j, RunConfig c) {
  if (!j.is_object()) throw ParseError("config", "expected a JSON object");
  try {
    c.backend = j.value("backend", c.backend);
    c.embedder = j.value("embedder", c.embedder);
    c.hash_dimension = j.value("hash_dimension", c.hash_dimension);
    c.hash_seed = j.value("hash_seed", c.hash_seed);
    if (j.contains("gateway")) {
      const auto& g = j.at("gateway");
      c.endpoint.base_url = g.value("base_url", c.endpoint.base_url);
      c.endpoint.chat_model = g.value("chat_model", c.endpoint.chat_model);
      c.endpoint.embedding_model = g.value("embedding_model", c.endpoint.embedding_model);
      if (g.contains("decoding")) c.endpoint.decoding = g.at("decoding");
      c.cache = g.value("cache", c.cache);
      if (g.contains("cache_dir")) {
        c.cache_dir = g.at("cache_dir").is_null() ? std::nullopt
                                                  : std::optional<std::filesystem::path>(g.at("cache_dir").get<std::string>());
      }
    }
    if (j.contains("tree")) c.tree = tree_params_from_json(j.at("tree"), c.tree);
    if (j.contains("graph")) {
      const auto& g = j.at("graph");
      c.tau = g.value("tau", c.tau);
      if (g.contains("source_tau")) {
        c.source_tau = g.at("source_tau").is_null() ? std::nullopt : std::optional<double>(g.at("source_tau").get<double>());
      }
      c.include_table_name = g.value("include_table_name", c.include_table_name);
    }
    if (j.contains("match")) c.match = pipeline_config_from_json(j.at("match"), c.match);
    if (j.contains("bench")) {
      c.pair_tau = j.at("bench").value("pair_tau", c.pair_tau);
      c.min_separation = j.at("bench").value("min_separation", c.min_separation);
    }
    if (j.contains("mask")) {
      c.mask_source = j.at("mask").value("source", c.mask_source);
      c.mask_target = j.at("mask").value("target", c.mask_target);
    }
    c.workers = j.value("workers", c.workers);
    if (j.contains("record_latency")) {
      c.record_latency = j.at("record_latency").is_null() ? std::nullopt
                                                          : std::optional<bool>(j.at("record_latency").get<bool>());
    }
  } catch (const json::exception& e) {
    throw ParseError("config", e.what());
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file " + path.string());
  try {
    return run_config_from_json(json::parse(in), std::move(base));
  } catch (const json::parse_error& e) {
    throw ParseError(path.string(), e.what());
  }
}

EnvLookup process_environment() {
  return [](const std::string& name) -> std::optional<std::string> {
    const char* v = std::getenv(name.c_str());
    if (v == nullptr || *v == '\0') return std::nullopt;
    return std::string(v);
  };
}

void apply_environment(RunConfig& config, const EnvLookup& env) {
  if (auto key = env("CONSTRUM_API_KEY")) {
    config.endpoint.api_key = *key;
  } else if (auto fallback = env("OPENAI_API_KEY")) {
    config.endpoint.api_key = *fallback;
  }
  if (auto url = env("CONSTRUM_BASE_URL")) config.endpoint.base_url = *url;
}

std::shared_ptr<ModelGateway> make_gateway(const RunConfig& config, bool need_chat) {
  std::shared_ptr<ChatBackend> chat;
  const std::string scripted = "scripted:";
  if (!need_chat) {
    chat = std::make_shared<FunctionChatBackend>("none", [](const ChatCall&) -> std::string {
      throw Error("this command has no chat backend");
    });
  } else if (config.backend.rfind(scripted, 0) == 0) {
    std::filesystem::path script = config.backend.substr(scripted.size());
    if (script.empty()) throw Error("--backend scripted: needs a script path");
    chat = ScriptedChatBackend::from_file(script);
  } else if (config.backend == "live") {
    if (config.endpoint.api_key.empty()) throw Error("live backend needs an API key (set CONSTRUM_API_KEY)");
    chat = std::make_shared<HttpChatBackend>(config.endpoint);
  } else {
    throw Error("unknown backend \"" + config.backend + "\" (expected live or scripted:<path>)");
  }

  std::shared_ptr<EmbeddingBackend> embedder;
  if (config.embedder == "hash") {
    embedder = std::make_shared<HashEmbedder>(config.hash_dimension, config.hash_seed);
  } else if (config.embedder == "live") {
    if (config.endpoint.api_key.empty()) throw Error("live embedder needs an API key (set CONSTRUM_API_KEY)");
    embedder = std::make_shared<HttpEmbeddingBackend>(config.endpoint);
  } else {
    throw Error("unknown embedder \"" + config.embedder + "\" (expected hash or live)");
  }
  GatewayOptions options;
  options.cache = config.cache;
  options.cache_dir = config.cache_dir;
  return std::make_shared<ModelGateway>(std::move(chat), std::move(embedder), options);
}

}  // namespace construm
