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
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "construm/context_tree.hpp"
#include "construm/evaluation.hpp"
#include "construm/gateway.hpp"
#include "construm/pipeline.hpp"
#include "construm/schema.hpp"
#include "construm/similarity_graph.hpp"

namespace construm::testing {

struct ColSpec {
  std::string name;
  std::string description;
};

struct TableSpec {
  std::string id;
  std::string name;
  std::string description;
  bool ordered = true;
  std::vector<ColSpec> columns;
};

nlohmann::json catalog_json(Side side, const std::vector<TableSpec>& tables);
SchemaCatalog make_catalog(Side side, const std::vector<TableSpec>& tables);

std::shared_ptr<ModelGateway> gateway_with(std::shared_ptr<ChatBackend> chat,
                                           std::shared_ptr<EmbeddingBackend> embedder = nullptr,
                                           GatewayOptions options = {});

// Generic deterministic replies for every role. Plans fall back to uniform
// splits; other roles get fixed short texts.
nlohmann::json default_script();

// Records every prompt it sees, then delegates.
class RecordingBackend final : public ChatBackend {
 public:
  explicit RecordingBackend(std::shared_ptr<ChatBackend> inner) : inner_(std::move(inner)) {}
  std::string id() const override { return "recording:" + inner_->id(); }
  ChatReply complete(const ChatCall& call) override;
  std::vector<ChatCall> calls() const;

 private:
  std::shared_ptr<ChatBackend> inner_;
  mutable std::mutex mutex_;
  std::vector<ChatCall> calls_;
};

// Replies that exercise the tree builder with random plans and boundary
// moves, some invalid, seeded from the prompt text.
std::shared_ptr<ChatBackend> fuzz_tree_backend(std::uint64_t seed);

// Ordered catalog with `table_sizes` columns per table and varied text.
SchemaCatalog random_ordered_catalog(Side side, const std::vector<std::size_t>& table_sizes, std::mt19937_64& rng);

// Catalog whose column texts come from a small vocabulary, with near-copies
// so that thresholded links appear at tau in [0.8, 0.95].
SchemaCatalog random_text_catalog(Side side, std::size_t n, std::mt19937_64& rng);

// Connected components by explicit adjacency and DFS over brute-force cosines.
std::vector<std::vector<ColumnRef>> dfs_components(std::span<const ColumnRef> refs,
                                                   std::span<const EmbeddingVector> embeddings, double tau);

// Planted ablation scenario.
struct PlantedScenario {
  SchemaCatalog source;
  SchemaCatalog target;
  std::vector<MatchQuery> queries;
  nlohmann::json script;
  double tau = 0.9;
};
PlantedScenario planted_scenario();

// Observation-time scenario: CHARTTIME is generic, its sibling STORETIME
// carries the distinguishing cue.
struct TimeScenario {
  SchemaCatalog source;
  SchemaCatalog target;
  MatchQuery query;
  ColumnRef observation_time;
  ColumnRef recorded_time;
  nlohmann::json script;
  double source_tau = 0.85;
  double target_tau = 0.9;
};
TimeScenario time_scenario();

// Builds trees and graphs for both sides with the given gateway.
struct BuiltArtifacts {
  std::optional<ContextTree> source_tree;
  std::optional<ContextTree> target_tree;
  std::optional<Hypergraph> source_graph;
  std::optional<Hypergraph> target_graph;
  MatchArtifacts view(const SchemaCatalog& source, const SchemaCatalog& target) const;
};
BuiltArtifacts build_artifacts(const SchemaCatalog& source, const SchemaCatalog& target, ModelGateway& gateway,
                               double source_tau, double target_tau, const TreeParams& params = {});

// Codebook-style catalog of `n` items whose descriptions cross-reference
// other items by raw identifier.
SchemaCatalog cross_reference_catalog(Side side, std::size_t n, const std::string& prefix);

// Single-table tree whose lineages all have `levels` nodes: db_root, then
// binary splits of the ordinal range, then group leaves. Each split adds a
// relation between its two children.
ContextTree chain_tree(const SchemaCatalog& catalog, std::size_t levels);

// Fresh directory under the system temp path, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& content);

}  // namespace construm::testing
