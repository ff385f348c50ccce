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

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "construm/context_tree.hpp"
#include "construm/differentiation.hpp"
#include "construm/gateway.hpp"
#include "construm/schema.hpp"
#include "construm/similarity_graph.hpp"

namespace construm {

enum class MatchMode { kFull, kNoTree, kNoDiff, kLlmLocal, kEmbedTop1 };

std::string_view to_string(MatchMode mode) noexcept;
MatchMode parse_match_mode(std::string_view s);

struct PipelineConfig {
  MatchMode mode = MatchMode::kFull;
  std::size_t k = 20;
  bool use_tree = true;
  bool use_diff = true;
  bool use_expansion = true;
  std::size_t pack_budget = 2400;
  std::size_t max_relations = 3;
  double decision_timeout_s = 90.0;
  double diff_timeout_s = 45.0;
  std::size_t cap_total = 5;
  std::size_t cap_strong = 3;
  std::size_t max_groups = 6;
  std::size_t max_members = 24;
  bool restrict_source_to_table = true;

  static PipelineConfig for_mode(MatchMode mode);
  static PipelineConfig for_mode(MatchMode mode, PipelineConfig base);
  void validate() const;  // flags must agree with the mode
};

nlohmann::json to_json(const PipelineConfig& config);
PipelineConfig pipeline_config_from_json(const nlohmann::json& j, PipelineConfig base = {});

struct MatchArtifacts {
  const SchemaCatalog* source = nullptr;
  const SchemaCatalog* target = nullptr;
  const ContextTree* source_tree = nullptr;
  const ContextTree* target_tree = nullptr;
  const Hypergraph* source_graph = nullptr;
  const Hypergraph* target_graph = nullptr;
};

struct MatchTrace {
  MatchMode mode = MatchMode::kFull;
  std::int64_t llm_calls = 0;
  std::int64_t cache_hits = 0;
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
  std::int64_t total_tokens = 0;
  double latency_s = 0.0;
  std::size_t shortlist_size = 0;
  std::size_t candidate_count = 0;
  std::size_t candidate_blocks = 0;
  bool source_block = false;
  std::string prompt_snapshot;
  std::vector<std::string> warnings;
};

struct MatchResult {
  MatchQuery query;
  ColumnRef chosen;
  std::vector<ColumnRef> ranked;
  std::vector<ColumnRef> candidates;  // C, prompt order
  MatchTrace trace;
};

nlohmann::json to_json(const MatchTrace& trace);
MatchTrace match_trace_from_json(const nlohmann::json& j);
nlohmann::json to_json(const MatchResult& result, const SchemaCatalog& source, const SchemaCatalog& target);

// Top-k targets by cosine to the query embedding, ties by (table_id, ordinal).
std::vector<ColumnRef> shortlist(const EmbeddingVector& query, const Hypergraph& target, std::size_t k);
std::vector<ColumnRef> shortlist(const ColumnRef& source, const MatchArtifacts& artifacts, std::size_t k);

struct PromptColumn {
  std::string cid;
  std::string name;
  std::string description;
  std::string table;
  std::optional<std::string> context;
};

std::string assemble_final_prompt(const PromptColumn& query, std::string_view source_block,
                                  std::span<const PromptColumn> candidates, std::string_view candidate_blocks);

// The last "ANSWER: C<digits>" wins; it must name a member of `candidates`.
ColumnRef parse_choice(std::string_view reply, std::span<const ColumnRef> candidates, const SchemaCatalog& target);

MatchResult run_match(const MatchQuery& query, const PipelineConfig& config, const MatchArtifacts& artifacts,
                      ModelGateway& gateway);

}  // namespace construm
