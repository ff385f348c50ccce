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

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "construm/context_tree.hpp"
#include "construm/gateway.hpp"
#include "construm/schema.hpp"
#include "construm/similarity_graph.hpp"

namespace construm {

inline constexpr std::string_view kPlaceholderCue = "no distinguishing information provided";
inline constexpr std::string_view kFallbackGroupSummary =
    "Near-duplicate columns; no generated contrast is available, compare their descriptions directly.";

struct BlockMember {
  ColumnRef ref;
  std::string cid;
  std::string cue;
};

struct DifferentiationBlock {
  Side side = Side::kTarget;
  SimilarityGroup group;
  std::string summary;
  std::vector<BlockMember> members;  // cues are empty when the reply could not be parsed
  bool parsed = true;
};

// Cosine of a group member to the query; drives priority and truncation.
using QueryAffinity = std::function<double(const ColumnRef&)>;

std::vector<SimilarityGroup> select_groups(std::span<const SimilarityGroup> groups, const QueryAffinity& affinity,
                                           std::size_t max_groups = 6, std::size_t max_members = 24);

struct BlockRequest {
  const SimilarityGroup* group = nullptr;
  const SchemaCatalog* catalog = nullptr;  // catalog of the group's side
  // Context per member; members without an entry are shown with metadata only.
  const std::map<ColumnRef, ContextPack>* packs = nullptr;
  const SchemaCatalog* query_catalog = nullptr;
  std::optional<ColumnRef> query;
  Seconds timeout{45.0};
};

struct ParsedBlockReply {
  std::string summary;
  std::map<std::string, std::string> cues;  // cid -> cue
};

std::optional<ParsedBlockReply> parse_block_reply(std::string_view reply);

DifferentiationBlock generate_block(const BlockRequest& request, ModelGateway& gateway,
                                    UsageMeter* meter = nullptr);

std::string render_source_block(const DifferentiationBlock& block);
std::string render_candidate_blocks(std::span<const DifferentiationBlock> blocks);
// Source-side blocks first, then candidate groups numbered in input order.
std::string render_blocks(std::span<const DifferentiationBlock> blocks);

}  // namespace construm
