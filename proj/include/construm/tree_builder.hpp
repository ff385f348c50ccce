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

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "construm/context_tree.hpp"
#include "construm/gateway.hpp"
#include "construm/schema.hpp"

namespace construm {

struct TableBuildContext {
  const SchemaCatalog& catalog;
  const TableMeta& table;
  const TreeParams& params;
  ModelGateway& gateway;
  UsageMeter* meter = nullptr;
};

struct WindowSummary {
  std::vector<std::size_t> ordinals;
  std::string summary;
};

struct PlanGroup {
  std::string label;
  std::vector<std::size_t> ordinals;  // sorted
};

struct GroupingPlan {
  std::vector<PlanGroup> groups;
  bool fallback = false;
  bool repaired = false;
};

struct BoundaryMove {
  std::size_t from = 0;  // current first ordinal of a group
  std::size_t to = 0;
};

struct RefineOutcome {
  GroupingPlan plan;
  std::vector<BoundaryMove> accepted;
  std::vector<BoundaryMove> discarded;
};

// Splits `ordinals` into consecutive batches of `window`; a trailing batch
// shorter than `min_group` is merged into the previous one.
std::vector<std::vector<std::size_t>> partition_windows(std::span<const std::size_t> ordinals,
                                                        std::size_t window, std::size_t min_group);

std::vector<WindowSummary> stage1_window_summaries(const TableBuildContext& ctx,
                                                   std::span<const std::size_t> ordinals);

// Evenly spaced positions round(i*(n-1)/(k-1)); every position when k >= n.
std::vector<std::size_t> theme_sample_positions(std::size_t n, std::size_t k);

std::string stage2_global_theme(const TableBuildContext& ctx, std::span<const std::size_t> ordinals);

// Parses "groups: [0..119]=label, [120..249]=label". Unordered plans may list
// ordinals: "[3,7,12]=label". Returns nullopt unless the plan covers
// `ordinals` exactly (and with contiguous groups when `ordered`).
std::optional<GroupingPlan> parse_grouping_plan(std::string_view reply,
                                                std::span<const std::size_t> ordinals, bool ordered);

// Merges undersized groups and caps the group count. Unordered plans use
// `embeddings` (indexed by ordinal) for nearest-centroid merging.
GroupingPlan repair_plan(GroupingPlan plan, bool ordered, std::size_t min_group, std::size_t max_groups,
                         std::span<const EmbeddingVector> embeddings = {});

GroupingPlan uniform_plan(std::span<const std::size_t> ordinals, std::size_t fan_out,
                          std::size_t min_group);

GroupingPlan stage3_conceptual_map(const TableBuildContext& ctx, std::span<const std::size_t> ordinals,
                                   std::span<const WindowSummary> windows, std::string_view theme);

std::vector<BoundaryMove> parse_boundary_moves(std::string_view reply);

RefineOutcome apply_boundary_moves(const GroupingPlan& plan, std::span<const BoundaryMove> moves,
                                   std::size_t switch_budget, std::size_t min_group);

RefineOutcome stage4_refine_boundaries(const TableBuildContext& ctx, const GroupingPlan& plan);

// Per-table subtree rooted at a table_root node.
ContextTree build_table_tree(const TableBuildContext& ctx);

struct ParsedRelation {
  std::size_t from = 0;  // sibling index
  std::size_t to = 0;
  std::string text;
};

std::string sibling_handle(std::size_t index);

std::vector<ParsedRelation> parse_sibling_relations(std::string_view reply, std::size_t sibling_count,
                                                    const RelationCaps& caps);

std::vector<RelationSnippet> annotate_sibling_relations(ContextTree& tree, NodeId parent,
                                                        const TreeParams& params, ModelGateway& gateway,
                                                        UsageMeter* meter = nullptr);

// Average-linkage merge of table subtrees into one database tree.
ContextTree cluster_tables(std::vector<ContextTree> table_trees, const TreeParams& params,
                           ModelGateway& gateway, UsageMeter* meter = nullptr);

struct TreeBuildOptions {
  std::size_t workers = 1;
  std::optional<std::filesystem::path> checkpoint_dir;
  UsageMeter* meter = nullptr;
};

ContextTree build_context_tree(const SchemaCatalog& catalog, const TreeParams& params,
                               ModelGateway& gateway, const TreeBuildOptions& options = {});

}  // namespace construm
