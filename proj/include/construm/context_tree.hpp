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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "construm/schema.hpp"

namespace construm {

enum class NodeId : std::uint32_t {};

constexpr std::size_t index_of(NodeId id) noexcept { return static_cast<std::size_t>(id); }
constexpr NodeId node_id(std::size_t index) noexcept { return static_cast<NodeId>(index); }

enum class NodeKind { kColumnLeaf, kGroupLeaf, kWithinTable, kTableRoot, kCluster, kDbRoot };

std::string_view to_string(NodeKind kind) noexcept;
NodeKind parse_node_kind(std::string_view s);
bool is_leaf_kind(NodeKind kind) noexcept;

// Half-open ordinal range [begin, end) within one ordered table.
struct OrdinalSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const noexcept { return end - begin; }
  friend bool operator==(const OrdinalSpan&, const OrdinalSpan&) = default;
};

struct RelationCaps {
  std::size_t per_column = 2;
  std::size_t per_leaf_min = 6;
  std::size_t per_leaf_max = 18;
};

// Construction hyperparameters. Window, leaf budget and minimum group size
// default to the ordered-codebook setting; the rest are configuration.
struct TreeParams {
  std::size_t window = 250;        // W: columns per summarization window
  std::size_t fan_out = 5;         // b: target child groups per split
  std::size_t min_group = 10;      // m: minimum group size
  std::size_t switch_budget = 2;   // s: boundary moves per refinement pass
  std::size_t leaf_budget = 50;    // B: maximum columns per leaf
  double cluster_threshold = 0.5;  // delta: cosine-distance merge cutoff
  std::size_t theme_samples = 20;
  bool refine_boundaries = true;
  bool annotate_relations = true;
  RelationCaps relation_caps;
  double summary_timeout_s = 90.0;
  double relation_timeout_s = 75.0;

  void validate() const;
};

nlohmann::json to_json(const TreeParams& params);
TreeParams tree_params_from_json(const nlohmann::json& j, TreeParams base = {});

struct TreeNode {
  NodeId id{};
  NodeKind kind = NodeKind::kGroupLeaf;
  std::string label;
  std::string summary;
  std::vector<NodeId> children;
  std::optional<std::string> table_id;  // set for within-table nodes
  std::optional<OrdinalSpan> span;      // ordered tables only
  std::vector<ColumnRef> members;       // leaves only, catalog order
};

struct RelationSnippet {
  NodeId from{};
  NodeId to{};
  std::string text;
  bool directed = true;
};

// Hierarchical summary index. Nodes are stored densely by id; after
// finalize() the structure is a single rooted tree with a column index.
class ContextTree {
 public:
  ContextTree() = default;
  explicit ContextTree(Side side, TreeParams params = {});

  NodeId add_node(TreeNode node);
  void attach(NodeId parent, NodeId child);
  void set_root(NodeId root);
  void add_relation(RelationSnippet relation);
  // Copies `subtree` in, returning the new id of its root.
  NodeId graft(const ContextTree& subtree);
  // Validates connectivity and leaf membership; builds the column index.
  void finalize();

  Side side() const noexcept { return side_; }
  const TreeParams& params() const noexcept { return params_; }
  void set_params(TreeParams params) { params_ = std::move(params); }
  NodeId root() const;
  bool has_root() const noexcept { return root_.has_value(); }

  std::size_t size() const noexcept { return nodes_.size(); }
  const TreeNode& node(NodeId id) const;
  TreeNode& mutable_node(NodeId id);
  std::span<const TreeNode> nodes() const noexcept { return nodes_; }
  std::optional<NodeId> parent(NodeId id) const;
  std::span<const RelationSnippet> relations() const noexcept { return relations_; }

  std::size_t depth(NodeId id) const;  // root is 0
  std::size_t height() const;          // deepest leaf depth
  std::vector<NodeId> leaves() const;

  bool contains(const ColumnRef& ref) const noexcept;
  NodeId leaf_of(const ColumnRef& ref) const;  // throws "unknown column"

  nlohmann::json to_json() const;
  static ContextTree from_json(const nlohmann::json& doc);
  std::string serialize() const;  // canonical text, includes the content hash
  std::string content_hash() const;
  void save(const std::filesystem::path& path) const;
  static ContextTree load(const std::filesystem::path& path);

 private:
  nlohmann::json body_json() const;

  Side side_ = Side::kTarget;
  TreeParams params_;
  std::vector<TreeNode> nodes_;
  std::vector<std::optional<NodeId>> parents_;
  std::optional<NodeId> root_;
  std::vector<RelationSnippet> relations_;
  std::unordered_map<ColumnRef, NodeId, ColumnRefHash> leaf_index_;
};

// Leaf containing the column, then each ancestor up to the root.
std::vector<const TreeNode*> lineage(const ContextTree& tree, const ColumnRef& column);

// ---------------------------------------------------------------------------
// Context packs

struct LineageLevel {
  std::size_t depth = 0;     // distance from the root
  std::size_t position = 0;  // 1-based index along the leaf-to-root path
  NodeId node{};
  std::string summary;
};

struct ContextPack {
  ColumnRef column;
  std::vector<LineageLevel> lineage_summaries;  // leaf -> root, survivors only
  std::vector<std::string> relation_lines;      // survivors only
  std::string rendered;
  std::size_t budget = 0;
  std::size_t dropped_levels = 0;
  std::size_t dropped_relations = 0;
};

struct PackOptions {
  std::size_t budget = 2400;  // characters
  std::size_t max_relations = 3;
};

// Relations touching the lineage, nearest to the leaf first, as display lines.
std::vector<std::string> select_relation_lines(const ContextTree& tree,
                                               std::span<const TreeNode* const> path,
                                               std::size_t max_relations);

std::string render_context_pack(std::string_view column_name, std::string_view description,
                                std::span<const LineageLevel> levels,
                                std::span<const std::string> relation_lines);

// Order in which interior lineage positions (0-based, leaf = 0) are dropped:
// the middle first, then outward; on a tie the root-side position goes first.
std::vector<std::size_t> middle_out_drop_order(std::size_t path_length);

ContextPack build_context_pack(const ContextTree& tree, const SchemaCatalog& catalog,
                               const ColumnRef& column, const PackOptions& options = {});

}  // namespace construm
