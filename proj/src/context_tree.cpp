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

#include <fstream>
#include <sstream>

#include "construm/context_tree.hpp"
#include "construm/error.hpp"
#include "construm/text.hpp"

namespace construm {

using nlohmann::json;

std::string_view to_string(NodeKind kind) noexcept {
  switch (kind) {
    case NodeKind::kColumnLeaf: return "column_leaf";
    case NodeKind::kGroupLeaf: return "group_leaf";
    case NodeKind::kWithinTable: return "within_table";
    case NodeKind::kTableRoot: return "table_root";
    case NodeKind::kCluster: return "cluster";
    case NodeKind::kDbRoot: return "db_root";
  }
  return "group_leaf";
}

NodeKind parse_node_kind(std::string_view s) {
  for (auto k : {NodeKind::kColumnLeaf, NodeKind::kGroupLeaf, NodeKind::kWithinTable,
                 NodeKind::kTableRoot, NodeKind::kCluster, NodeKind::kDbRoot}) {
    if (to_string(k) == s) return k;
  }
  throw ParseError("kind", "unknown node kind \"" + std::string(s) + "\"");
}

bool is_leaf_kind(NodeKind kind) noexcept {
  return kind == NodeKind::kColumnLeaf || kind == NodeKind::kGroupLeaf;
}

void TreeParams::validate() const {
  if (min_group < 1) throw Error("tree params: min_group (m) must be >= 1");
  if (leaf_budget < min_group) throw Error("tree params: leaf_budget (B) must be >= min_group (m)");
  if (window < leaf_budget) throw Error("tree params: window (W) must be >= leaf_budget (B)");
  if (fan_out < 2) throw Error("tree params: fan_out (b) must be >= 2");
  if (!(cluster_threshold > 0.0 && cluster_threshold < 2.0)) {
    throw Error("tree params: cluster_threshold (delta) must lie in (0, 2)");
  }
  if (theme_samples < 2) throw Error("tree params: theme_samples must be >= 2");
  if (!(summary_timeout_s > 0.0) || !(relation_timeout_s > 0.0)) {
    throw Error("tree params: timeouts must be positive");
  }
}

json to_json(const TreeParams& p) {
  return {{"window", p.window},
          {"fan_out", p.fan_out},
          {"min_group", p.min_group},
          {"switch_budget", p.switch_budget},
          {"leaf_budget", p.leaf_budget},
          {"cluster_threshold", p.cluster_threshold},
          {"theme_samples", p.theme_samples},
          {"refine_boundaries", p.refine_boundaries},
          {"annotate_relations", p.annotate_relations},
          {"relation_caps",
           {{"per_column", p.relation_caps.per_column},
            {"per_leaf_min", p.relation_caps.per_leaf_min},
            {"per_leaf_max", p.relation_caps.per_leaf_max}}},
          {"summary_timeout_s", p.summary_timeout_s},
          {"relation_timeout_s", p.relation_timeout_s}};
}

TreeParams tree_params_from_json(const json& j, TreeParams p) {
  if (!j.is_object()) throw ParseError("params", "expected object");
  p.window = j.value("window", p.window);
  p.fan_out = j.value("fan_out", p.fan_out);
  p.min_group = j.value("min_group", p.min_group);
  p.switch_budget = j.value("switch_budget", p.switch_budget);
  p.leaf_budget = j.value("leaf_budget", p.leaf_budget);
  p.cluster_threshold = j.value("cluster_threshold", p.cluster_threshold);
  p.theme_samples = j.value("theme_samples", p.theme_samples);
  p.refine_boundaries = j.value("refine_boundaries", p.refine_boundaries);
  p.annotate_relations = j.value("annotate_relations", p.annotate_relations);
  if (j.contains("relation_caps")) {
    const auto& c = j.at("relation_caps");
    p.relation_caps.per_column = c.value("per_column", p.relation_caps.per_column);
    p.relation_caps.per_leaf_min = c.value("per_leaf_min", p.relation_caps.per_leaf_min);
    p.relation_caps.per_leaf_max = c.value("per_leaf_max", p.relation_caps.per_leaf_max);
  }
  p.summary_timeout_s = j.value("summary_timeout_s", p.summary_timeout_s);
  p.relation_timeout_s = j.value("relation_timeout_s", p.relation_timeout_s);
  return p;
}

// ---------------------------------------------------------------------------

ContextTree::ContextTree(Side side, TreeParams params) : side_(side), params_(std::move(params)) {}

NodeId ContextTree::add_node(TreeNode node) {
  node.id = node_id(nodes_.size());
  nodes_.push_back(std::move(node));
  parents_.emplace_back();
  leaf_index_.clear();
  return nodes_.back().id;
}

const TreeNode& ContextTree::node(NodeId id) const {
  if (index_of(id) >= nodes_.size()) throw Error("unknown tree node " + std::to_string(index_of(id)));
  return nodes_[index_of(id)];
}

TreeNode& ContextTree::mutable_node(NodeId id) {
  if (index_of(id) >= nodes_.size()) throw Error("unknown tree node " + std::to_string(index_of(id)));
  return nodes_[index_of(id)];
}

void ContextTree::attach(NodeId parent, NodeId child) {
  node(parent);
  node(child);
  if (parent == child) throw Error("tree node cannot be its own child");
  if (parents_[index_of(child)]) throw Error("tree node " + std::to_string(index_of(child)) + " already has a parent");
  parents_[index_of(child)] = parent;
  nodes_[index_of(parent)].children.push_back(child);
}

void ContextTree::set_root(NodeId root) {
  node(root);
  root_ = root;
}

NodeId ContextTree::root() const {
  if (!root_) throw Error("context tree has no root");
  return *root_;
}

void ContextTree::add_relation(RelationSnippet relation) {
  node(relation.from);
  node(relation.to);
  relations_.push_back(std::move(relation));
}

std::optional<NodeId> ContextTree::parent(NodeId id) const {
  node(id);
  return parents_[index_of(id)];
}

NodeId ContextTree::graft(const ContextTree& subtree) {
  const std::size_t offset = nodes_.size();
  auto shift = [offset](NodeId id) { return node_id(index_of(id) + offset); };
  for (const auto& n : subtree.nodes_) {
    TreeNode copy = n;
    copy.children.clear();
    add_node(std::move(copy));
  }
  for (std::size_t i = 0; i < subtree.nodes_.size(); ++i) {
    for (NodeId child : subtree.nodes_[i].children) attach(node_id(i + offset), shift(child));
  }
  for (const auto& r : subtree.relations_) {
    relations_.push_back(RelationSnippet{shift(r.from), shift(r.to), r.text, r.directed});
  }
  return shift(subtree.root());
}

void ContextTree::finalize() {
  if (!root_) throw Error("context tree has no root");
  if (parents_[index_of(*root_)]) throw Error("context tree root has a parent");
  std::vector<bool> seen(nodes_.size(), false);
  std::vector<NodeId> stack{*root_};
  std::size_t visited = 0;
  while (!stack.empty()) {
    NodeId id = stack.back();
    stack.pop_back();
    if (seen[index_of(id)]) throw Error("context tree contains a cycle");
    seen[index_of(id)] = true;
    ++visited;
    for (NodeId c : nodes_[index_of(id)].children) stack.push_back(c);
  }
  if (visited != nodes_.size()) throw Error("context tree is not connected");

  leaf_index_.clear();
  for (const auto& n : nodes_) {
    if (!n.members.empty() && !n.children.empty()) {
      throw Error("tree node " + std::to_string(index_of(n.id)) + " has both members and children");
    }
    for (const auto& m : n.members) {
      if (!leaf_index_.emplace(m, n.id).second) {
        throw Error("column " + to_string(m) + " appears under more than one leaf");
      }
    }
  }
}

std::size_t ContextTree::depth(NodeId id) const {
  std::size_t d = 0;
  auto p = parent(id);
  while (p) {
    ++d;
    if (d > nodes_.size()) throw Error("context tree parent chain is cyclic");
    p = parents_[index_of(*p)];
  }
  return d;
}

std::size_t ContextTree::height() const {
  std::size_t h = 0;
  for (const auto& n : nodes_) {
    if (n.children.empty()) h = std::max(h, depth(n.id));
  }
  return h;
}

std::vector<NodeId> ContextTree::leaves() const {
  std::vector<NodeId> out;
  for (const auto& n : nodes_) {
    if (n.children.empty() && !n.members.empty()) out.push_back(n.id);
  }
  return out;
}

bool ContextTree::contains(const ColumnRef& ref) const noexcept { return leaf_index_.contains(ref); }

NodeId ContextTree::leaf_of(const ColumnRef& ref) const {
  auto it = leaf_index_.find(ref);
  if (it == leaf_index_.end()) throw Error("unknown column " + to_string(ref));
  return it->second;
}

std::vector<const TreeNode*> lineage(const ContextTree& tree, const ColumnRef& column) {
  std::vector<const TreeNode*> path;
  std::optional<NodeId> cur = tree.leaf_of(column);
  while (cur) {
    path.push_back(&tree.node(*cur));
    if (path.size() > tree.size()) throw Error("context tree parent chain is cyclic");
    cur = tree.parent(*cur);
  }
  return path;
}

// ---------------------------------------------------------------------------
// Serialization

json ContextTree::body_json() const {
  json nodes = json::array();
  json parents = json::array();
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto& n = nodes_[i];
    json children = json::array();
    for (NodeId c : n.children) children.push_back(index_of(c));
    json jn = {{"id", i},
               {"kind", to_string(n.kind)},
               {"label", n.label},
               {"summary", n.summary},
               {"children", std::move(children)}};
    if (n.table_id) jn["table_id"] = *n.table_id;
    if (n.span) jn["span"] = {n.span->begin, n.span->end};
    if (!n.members.empty()) {
      json members = json::array();
      for (const auto& m : n.members) members.push_back({m.table_id, m.ordinal});
      jn["members"] = std::move(members);
    }
    nodes.push_back(std::move(jn));
    parents.push_back(parents_[i] ? json(index_of(*parents_[i])) : json(nullptr));
  }
  json relations = json::array();
  for (const auto& r : relations_) {
    relations.push_back(
        {{"from", index_of(r.from)}, {"to", index_of(r.to)}, {"text", r.text}, {"directed", r.directed}});
  }
  return {{"format", "construm.context_tree/1"},
          {"side", to_string(side_)},
          {"params", construm::to_json(params_)},
          {"root", root_ ? json(index_of(*root_)) : json(nullptr)},
          {"nodes", std::move(nodes)},
          {"parents", std::move(parents)},
          {"relations", std::move(relations)}};
}

std::string ContextTree::content_hash() const { return text::sha256_hex(body_json().dump()); }

json ContextTree::to_json() const {
  json doc = body_json();
  doc["content_hash"] = text::sha256_hex(doc.dump());
  return doc;
}

std::string ContextTree::serialize() const { return to_json().dump(1) + "\n"; }

ContextTree ContextTree::from_json(const json& doc) {
  try {
    ContextTree tree(parse_side(doc.at("side").get<std::string>()),
                     tree_params_from_json(doc.at("params")));
    for (const auto& jn : doc.at("nodes")) {
      TreeNode n;
      n.kind = parse_node_kind(jn.at("kind").get<std::string>());
      n.label = jn.value("label", std::string());
      n.summary = jn.value("summary", std::string());
      if (jn.contains("table_id")) n.table_id = jn.at("table_id").get<std::string>();
      if (jn.contains("span")) n.span = OrdinalSpan{jn.at("span").at(0).get<std::size_t>(), jn.at("span").at(1).get<std::size_t>()};
      if (jn.contains("members")) {
        for (const auto& m : jn.at("members")) {
          n.members.push_back(ColumnRef{tree.side_, m.at(0).get<std::string>(), m.at(1).get<std::size_t>()});
        }
      }
      NodeId id = tree.add_node(std::move(n));
      if (index_of(id) != jn.at("id").get<std::size_t>()) throw ParseError("nodes", "node ids must be dense and ordered");
    }
    const auto& jnodes = doc.at("nodes");
    for (std::size_t i = 0; i < jnodes.size(); ++i) {
      for (const auto& c : jnodes[i].at("children")) {
        std::size_t child = c.get<std::size_t>();
        if (child >= tree.size()) throw ParseError("nodes", "child id out of range");
        tree.attach(node_id(i), node_id(child));
      }
    }
    if (doc.contains("parents")) {
      const auto& parents = doc.at("parents");
      for (std::size_t i = 0; i < parents.size() && i < tree.size(); ++i) {
        auto p = tree.parents_[i];
        bool file_has = !parents[i].is_null();
        if (file_has != p.has_value() || (p && index_of(*p) != parents[i].get<std::size_t>())) {
          throw ParseError("parents", "parent map disagrees with children lists");
        }
      }
    }
    for (const auto& r : doc.value("relations", json::array())) {
      tree.add_relation(RelationSnippet{node_id(r.at("from").get<std::size_t>()),
                                        node_id(r.at("to").get<std::size_t>()),
                                        r.at("text").get<std::string>(), r.value("directed", true)});
    }
    if (!doc.at("root").is_null()) tree.set_root(node_id(doc.at("root").get<std::size_t>()));
    if (doc.contains("content_hash") && doc.at("content_hash").get<std::string>() != tree.content_hash()) {
      throw ParseError("content_hash", "context tree content hash mismatch");
    }
    tree.finalize();
    return tree;
  } catch (const json::exception& e) {
    throw ParseError("context tree", e.what());
  }
}

void ContextTree::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << serialize();
}

ContextTree ContextTree::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open tree file " + path.string());
  try {
    return from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ParseError(path.string(), e.what());
  }
}

}  // namespace construm
