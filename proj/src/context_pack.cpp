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

#include <algorithm>
#include <cstdlib>

#include "construm/context_tree.hpp"
#include "construm/error.hpp"
#include "construm/text.hpp"

namespace construm {

namespace {

std::string one_line(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool space = false;
  for (char c : text::trim(s)) {
    if (c == '\n' || c == '\r' || c == '\t' || c == ' ') {
      space = true;
      continue;
    }
    if (space && !out.empty()) out += ' ';
    space = false;
    out += c;
  }
  return out;
}

std::string node_label(const TreeNode& n) {
  return n.label.empty() ? std::string(to_string(n.kind)) : one_line(n.label);
}

}  // namespace

std::vector<std::string> select_relation_lines(const ContextTree& tree,
                                               std::span<const TreeNode* const> path,
                                               std::size_t max_relations) {
  auto position_on_path = [&](NodeId id) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < path.size(); ++i) {
      if (path[i]->id == id) return i;
    }
    return std::nullopt;
  };
  struct Ranked {
    std::size_t rank;
    std::size_t order;
    const RelationSnippet* relation;
  };
  std::vector<Ranked> ranked;
  const auto relations = tree.relations();
  for (std::size_t i = 0; i < relations.size(); ++i) {
    auto a = position_on_path(relations[i].from);
    auto b = position_on_path(relations[i].to);
    if (!a && !b) continue;
    std::size_t rank = std::min(a.value_or(path.size()), b.value_or(path.size()));
    ranked.push_back({rank, i, &relations[i]});
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const Ranked& x, const Ranked& y) {
    return std::tie(x.rank, x.order) < std::tie(y.rank, y.order);
  });
  std::vector<std::string> lines;
  for (const auto& r : ranked) {
    if (lines.size() >= max_relations) break;
    lines.push_back(node_label(tree.node(r.relation->from)) + " -> " +
                    node_label(tree.node(r.relation->to)) + ": " + one_line(r.relation->text));
  }
  return lines;
}

std::string render_context_pack(std::string_view column_name, std::string_view description,
                                std::span<const LineageLevel> levels,
                                std::span<const std::string> relation_lines) {
  std::string out = "Column: " + one_line(column_name) + "\n";
  if (!text::trim(description).empty()) out += "Description: " + one_line(description) + "\n";
  out += "Path to root (summaries):\n";
  for (const auto& level : levels) {
    out += "  - [" + std::to_string(level.position) + "] " + one_line(level.summary) + "\n";
  }
  if (!relation_lines.empty()) {
    out += "Relation snippets (selected):\n";
    for (const auto& line : relation_lines) out += "  - " + line + "\n";
  }
  return out;
}

std::vector<std::size_t> middle_out_drop_order(std::size_t path_length) {
  std::vector<std::size_t> order;
  if (path_length < 3) return order;
  for (std::size_t i = 1; i + 1 < path_length; ++i) order.push_back(i);
  const auto twice_mid = static_cast<long long>(path_length - 1);
  std::sort(order.begin(), order.end(), [twice_mid](std::size_t a, std::size_t b) {
    auto da = std::llabs(2 * static_cast<long long>(a) - twice_mid);
    auto db = std::llabs(2 * static_cast<long long>(b) - twice_mid);
    if (da != db) return da < db;
    return a > b;
  });
  return order;
}

ContextPack build_context_pack(const ContextTree& tree, const SchemaCatalog& catalog,
                               const ColumnRef& column, const PackOptions& options) {
  const auto path = lineage(tree, column);
  const auto& meta = catalog.column(column);
  const std::string& name = catalog.display_name(column);

  std::vector<LineageLevel> all_levels;
  for (std::size_t i = 0; i < path.size(); ++i) {
    all_levels.push_back(LineageLevel{path.size() - 1 - i, i + 1, path[i]->id, path[i]->summary});
  }
  auto relations = select_relation_lines(tree, path, options.max_relations);

  std::vector<LineageLevel> minimal{all_levels.front()};
  if (all_levels.size() > 1) minimal.push_back(all_levels.back());
  const std::size_t required = render_context_pack(name, meta.description, minimal, {}).size();
  if (required > options.budget) throw BudgetError(required, options.budget);

  ContextPack pack;
  pack.column = column;
  pack.budget = options.budget;
  std::vector<bool> keep(all_levels.size(), true);
  auto surviving = [&] {
    std::vector<LineageLevel> out;
    for (std::size_t i = 0; i < all_levels.size(); ++i) {
      if (keep[i]) out.push_back(all_levels[i]);
    }
    return out;
  };

  auto levels = surviving();
  std::string rendered = render_context_pack(name, meta.description, levels, relations);
  const auto drop_order = middle_out_drop_order(all_levels.size());
  std::size_t next_drop = 0;
  while (rendered.size() > options.budget) {
    if (!relations.empty()) {
      relations.pop_back();
      ++pack.dropped_relations;
    } else if (next_drop < drop_order.size()) {
      keep[drop_order[next_drop++]] = false;
      ++pack.dropped_levels;
      levels = surviving();
    } else {
      throw BudgetError(required, options.budget);
    }
    rendered = render_context_pack(name, meta.description, levels, relations);
  }
  pack.lineage_summaries = std::move(levels);
  pack.relation_lines = std::move(relations);
  pack.rendered = std::move(rendered);
  return pack;
}

}  // namespace construm
