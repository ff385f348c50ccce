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
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <regex>
#include <set>
#include <thread>

#include <spdlog/spdlog.h>

#include "construm/error.hpp"
#include "construm/similarity_graph.hpp"
#include "construm/text.hpp"
#include "construm/tree_builder.hpp"

namespace construm {

namespace {

ChatCall summary_call(const TreeParams& params, std::string prompt) {
  ChatCall call;
  call.role = CallRole::kTreeSummary;
  call.prompt = std::move(prompt);
  call.timeout = Seconds{params.summary_timeout_s};
  return call;
}

std::string ask(const TableBuildContext& ctx, std::string prompt) {
  auto reply = ctx.gateway.complete(summary_call(ctx.params, std::move(prompt)), ctx.meter);
  return std::string(text::trim(reply.text));
}

std::string column_line(const TableBuildContext& ctx, std::size_t ordinal) {
  const ColumnRef& ref = ctx.table.columns.at(ordinal);
  const auto& meta = ctx.catalog.column(ref);
  std::string line = "- [" + std::to_string(ordinal) + "] " + ctx.catalog.display_name(ref);
  if (!meta.description.empty()) line += ": " + meta.description;
  return line;
}

std::string range_text(std::span<const std::size_t> ordinals) {
  if (ordinals.empty()) return "[]";
  return "[" + std::to_string(ordinals.front()) + ".." + std::to_string(ordinals.back()) + "]";
}

std::string table_header(const TableBuildContext& ctx) {
  std::string out = "Table: " + ctx.table.name + (ctx.table.ordered ? " (ordered)" : " (unordered)") + "\n";
  if (!ctx.table.description.empty()) out += "Table description: " + ctx.table.description + "\n";
  return out;
}

std::string group_label_text(const PlanGroup& g, bool ordered) {
  if (ordered) return range_text(g.ordinals) + " " + g.label;
  return g.label + " (" + std::to_string(g.ordinals.size()) + " columns)";
}

std::optional<std::size_t> parse_index(std::string_view s) {
  s = text::trim(s);
  if (s.empty()) return std::nullopt;
  std::size_t value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

bool parse_items(std::string_view body, std::size_t limit, std::vector<std::size_t>& out) {
  std::size_t start = 0;
  while (start <= body.size()) {
    std::size_t comma = body.find(',', start);
    std::string_view item = text::trim(body.substr(start, comma == std::string_view::npos ? body.size() - start : comma - start));
    if (item.empty()) return false;
    std::size_t dots = item.find("..");
    std::size_t dash = item.find('-');
    std::optional<std::size_t> lo, hi;
    if (dots != std::string_view::npos) {
      lo = parse_index(item.substr(0, dots));
      hi = parse_index(item.substr(dots + 2));
    } else if (dash != std::string_view::npos) {
      lo = parse_index(item.substr(0, dash));
      hi = parse_index(item.substr(dash + 1));
    } else {
      lo = hi = parse_index(item);
    }
    if (!lo || !hi || *lo > *hi || *hi - *lo > limit) return false;
    for (std::size_t v = *lo; v <= *hi; ++v) out.push_back(v);
    if (out.size() > limit) return false;
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return true;
}

std::string clean_label(std::string_view raw) {
  std::string_view s = text::trim(raw);
  while (!s.empty() && (s.front() == '=' || s.front() == ':')) s = text::trim(s.substr(1));
  while (!s.empty() && (s.back() == ',' || s.back() == ';')) s = text::trim(s.substr(0, s.size() - 1));
  std::string out(s);
  std::replace(out.begin(), out.end(), '\n', ' ');
  return out;
}

double centroid_cosine(const PlanGroup& a, const PlanGroup& b, std::span<const EmbeddingVector> emb) {
  std::vector<double> ca, cb;
  auto accumulate = [&](const PlanGroup& g, std::vector<double>& c) {
    for (std::size_t o : g.ordinals) {
      const auto& v = emb[o].values;
      if (c.empty()) c.assign(v.size(), 0.0);
      for (std::size_t i = 0; i < v.size() && i < c.size(); ++i) c[i] += v[i];
    }
  };
  accumulate(a, ca);
  accumulate(b, cb);
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < ca.size() && i < cb.size(); ++i) {
    dot += ca[i] * cb[i];
    na += ca[i] * ca[i];
    nb += cb[i] * cb[i];
  }
  if (na == 0 || nb == 0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<EmbeddingVector> span_embeddings(const TableBuildContext& ctx, std::span<const std::size_t> ordinals) {
  std::vector<std::string> texts;
  for (std::size_t o : ordinals) texts.push_back(column_embedding_text(ctx.catalog, ctx.table.columns.at(o)));
  auto vectors = ctx.gateway.embed_batch(texts);
  std::vector<EmbeddingVector> by_ordinal(ctx.table.columns.size());
  for (std::size_t i = 0; i < ordinals.size(); ++i) by_ordinal[ordinals[i]] = std::move(vectors[i]);
  return by_ordinal;
}

bool plan_needs_repair(const GroupingPlan& plan, std::size_t min_group, std::size_t max_groups) {
  if (plan.groups.size() > max_groups) return true;
  return std::any_of(plan.groups.begin(), plan.groups.end(),
                     [&](const PlanGroup& g) { return g.ordinals.size() < min_group; });
}

}  // namespace

std::vector<std::vector<std::size_t>> partition_windows(std::span<const std::size_t> ordinals,
                                                        std::size_t window, std::size_t min_group) {
  if (window == 0) throw Error("window must be positive");
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < ordinals.size(); i += window) {
    std::size_t end = std::min(ordinals.size(), i + window);
    out.emplace_back(ordinals.begin() + static_cast<std::ptrdiff_t>(i),
                     ordinals.begin() + static_cast<std::ptrdiff_t>(end));
  }
  if (out.size() >= 2 && out.back().size() < min_group) {
    auto tail = std::move(out.back());
    out.pop_back();
    out.back().insert(out.back().end(), tail.begin(), tail.end());
  }
  return out;
}

std::vector<WindowSummary> stage1_window_summaries(const TableBuildContext& ctx,
                                                   std::span<const std::size_t> ordinals) {
  auto windows = partition_windows(ordinals, ctx.params.window, ctx.params.min_group);
  std::vector<WindowSummary> out;
  out.reserve(windows.size());
  for (std::size_t w = 0; w < windows.size(); ++w) {
    std::string prompt = "Task: window-summary\n" + table_header(ctx);
    prompt += ctx.table.ordered ? "Columns " + range_text(windows[w]) + ":\n"
                                : "Batch " + std::to_string(w + 1) + " of " + std::to_string(windows.size()) + ":\n";
    for (std::size_t o : windows[w]) prompt += column_line(ctx, o) + "\n";
    prompt += "Write a short summary of the theme of these columns.";
    try {
      out.push_back(WindowSummary{windows[w], ask(ctx, std::move(prompt))});
    } catch (const GatewayError& e) {
      throw GatewayError("window " + std::to_string(w) + " of table " + ctx.table.table_id + ": " + e.what());
    }
  }
  return out;
}

std::vector<std::size_t> theme_sample_positions(std::size_t n, std::size_t k) {
  std::vector<std::size_t> out;
  if (n == 0) return out;
  if (k >= n || n == 1) {
    for (std::size_t i = 0; i < n; ++i) out.push_back(i);
    return out;
  }
  if (k < 2) throw Error("sample count must be at least 2");
  for (std::size_t i = 0; i < k; ++i) {
    double x = static_cast<double>(i) * static_cast<double>(n - 1) / static_cast<double>(k - 1);
    auto p = static_cast<std::size_t>(std::llround(x));
    if (out.empty() || out.back() != p) out.push_back(p);
  }
  return out;
}

std::string stage2_global_theme(const TableBuildContext& ctx, std::span<const std::size_t> ordinals) {
  std::string prompt = "Task: table-theme\n" + table_header(ctx);
  prompt += "Columns in scope: " + std::to_string(ordinals.size()) + "\nEvenly spaced sample:\n";
  for (std::size_t p : theme_sample_positions(ordinals.size(), ctx.params.theme_samples)) {
    prompt += column_line(ctx, ordinals[p]) + "\n";
  }
  prompt += "Describe the overall theme and, when meaningful, the coarse topical progression.";
  return ask(ctx, std::move(prompt));
}

std::optional<GroupingPlan> parse_grouping_plan(std::string_view reply, std::span<const std::size_t> ordinals,
                                                bool ordered) {
  std::string lower = text::to_lower(reply);
  std::size_t pos = lower.find("groups:");
  pos = pos == std::string::npos ? 0 : pos + 7;
  GroupingPlan plan;
  while ((pos = reply.find('[', pos)) != std::string_view::npos) {
    std::size_t close = reply.find(']', pos);
    if (close == std::string_view::npos) return std::nullopt;
    PlanGroup g;
    if (!parse_items(reply.substr(pos + 1, close - pos - 1), ordinals.size(), g.ordinals)) return std::nullopt;
    std::size_t next = reply.find('[', close);
    g.label = clean_label(reply.substr(close + 1, next == std::string_view::npos ? std::string_view::npos : next - close - 1));
    std::sort(g.ordinals.begin(), g.ordinals.end());
    plan.groups.push_back(std::move(g));
    pos = close + 1;
  }
  if (plan.groups.empty()) return std::nullopt;

  std::set<std::size_t> expected(ordinals.begin(), ordinals.end());
  std::set<std::size_t> seen;
  for (const auto& g : plan.groups) {
    for (std::size_t o : g.ordinals) {
      if (!expected.contains(o) || !seen.insert(o).second) return std::nullopt;
    }
  }
  if (seen.size() != expected.size()) return std::nullopt;
  if (ordered) {
    for (const auto& g : plan.groups) {
      for (std::size_t i = 1; i < g.ordinals.size(); ++i) {
        if (g.ordinals[i] != g.ordinals[i - 1] + 1) return std::nullopt;
      }
    }
  }
  std::sort(plan.groups.begin(), plan.groups.end(),
            [](const PlanGroup& a, const PlanGroup& b) { return a.ordinals.front() < b.ordinals.front(); });
  for (std::size_t i = 0; i < plan.groups.size(); ++i) {
    if (plan.groups[i].label.empty()) plan.groups[i].label = "group " + std::to_string(i + 1);
  }
  return plan;
}

GroupingPlan repair_plan(GroupingPlan plan, bool ordered, std::size_t min_group, std::size_t max_groups,
                         std::span<const EmbeddingVector> embeddings) {
  auto& groups = plan.groups;
  auto target_for = [&](std::size_t i) -> std::size_t {
    if (ordered) {
      if (i == 0) return 1;
      if (i + 1 == groups.size()) return i - 1;
      return groups[i - 1].ordinals.size() <= groups[i + 1].ordinals.size() ? i - 1 : i + 1;
    }
    std::size_t best = i == 0 ? 1 : 0;
    double best_score = -2.0;
    for (std::size_t j = 0; j < groups.size(); ++j) {
      if (j == i) continue;
      double score = embeddings.empty() ? -static_cast<double>(groups[j].ordinals.size())
                                        : centroid_cosine(groups[i], groups[j], embeddings);
      if (score > best_score) {
        best_score = score;
        best = j;
      }
    }
    return best;
  };
  auto merge = [&](std::size_t from) {
    std::size_t into = target_for(from);
    auto& dst = groups[into].ordinals;
    dst.insert(dst.end(), groups[from].ordinals.begin(), groups[from].ordinals.end());
    std::sort(dst.begin(), dst.end());
    groups.erase(groups.begin() + static_cast<std::ptrdiff_t>(from));
    plan.repaired = true;
  };

  while (groups.size() > 1) {
    auto it = std::find_if(groups.begin(), groups.end(),
                           [&](const PlanGroup& g) { return g.ordinals.size() < min_group; });
    if (it == groups.end()) break;
    merge(static_cast<std::size_t>(it - groups.begin()));
  }
  while (groups.size() > std::max<std::size_t>(max_groups, 1)) {
    auto it = std::min_element(groups.begin(), groups.end(), [](const PlanGroup& a, const PlanGroup& b) {
      return a.ordinals.size() < b.ordinals.size();
    });
    merge(static_cast<std::size_t>(it - groups.begin()));
  }
  return plan;
}

GroupingPlan uniform_plan(std::span<const std::size_t> ordinals, std::size_t fan_out, std::size_t min_group) {
  const std::size_t n = ordinals.size();
  std::size_t g = std::min(fan_out, std::max<std::size_t>(2, min_group == 0 ? n : n / min_group));
  g = std::max<std::size_t>(1, std::min(g, n));
  GroupingPlan plan;
  plan.fallback = true;
  std::size_t base = n / g, extra = n % g, at = 0;
  for (std::size_t i = 0; i < g; ++i) {
    std::size_t size = base + (i < extra ? 1 : 0);
    PlanGroup group;
    group.label = "part " + std::to_string(i + 1);
    group.ordinals.assign(ordinals.begin() + static_cast<std::ptrdiff_t>(at),
                          ordinals.begin() + static_cast<std::ptrdiff_t>(at + size));
    at += size;
    plan.groups.push_back(std::move(group));
  }
  return plan;
}

GroupingPlan stage3_conceptual_map(const TableBuildContext& ctx, std::span<const std::size_t> ordinals,
                                   std::span<const WindowSummary> windows, std::string_view theme) {
  const auto& p = ctx.params;
  const std::size_t max_groups = 2 * p.fan_out;
  std::string prompt = "Task: grouping-plan\n" + table_header(ctx);
  prompt += "Columns to group: " + range_text(ordinals) + " (" + std::to_string(ordinals.size()) + " columns)\n";
  prompt += "Theme: " + std::string(theme) + "\nWindow summaries:\n";
  for (std::size_t w = 0; w < windows.size(); ++w) {
    prompt += "- " + (ctx.table.ordered ? range_text(windows[w].ordinals) : "batch " + std::to_string(w + 1)) +
              " " + windows[w].summary + "\n";
  }
  if (!ctx.table.ordered) {
    prompt += "Columns:\n";
    for (std::size_t o : ordinals) prompt += column_line(ctx, o) + "\n";
  }
  prompt += "Propose about " + std::to_string(p.fan_out) + " semantic groups with standardized labels, each of at least " +
            std::to_string(p.min_group) + " columns and at most " + std::to_string(max_groups) + " groups in total.\n";
  prompt += ctx.table.ordered ? "Reply with one line: groups: [start..end]=label, [start..end]=label (contiguous spans covering every column)"
                              : "Reply with one line: groups: [i,j,k]=label, [..]=label (every column in exactly one group)";

  std::vector<EmbeddingVector> embeddings;
  auto attempt = [&](const std::string& text) -> std::optional<GroupingPlan> {
    auto parsed = parse_grouping_plan(text, ordinals, ctx.table.ordered);
    if (!parsed) return std::nullopt;
    if (!ctx.table.ordered && embeddings.empty() && plan_needs_repair(*parsed, p.min_group, max_groups)) {
      embeddings = span_embeddings(ctx, ordinals);
    }
    GroupingPlan repaired = repair_plan(std::move(*parsed), ctx.table.ordered, p.min_group, max_groups, embeddings);
    if (repaired.groups.size() < 2) return std::nullopt;
    return repaired;
  };

  if (auto plan = attempt(ask(ctx, prompt))) return *plan;
  spdlog::debug("table {}: grouping plan unparseable, re-prompting", ctx.table.table_id);
  prompt += "\nYour previous reply could not be used. Reply only with the groups line.";
  if (auto plan = attempt(ask(ctx, prompt))) return *plan;
  spdlog::info("table {}: grouping plan unparseable twice, using uniform split", ctx.table.table_id);
  return uniform_plan(ordinals, p.fan_out, p.min_group);
}

std::vector<BoundaryMove> parse_boundary_moves(std::string_view reply) {
  static const std::regex pattern(R"(move\s+boundary\s+(\d+)\s*(?:->|\xE2\x86\x92|to)\s*(\d+))", std::regex::icase);
  std::vector<BoundaryMove> out;
  std::string s(reply);
  for (auto it = std::sregex_iterator(s.begin(), s.end(), pattern); it != std::sregex_iterator(); ++it) {
    auto from = parse_index((*it)[1].str());
    auto to = parse_index((*it)[2].str());
    if (from && to) out.push_back({*from, *to});
  }
  return out;
}

RefineOutcome apply_boundary_moves(const GroupingPlan& plan, std::span<const BoundaryMove> moves,
                                   std::size_t switch_budget, std::size_t min_group) {
  RefineOutcome out{plan, {}, {}};
  auto& groups = out.plan.groups;
  for (const auto& move : moves) {
    if (out.accepted.size() >= switch_budget) {
      out.discarded.push_back(move);
      continue;
    }
    auto it = std::find_if(groups.begin() + (groups.empty() ? 0 : 1), groups.end(),
                           [&](const PlanGroup& g) { return !g.ordinals.empty() && g.ordinals.front() == move.from; });
    if (it == groups.end() || move.to == move.from) {
      out.discarded.push_back(move);
      continue;
    }
    auto& right = *it;
    auto& left = *(it - 1);
    const std::size_t left_begin = left.ordinals.front();
    const std::size_t right_end = right.ordinals.back() + 1;
    if (move.to <= left_begin || move.to >= right_end || move.to - left_begin < min_group ||
        right_end - move.to < min_group) {
      spdlog::debug("boundary move {} -> {} discarded", move.from, move.to);
      out.discarded.push_back(move);
      continue;
    }
    left.ordinals.clear();
    right.ordinals.clear();
    for (std::size_t o = left_begin; o < move.to; ++o) left.ordinals.push_back(o);
    for (std::size_t o = move.to; o < right_end; ++o) right.ordinals.push_back(o);
    out.accepted.push_back(move);
  }
  return out;
}

RefineOutcome stage4_refine_boundaries(const TableBuildContext& ctx, const GroupingPlan& plan) {
  std::vector<std::size_t> ordinals;
  for (const auto& g : plan.groups) ordinals.insert(ordinals.end(), g.ordinals.begin(), g.ordinals.end());
  std::set<std::size_t> boundaries;
  for (std::size_t i = 1; i < plan.groups.size(); ++i) boundaries.insert(plan.groups[i].ordinals.front());

  std::vector<BoundaryMove> proposals;
  for (const auto& window : partition_windows(ordinals, ctx.params.window, ctx.params.min_group)) {
    std::vector<std::size_t> inside;
    for (std::size_t b : boundaries) {
      if (b >= window.front() && b <= window.back()) inside.push_back(b);
    }
    if (inside.empty()) continue;
    std::string prompt = "Task: boundary-refinement\n" + table_header(ctx) + "Current groups:\n";
    for (const auto& g : plan.groups) prompt += "- " + group_label_text(g, true) + "\n";
    prompt += "Window columns " + range_text(window) + ":\n";
    for (std::size_t o : window) prompt += column_line(ctx, o) + "\n";
    std::vector<std::string> listed;
    for (std::size_t b : inside) listed.push_back(std::to_string(b));
    prompt += "Boundaries in this window: " + text::join(listed, ", ") + "\n";
    prompt += "If a group should start at a different column, reply with lines \"move boundary X -> Y\". "
              "Reply \"none\" to keep the boundaries.";
    auto moves = parse_boundary_moves(ask(ctx, std::move(prompt)));
    proposals.insert(proposals.end(), moves.begin(), moves.end());
  }
  return apply_boundary_moves(plan, proposals, ctx.params.switch_budget, ctx.params.min_group);
}

namespace {

TreeNode make_node(const TableBuildContext& ctx, NodeKind kind, std::string label, std::string summary,
                   std::span<const std::size_t> ordinals) {
  TreeNode node;
  node.kind = kind;
  node.label = std::move(label);
  node.summary = std::move(summary);
  node.table_id = ctx.table.table_id;
  if (ctx.table.ordered && !ordinals.empty()) node.span = OrdinalSpan{ordinals.front(), ordinals.back() + 1};
  return node;
}

NodeId build_leaf(const TableBuildContext& ctx, ContextTree& tree, std::span<const std::size_t> ordinals,
                  const std::string& label) {
  std::string prompt = "Task: span-summary\n" + table_header(ctx) + "Group: " + label + "\nColumns:\n";
  for (std::size_t o : ordinals) prompt += column_line(ctx, o) + "\n";
  prompt += "Write a 1-2 sentence summary of what these columns record.";
  TreeNode node = make_node(ctx, NodeKind::kGroupLeaf, label, ask(ctx, std::move(prompt)), ordinals);
  for (std::size_t o : ordinals) node.members.push_back(ctx.table.columns.at(o));
  return tree.add_node(std::move(node));
}

NodeId build_span(const TableBuildContext& ctx, ContextTree& tree, std::span<const std::size_t> ordinals,
                  NodeKind kind, const std::string& label) {
  const auto& p = ctx.params;
  auto windows = stage1_window_summaries(ctx, ordinals);
  std::string theme = stage2_global_theme(ctx, ordinals);
  GroupingPlan plan = stage3_conceptual_map(ctx, ordinals, windows, theme);
  if (ctx.table.ordered && p.refine_boundaries && plan.groups.size() >= 2) {
    auto refined = stage4_refine_boundaries(ctx, plan);
    for (const auto& m : refined.discarded) {
      spdlog::debug("table {}: boundary move {} -> {} discarded", ctx.table.table_id, m.from, m.to);
    }
    plan = std::move(refined.plan);
  }
  NodeId node = tree.add_node(make_node(ctx, kind, label, theme, ordinals));
  for (const auto& g : plan.groups) {
    NodeId child = g.ordinals.size() <= p.leaf_budget
                       ? build_leaf(ctx, tree, g.ordinals, g.label)
                       : build_span(ctx, tree, g.ordinals, NodeKind::kWithinTable, g.label);
    tree.attach(node, child);
  }
  if (p.annotate_relations && plan.groups.size() >= 2) {
    annotate_sibling_relations(tree, node, p, ctx.gateway, ctx.meter);
  }
  return node;
}

}  // namespace

ContextTree build_table_tree(const TableBuildContext& ctx) {
  ctx.params.validate();
  const std::size_t n = ctx.table.columns.size();
  if (n == 0) throw Error("table " + ctx.table.table_id + " has no columns");
  std::vector<std::size_t> ordinals(n);
  for (std::size_t i = 0; i < n; ++i) ordinals[i] = i;

  ContextTree tree(ctx.catalog.side(), ctx.params);
  NodeId root;
  if (n <= ctx.params.leaf_budget) {
    std::string prompt = "Task: table-summary\n" + table_header(ctx) + "Columns:\n";
    for (std::size_t o : ordinals) prompt += column_line(ctx, o) + "\n";
    prompt += "Write a 1-2 sentence summary of this table.";
    root = tree.add_node(make_node(ctx, NodeKind::kTableRoot, ctx.table.name, ask(ctx, std::move(prompt)), ordinals));
    tree.attach(root, build_leaf(ctx, tree, ordinals, "columns " + range_text(ordinals)));
  } else {
    root = build_span(ctx, tree, ordinals, NodeKind::kTableRoot, ctx.table.name);
  }
  tree.set_root(root);
  tree.finalize();
  return tree;
}

std::string sibling_handle(std::size_t index) {
  std::string out;
  if (index >= 26) out += static_cast<char>('A' + index / 26 - 1);
  out += static_cast<char>('A' + index % 26);
  return out;
}

std::vector<ParsedRelation> parse_sibling_relations(std::string_view reply, std::size_t sibling_count,
                                                    const RelationCaps& caps) {
  static const std::regex arrow(R"(^([A-Z]{1,2})\s*(?:->|=>|\xE2\x86\x92)\s*([A-Z]{1,2})\s*[:.]?\s*(.*)$)");
  auto handle_index = [&](const std::string& h) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < sibling_count; ++i) {
      if (sibling_handle(i) == h) return i;
    }
    return std::nullopt;
  };
  std::vector<ParsedRelation> out;
  std::vector<std::size_t> per_from(sibling_count, 0);
  for (auto raw : text::split_lines(reply)) {
    std::string_view line = text::trim(raw);
    while (!line.empty() && (line.front() == '-' || line.front() == '*')) line = text::trim(line.substr(1));
    if (line.empty()) continue;
    std::string s(line);
    std::optional<std::size_t> from, to;
    std::string body;
    std::smatch m;
    if (std::regex_match(s, m, arrow)) {
      from = handle_index(m[1].str());
      to = handle_index(m[2].str());
      body = std::string(text::trim(m[3].str()));
      if (body.empty()) body = s;
      if (!from || !to) {
        spdlog::debug("relation names unknown sibling: {}", s);
        continue;
      }
    } else {
      std::vector<std::size_t> found;
      std::string word;
      auto flush = [&] {
        if (auto idx = handle_index(word); idx && std::find(found.begin(), found.end(), *idx) == found.end()) {
          found.push_back(*idx);
        }
        word.clear();
      };
      for (char c : s) {
        if (std::isalnum(static_cast<unsigned char>(c)) || c == '_') {
          word += c;
        } else {
          flush();
        }
      }
      flush();
      if (found.size() < 2) continue;
      from = found[0];
      to = found[1];
      body = s;
    }
    if (*from == *to) continue;
    if (per_from[*from] >= caps.per_column) continue;
    ++per_from[*from];
    out.push_back(ParsedRelation{*from, *to, std::move(body)});
    if (out.size() >= caps.per_leaf_max) break;
  }
  return out;
}

std::vector<RelationSnippet> annotate_sibling_relations(ContextTree& tree, NodeId parent, const TreeParams& params,
                                                        ModelGateway& gateway, UsageMeter* meter) {
  const auto children = tree.node(parent).children;
  if (children.size() < 2) return {};
  const auto& caps = params.relation_caps;
  std::string prompt = "Task: sibling-relations\nParent: " + tree.node(parent).label + "\nSiblings:\n";
  for (std::size_t i = 0; i < children.size(); ++i) {
    const auto& c = tree.node(children[i]);
    prompt += sibling_handle(i) + ": " + c.label + ". " + c.summary + "\n";
  }
  prompt += "Propose " + std::to_string(caps.per_leaf_min) + " to " + std::to_string(caps.per_leaf_max) +
            " short directed relations between siblings, at most " + std::to_string(caps.per_column) +
            " starting from each sibling. One per line as \"A -> B: 1-2 sentence relation\".";
  ChatCall call;
  call.role = CallRole::kRelation;
  call.prompt = std::move(prompt);
  call.timeout = Seconds{params.relation_timeout_s};
  auto reply = gateway.complete(call, meter);

  std::vector<RelationSnippet> out;
  for (auto& r : parse_sibling_relations(reply.text, children.size(), caps)) {
    RelationSnippet snippet{children[r.from], children[r.to], std::move(r.text), true};
    tree.add_relation(snippet);
    out.push_back(std::move(snippet));
  }
  return out;
}

ContextTree cluster_tables(std::vector<ContextTree> table_trees, const TreeParams& params, ModelGateway& gateway,
                           UsageMeter* meter) {
  if (table_trees.empty()) throw Error("cluster_tables: no table trees");
  if (table_trees.size() == 1) {
    ContextTree only = std::move(table_trees.front());
    only.set_params(params);
    only.finalize();
    return only;
  }
  const std::size_t n = table_trees.size();
  std::vector<std::string> texts, keys;
  for (const auto& t : table_trees) {
    const auto& root = t.node(t.root());
    texts.push_back(root.summary.empty() ? root.label : root.summary);
    keys.push_back(root.table_id.value_or(root.label));
  }
  auto embeddings = gateway.embed_batch(texts);
  std::vector<std::vector<double>> dist(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) dist[i][j] = dist[j][i] = 1.0 - cosine(embeddings[i], embeddings[j]);
  }

  ContextTree out(table_trees.front().side(), params);
  struct Cluster {
    std::vector<std::size_t> items;
    NodeId node;
    std::string key;
  };
  std::vector<Cluster> clusters;
  for (std::size_t i = 0; i < n; ++i) clusters.push_back(Cluster{{i}, out.graft(table_trees[i]), keys[i]});

  auto linkage = [&](const Cluster& a, const Cluster& b) {
    double sum = 0.0;
    for (std::size_t x : a.items) {
      for (std::size_t y : b.items) sum += dist[x][y];
    }
    return sum / static_cast<double>(a.items.size() * b.items.size());
  };
  auto summarize = [&](std::span<const NodeId> children, bool database) {
    std::string prompt = "Task: cluster-summary\n";
    prompt += database ? "Scope: whole database\n" : "Scope: group of related tables\n";
    prompt += "Child summaries:\n";
    for (NodeId c : children) prompt += "- " + out.node(c).label + ": " + out.node(c).summary + "\n";
    prompt += "Write a 1-2 sentence summary of what these parts have in common.";
    ChatCall call;
    call.role = CallRole::kTreeSummary;
    call.prompt = std::move(prompt);
    call.timeout = Seconds{params.summary_timeout_s};
    return std::string(text::trim(gateway.complete(call, meter).text));
  };

  bool last_was_merge = false;
  while (clusters.size() > 1) {
    std::size_t best_a = 0, best_b = 1;
    double best = linkage(clusters[0], clusters[1]);
    auto key_pair = [&](std::size_t a, std::size_t b) {
      return std::minmax(clusters[a].key, clusters[b].key);
    };
    for (std::size_t a = 0; a < clusters.size(); ++a) {
      for (std::size_t b = a + 1; b < clusters.size(); ++b) {
        double d = linkage(clusters[a], clusters[b]);
        bool tie = std::abs(d - best) <= 1e-12;
        if ((!tie && d < best) || (tie && key_pair(a, b) < key_pair(best_a, best_b))) {
          best = d;
          best_a = a;
          best_b = b;
        }
      }
    }
    if (best > params.cluster_threshold) break;
    if (clusters[best_b].key < clusters[best_a].key) std::swap(best_a, best_b);
    std::vector<NodeId> children{clusters[best_a].node, clusters[best_b].node};
    TreeNode node;
    node.kind = NodeKind::kCluster;
    node.label = "cluster: " + out.node(children[0]).label + " + " + out.node(children[1]).label;
    node.summary = summarize(children, false);
    NodeId id = out.add_node(std::move(node));
    for (NodeId c : children) out.attach(id, c);
    Cluster merged{clusters[best_a].items, id, std::min(clusters[best_a].key, clusters[best_b].key)};
    merged.items.insert(merged.items.end(), clusters[best_b].items.begin(), clusters[best_b].items.end());
    std::size_t hi = std::max(best_a, best_b), lo = std::min(best_a, best_b);
    clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(hi));
    clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(lo));
    clusters.push_back(std::move(merged));
    last_was_merge = true;
  }

  NodeId root;
  if (clusters.size() == 1 && last_was_merge) {
    root = clusters.front().node;
    auto& node = out.mutable_node(root);
    node.kind = NodeKind::kDbRoot;
    node.label = "database";
  } else {
    std::sort(clusters.begin(), clusters.end(), [](const Cluster& a, const Cluster& b) { return a.key < b.key; });
    std::vector<NodeId> children;
    for (const auto& c : clusters) children.push_back(c.node);
    TreeNode node;
    node.kind = NodeKind::kDbRoot;
    node.label = "database";
    node.summary = summarize(children, true);
    root = out.add_node(std::move(node));
    for (NodeId c : children) out.attach(root, c);
  }
  out.set_root(root);
  out.finalize();
  return out;
}

namespace {

std::string table_fingerprint(const SchemaCatalog& catalog, const TableMeta& table, const TreeParams& params,
                              const ModelGateway& gateway) {
  std::string material = gateway.chat_backend_id() + "\n" + gateway.embedding_backend_id() + "\n" +
                         to_json(params).dump() + "\n" + table.table_id + "\n" + table.name + "\n" +
                         table.description + "\n" + (table.ordered ? "1" : "0") + "\n";
  for (const auto& ref : table.columns) {
    material += catalog.display_name(ref) + "\t" + catalog.column(ref).description + "\n";
  }
  return text::sha256_hex(material);
}

}  // namespace

ContextTree build_context_tree(const SchemaCatalog& catalog, const TreeParams& params, ModelGateway& gateway,
                               const TreeBuildOptions& options) {
  params.validate();
  std::vector<const TableMeta*> tables;
  for (const auto& t : catalog.tables()) {
    if (!t.columns.empty()) tables.push_back(&t);
  }
  if (tables.empty()) throw Error("catalog has no columns");
  if (options.checkpoint_dir) std::filesystem::create_directories(*options.checkpoint_dir);

  std::vector<std::optional<ContextTree>> built(tables.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::mutex error_mutex;
  std::exception_ptr error;

  auto work = [&] {
    while (!failed.load()) {
      std::size_t i = next.fetch_add(1);
      if (i >= tables.size()) return;
      try {
        std::optional<std::filesystem::path> checkpoint;
        if (options.checkpoint_dir) {
          checkpoint = *options.checkpoint_dir /
                       ("table-" + table_fingerprint(catalog, *tables[i], params, gateway).substr(0, 24) + ".json");
          if (std::filesystem::exists(*checkpoint)) {
            built[i] = ContextTree::load(*checkpoint);
            continue;
          }
        }
        TableBuildContext ctx{catalog, *tables[i], params, gateway, options.meter};
        built[i] = build_table_tree(ctx);
        if (checkpoint) built[i]->save(*checkpoint);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        failed = true;
      }
    }
  };

  const std::size_t workers = std::clamp<std::size_t>(options.workers, 1, tables.size());
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);

  std::vector<ContextTree> trees;
  trees.reserve(built.size());
  for (auto& t : built) trees.push_back(std::move(*t));
  return cluster_tables(std::move(trees), params, gateway, options.meter);
}

}  // namespace construm
