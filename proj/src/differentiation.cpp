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
#include <regex>

#include <spdlog/spdlog.h>

#include "construm/differentiation.hpp"
#include "construm/error.hpp"
#include "construm/text.hpp"

namespace construm {

std::vector<SimilarityGroup> select_groups(std::span<const SimilarityGroup> groups, const QueryAffinity& affinity,
                                           std::size_t max_groups, std::size_t max_members) {
  struct Ranked {
    double best;
    const SimilarityGroup* group;
  };
  std::vector<Ranked> ranked;
  for (const auto& g : groups) {
    if (g.size() < 2) continue;
    double best = -2.0;
    for (const auto& m : g.members) best = std::max(best, affinity(m));
    ranked.push_back({best, &g});
  }
  std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
    if (a.best != b.best) return a.best > b.best;
    if (a.group->size() != b.group->size()) return a.group->size() > b.group->size();
    return a.group->members.front() < b.group->members.front();
  });
  if (ranked.size() > max_groups) ranked.resize(max_groups);

  std::vector<SimilarityGroup> out;
  for (const auto& r : ranked) {
    SimilarityGroup g = *r.group;
    if (g.members.size() > max_members) {
      std::vector<std::pair<double, ColumnRef>> scored;
      for (const auto& m : g.members) scored.emplace_back(affinity(m), m);
      std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
      });
      scored.resize(max_members);
      g.members.clear();
      for (auto& [score, m] : scored) g.members.push_back(std::move(m));
      std::sort(g.members.begin(), g.members.end());
    }
    out.push_back(std::move(g));
  }
  return out;
}

std::optional<ParsedBlockReply> parse_block_reply(std::string_view reply) {
  static const std::regex summary_re(R"(^\s*summary\s*:\s*(.+)$)", std::regex::icase);
  // Accepts "- C12: cue", "cid C12: cue" and "cid 12: cue".
  static const std::regex cue_re(R"(^\s*[-*]?\s*(?:cid\s*C?|C)(\d+)\s*:\s*(.+)$)", std::regex::icase);
  ParsedBlockReply out;
  for (auto raw : text::split_lines(reply)) {
    std::string line(raw);
    std::smatch m;
    if (out.summary.empty() && std::regex_match(line, m, summary_re)) {
      out.summary = std::string(text::trim(m[1].str()));
    } else if (std::regex_match(line, m, cue_re)) {
      std::string cid = "C" + m[1].str();
      out.cues.emplace(cid, std::string(text::trim(m[2].str())));
    }
  }
  if (out.summary.empty()) return std::nullopt;
  return out;
}

namespace {

std::string metadata_line(const SchemaCatalog& catalog, const ColumnRef& ref) {
  const auto& meta = catalog.column(ref);
  std::string line = "name " + catalog.display_name(ref);
  line += "; desc " + (meta.description.empty() ? std::string("(none)") : meta.description);
  line += "; table " + catalog.table_of(ref).name;
  return line;
}

}  // namespace

DifferentiationBlock generate_block(const BlockRequest& request, ModelGateway& gateway, UsageMeter* meter) {
  if (request.group == nullptr || request.catalog == nullptr) throw Error("generate_block: missing group or catalog");
  const auto& group = *request.group;
  const auto& catalog = *request.catalog;
  if (group.size() < 2) throw Error("generate_block: singleton group");

  std::string prompt = "Task: group-differentiation\n";
  prompt += group.side == Side::kSource ? "Side: source (confusable columns around the query)\n"
                                        : "Side: target (confusable candidates)\n";
  if (request.query && request.query_catalog) {
    prompt += "Query column: " + metadata_line(*request.query_catalog, *request.query) + "\n";
  }
  prompt += "Group members:\n";
  for (const auto& ref : group.members) {
    const auto& meta = catalog.column(ref);
    prompt += "- " + meta.cid + ": " + metadata_line(catalog, ref);
    if (request.query && group.side == Side::kSource && *request.query == ref) prompt += " (query)";
    prompt += "\n";
    if (request.packs) {
      if (auto it = request.packs->find(ref); it != request.packs->end()) {
        prompt += "  context:\n" + text::indent(it->second.rendered, "    ");
        if (prompt.back() != '\n') prompt += '\n';
      }
    }
  }
  prompt +=
      "Write one line \"Summary: ...\" with 1-2 sentences on what the members share and how they differ, "
      "then one line per member as \"- <cid>: <short cue>\".";

  ChatCall call;
  call.role = CallRole::kDifferentiation;
  call.prompt = prompt;
  call.timeout = request.timeout;

  DifferentiationBlock block;
  block.side = group.side;
  block.group = group;
  auto parsed = parse_block_reply(gateway.complete(call, meter).text);
  if (!parsed) {
    call.prompt = prompt + "\nYour previous reply did not follow the format. Start with \"Summary:\".";
    parsed = parse_block_reply(gateway.complete(call, meter).text);
  }
  if (!parsed) {
    spdlog::warn("differentiation reply unparseable for group starting at {}", to_string(group.members.front()));
    block.parsed = false;
    block.summary = std::string(kFallbackGroupSummary);
    for (const auto& ref : group.members) block.members.push_back(BlockMember{ref, catalog.column(ref).cid, ""});
    return block;
  }
  block.summary = parsed->summary;
  for (const auto& ref : group.members) {
    const auto& cid = catalog.column(ref).cid;
    auto it = parsed->cues.find(cid);
    block.members.push_back(BlockMember{ref, cid, it == parsed->cues.end() ? std::string(kPlaceholderCue) : it->second});
  }
  return block;
}

namespace {

std::string member_lines(const DifferentiationBlock& block) {
  std::string out;
  for (const auto& m : block.members) {
    if (!m.cue.empty()) out += "- " + m.cid + ": " + m.cue + "\n";
  }
  return out;
}

}  // namespace

std::string render_source_block(const DifferentiationBlock& block) {
  return "Source diff (confusable source group):\nContrast: " + block.summary + "\n" + member_lines(block);
}

std::string render_candidate_blocks(std::span<const DifferentiationBlock> blocks) {
  if (blocks.empty()) return "";
  std::string out = "Differentiation among candidates:\n";
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    std::vector<std::string> cids;
    for (const auto& m : blocks[i].members) cids.push_back(m.cid);
    out += "Group #" + std::to_string(i + 1) + " (" + text::join(cids, " vs ") + "):\n";
    out += blocks[i].summary + "\n" + member_lines(blocks[i]);
  }
  return out;
}

std::string render_blocks(std::span<const DifferentiationBlock> blocks) {
  std::string out;
  std::vector<DifferentiationBlock> candidates;
  for (const auto& b : blocks) {
    if (b.side == Side::kSource) out += render_source_block(b);
  }
  for (const auto& b : blocks) {
    if (b.side == Side::kTarget) candidates.push_back(b);
  }
  return out + render_candidate_blocks(candidates);
}

}  // namespace construm
