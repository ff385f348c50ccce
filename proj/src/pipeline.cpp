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
#include <chrono>
#include <map>
#include <regex>
#include <set>

#include <spdlog/spdlog.h>

#include "construm/error.hpp"
#include "construm/pipeline.hpp"
#include "construm/text.hpp"

namespace construm {

using nlohmann::json;

std::string_view to_string(MatchMode mode) noexcept {
  switch (mode) {
    case MatchMode::kFull: return "full";
    case MatchMode::kNoTree: return "no_tree";
    case MatchMode::kNoDiff: return "no_diff";
    case MatchMode::kLlmLocal: return "llm_local";
    case MatchMode::kEmbedTop1: return "embed_top1";
  }
  return "full";
}

MatchMode parse_match_mode(std::string_view s) {
  for (auto m : {MatchMode::kFull, MatchMode::kNoTree, MatchMode::kNoDiff, MatchMode::kLlmLocal, MatchMode::kEmbedTop1}) {
    if (to_string(m) == s) return m;
  }
  throw Error("unknown mode \"" + std::string(s) + "\" (expected full, no_tree, no_diff, llm_local or embed_top1)");
}

PipelineConfig PipelineConfig::for_mode(MatchMode mode) { return for_mode(mode, PipelineConfig{}); }

PipelineConfig PipelineConfig::for_mode(MatchMode mode, PipelineConfig base) {
  base.mode = mode;
  base.use_tree = mode == MatchMode::kFull || mode == MatchMode::kNoDiff;
  base.use_diff = mode == MatchMode::kFull || mode == MatchMode::kNoTree;
  base.use_expansion = base.use_diff;
  return base;
}

void PipelineConfig::validate() const {
  auto expected = for_mode(mode, *this);
  if (expected.use_tree != use_tree || expected.use_diff != use_diff || expected.use_expansion != use_expansion) {
    throw Error("pipeline flags disagree with mode " + std::string(to_string(mode)));
  }
  if (k == 0) throw Error("k must be at least 1");
  if (decision_timeout_s <= 0 || diff_timeout_s <= 0) throw Error("timeouts must be positive");
  if (max_members < 2) throw Error("max_members must be at least 2");
}

json to_json(const PipelineConfig& c) {
  return {{"mode", to_string(c.mode)},
          {"k", c.k},
          {"pack_budget", c.pack_budget},
          {"max_relations", c.max_relations},
          {"decision_timeout_s", c.decision_timeout_s},
          {"diff_timeout_s", c.diff_timeout_s},
          {"cap_total", c.cap_total},
          {"cap_strong", c.cap_strong},
          {"max_groups", c.max_groups},
          {"max_members", c.max_members},
          {"restrict_source_to_table", c.restrict_source_to_table}};
}

PipelineConfig pipeline_config_from_json(const json& j, PipelineConfig c) {
  if (j.contains("mode")) c.mode = parse_match_mode(j.at("mode").get<std::string>());
  c.k = j.value("k", c.k);
  c.pack_budget = j.value("pack_budget", c.pack_budget);
  c.max_relations = j.value("max_relations", c.max_relations);
  c.decision_timeout_s = j.value("decision_timeout_s", c.decision_timeout_s);
  c.diff_timeout_s = j.value("diff_timeout_s", c.diff_timeout_s);
  c.cap_total = j.value("cap_total", c.cap_total);
  c.cap_strong = j.value("cap_strong", c.cap_strong);
  c.max_groups = j.value("max_groups", c.max_groups);
  c.max_members = j.value("max_members", c.max_members);
  c.restrict_source_to_table = j.value("restrict_source_to_table", c.restrict_source_to_table);
  return PipelineConfig::for_mode(c.mode, c);
}

json to_json(const MatchTrace& t) {
  return {{"mode", to_string(t.mode)},
          {"llm_calls", t.llm_calls},
          {"cache_hits", t.cache_hits},
          {"prompt_tokens", t.prompt_tokens},
          {"completion_tokens", t.completion_tokens},
          {"total_tokens", t.total_tokens},
          {"latency_s", t.latency_s},
          {"shortlist_size", t.shortlist_size},
          {"candidate_count", t.candidate_count},
          {"candidate_blocks", t.candidate_blocks},
          {"source_block", t.source_block},
          {"warnings", t.warnings},
          {"prompt_snapshot", t.prompt_snapshot}};
}

MatchTrace match_trace_from_json(const json& j) {
  MatchTrace t;
  t.mode = parse_match_mode(j.value("mode", std::string("full")));
  t.llm_calls = j.value("llm_calls", std::int64_t{0});
  t.cache_hits = j.value("cache_hits", std::int64_t{0});
  t.prompt_tokens = j.value("prompt_tokens", std::int64_t{0});
  t.completion_tokens = j.value("completion_tokens", std::int64_t{0});
  t.total_tokens = j.value("total_tokens", std::int64_t{0});
  t.latency_s = j.value("latency_s", 0.0);
  t.shortlist_size = j.value("shortlist_size", std::size_t{0});
  t.candidate_count = j.value("candidate_count", std::size_t{0});
  t.candidate_blocks = j.value("candidate_blocks", std::size_t{0});
  t.source_block = j.value("source_block", false);
  t.warnings = j.value("warnings", std::vector<std::string>{});
  t.prompt_snapshot = j.value("prompt_snapshot", std::string());
  return t;
}

json to_json(const MatchResult& r, const SchemaCatalog& source, const SchemaCatalog& target) {
  auto cids = [&](const std::vector<ColumnRef>& refs) {
    json out = json::array();
    for (const auto& ref : refs) out.push_back(target.column(ref).cid);
    return out;
  };
  return {{"source", source.column(r.query.source).cid},
          {"source_name", source.display_name(r.query.source)},
          {"truth", r.query.ground_truth ? json(target.column(*r.query.ground_truth).cid) : json(nullptr)},
          {"chosen", target.column(r.chosen).cid},
          {"ranked", cids(r.ranked)},
          {"candidates", cids(r.candidates)},
          {"trace", to_json(r.trace)}};
}

std::vector<ColumnRef> shortlist(const EmbeddingVector& query, const Hypergraph& target, std::size_t k) {
  std::vector<std::pair<double, ColumnRef>> scored;
  for (const auto& ref : target.columns()) scored.emplace_back(cosine(query, target.embedding(ref)), ref);
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<ColumnRef> out;
  for (std::size_t i = 0; i < scored.size() && i < k; ++i) out.push_back(scored[i].second);
  return out;
}

namespace {

EmbeddingVector query_embedding(const ColumnRef& source, const MatchArtifacts& a, ModelGateway* gateway) {
  if (a.source_graph && a.source_graph->contains(source)) return a.source_graph->embedding(source);
  if (gateway == nullptr || a.source == nullptr) throw Error("no embedding available for query " + to_string(source));
  std::vector<std::string> texts{column_embedding_text(*a.source, source)};
  return gateway->embed_batch(texts).front();
}

}  // namespace

std::vector<ColumnRef> shortlist(const ColumnRef& source, const MatchArtifacts& artifacts, std::size_t k) {
  if (artifacts.target_graph == nullptr) throw Error("shortlist needs the target similarity graph");
  return shortlist(query_embedding(source, artifacts, nullptr), *artifacts.target_graph, k);
}

std::string assemble_final_prompt(const PromptColumn& query, std::string_view source_block,
                                  std::span<const PromptColumn> candidates, std::string_view candidate_blocks) {
  if (candidates.empty()) throw Error("assemble_final_prompt: no candidates");
  auto describe = [](const PromptColumn& c) {
    std::string out = "name " + c.name + "; desc " + (c.description.empty() ? std::string("(none)") : c.description);
    if (!c.table.empty()) out += "; table " + c.table;
    out += "\n";
    if (c.context) {
      out += "  context:\n" + text::indent(*c.context, "    ");
      if (out.back() != '\n') out += '\n';
    }
    return out;
  };
  std::string out = "Task: match-decision\nChoose the one candidate target column that matches the query column.\n";
  out += "Query column: " + describe(query);
  out += source_block;
  out += "Candidates:\n";
  for (const auto& c : candidates) out += "- " + c.cid + ": " + describe(c);
  out += candidate_blocks;
  out += "End your reply with a final line \"ANSWER: <cid>\" naming exactly one candidate cid.";
  return out;
}

ColumnRef parse_choice(std::string_view reply, std::span<const ColumnRef> candidates, const SchemaCatalog& target) {
  static const std::regex answer(R"(ANSWER:\s*(C\d+))");
  std::string s(reply);
  std::string cid;
  for (auto it = std::sregex_iterator(s.begin(), s.end(), answer); it != std::sregex_iterator(); ++it) {
    cid = (*it)[1].str();
  }
  if (cid.empty()) throw ChoiceError(ChoiceError::Kind::kNoAnswer, "reply has no \"ANSWER: C<n>\" line");
  const ColumnMeta* meta = target.find_cid(cid);
  if (meta == nullptr || std::find(candidates.begin(), candidates.end(), meta->ref) == candidates.end()) {
    throw ChoiceError(ChoiceError::Kind::kInvalidChoice, "answer " + cid + " is not a candidate");
  }
  return meta->ref;
}

namespace {

PromptColumn prompt_column(const SchemaCatalog& catalog, const ColumnRef& ref, const ContextPack* pack) {
  const auto& meta = catalog.column(ref);
  PromptColumn c{meta.cid, catalog.display_name(ref), meta.description, catalog.table_of(ref).name, std::nullopt};
  if (pack) c.context = pack->rendered;
  return c;
}

std::optional<ContextPack> try_pack(const ContextTree* tree, const SchemaCatalog& catalog, const ColumnRef& ref,
                                    const PipelineConfig& config, MatchTrace& trace) {
  if (tree == nullptr) {
    trace.warnings.push_back("no " + std::string(to_string(ref.side)) + " tree; context omitted");
    return std::nullopt;
  }
  try {
    return build_context_pack(*tree, catalog, ref, PackOptions{config.pack_budget, config.max_relations});
  } catch (const std::exception& e) {
    trace.warnings.push_back("context pack for " + catalog.column(ref).cid + ": " + e.what());
    return std::nullopt;
  }
}

}  // namespace

MatchResult run_match(const MatchQuery& query, const PipelineConfig& config, const MatchArtifacts& artifacts,
                      ModelGateway& gateway) {
  config.validate();
  if (!artifacts.source || !artifacts.target) throw Error("run_match needs both catalogs");
  const auto& S = *artifacts.source;
  const auto& T = *artifacts.target;
  S.column(query.source);

  const auto start = std::chrono::steady_clock::now();
  UsageMeter meter;
  MatchResult result;
  result.query = query;
  auto& trace = result.trace;
  trace.mode = config.mode;

  std::optional<EmbeddingVector> q_emb;
  auto affinity_target = [&](const ColumnRef& ref) -> double {
    if (!q_emb || !artifacts.target_graph) return 0.0;
    return cosine(*q_emb, artifacts.target_graph->embedding(ref));
  };

  std::vector<ColumnRef> c0;
  if (query.shortlist.empty()) {
    if (!artifacts.target_graph) throw Error("query has no shortlist and no target graph is loaded");
    q_emb = query_embedding(query.source, artifacts, &gateway);
    c0 = shortlist(*q_emb, *artifacts.target_graph, config.k);
  } else {
    std::set<ColumnRef> seen;
    for (const auto& ref : query.shortlist) {
      T.column(ref);
      if (seen.insert(ref).second) c0.push_back(ref);
    }
    if (artifacts.target_graph) {
      try {
        q_emb = query_embedding(query.source, artifacts, &gateway);
      } catch (const std::exception& e) {
        trace.warnings.push_back(std::string("query embedding unavailable: ") + e.what());
      }
    }
  }
  if (c0.empty()) throw Error("empty shortlist for " + S.column(query.source).cid);
  trace.shortlist_size = c0.size();

  auto finish = [&](ColumnRef chosen, std::vector<ColumnRef> candidates) {
    result.chosen = chosen;
    result.candidates = candidates;
    std::vector<ColumnRef> rest;
    for (const auto& c : candidates) {
      if (c != chosen) rest.push_back(c);
    }
    if (q_emb && artifacts.target_graph) {
      std::stable_sort(rest.begin(), rest.end(), [&](const ColumnRef& a, const ColumnRef& b) {
        double ca = affinity_target(a), cb = affinity_target(b);
        if (ca != cb) return ca > cb;
        return a < b;
      });
    }
    result.ranked = {chosen};
    result.ranked.insert(result.ranked.end(), rest.begin(), rest.end());
    auto usage = meter.snapshot();
    trace.llm_calls = usage.calls;
    trace.cache_hits = usage.cache_hits;
    trace.prompt_tokens = usage.prompt_tokens;
    trace.completion_tokens = usage.completion_tokens;
    trace.total_tokens = usage.total_tokens();
    trace.candidate_count = candidates.size();
    trace.latency_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
  };

  if (config.mode == MatchMode::kEmbedTop1) return finish(c0.front(), c0);

  // Step 1: expansion.
  std::vector<ColumnRef> candidates = c0;
  if (config.use_expansion) {
    if (artifacts.target_graph) {
      try {
        candidates = expand_candidates(c0, *artifacts.target_graph, artifacts.target_graph->tau(), config.cap_total,
                                       config.cap_strong);
      } catch (const std::exception& e) {
        trace.warnings.push_back(std::string("expansion skipped: ") + e.what());
      }
    } else {
      trace.warnings.push_back("expansion skipped: no target graph");
    }
  }

  // Step 2: context packs.
  std::optional<ContextPack> source_pack;
  std::map<ColumnRef, ContextPack> source_packs, target_packs;
  if (config.use_tree) {
    source_pack = try_pack(artifacts.source_tree, S, query.source, config, trace);
    if (source_pack) source_packs.emplace(query.source, *source_pack);
    for (const auto& c : candidates) {
      if (auto pack = try_pack(artifacts.target_tree, T, c, config, trace)) target_packs.emplace(c, std::move(*pack));
    }
  }

  // Steps 3 and 4: differentiation blocks.
  std::string source_text, candidate_text;
  if (config.use_diff) {
    if (artifacts.source_graph && artifacts.source_graph->contains(query.source)) {
      try {
        SimilarityGroup group =
            source_confusable_set(query.source, *artifacts.source_graph, config.restrict_source_to_table);
        if (group.size() >= 2) {
          const auto& sg = *artifacts.source_graph;
          std::vector<SimilarityGroup> one{group};
          auto trimmed = select_groups(
              one, [&](const ColumnRef& r) { return r == query.source ? 2.0 : sg.cosine(query.source, r); }, 1,
              config.max_members);
          if (config.use_tree) {
            for (const auto& m : trimmed.front().members) {
              if (!source_packs.contains(m)) {
                if (auto pack = try_pack(artifacts.source_tree, S, m, config, trace)) source_packs.emplace(m, *pack);
              }
            }
          }
          BlockRequest request{&trimmed.front(), &S, config.use_tree ? &source_packs : nullptr, &S, query.source,
                               Seconds{config.diff_timeout_s}};
          source_text = render_source_block(generate_block(request, gateway, &meter));
          trace.source_block = true;
        }
      } catch (const std::exception& e) {
        trace.warnings.push_back(std::string("source differentiation skipped: ") + e.what());
      }
    } else {
      trace.warnings.push_back("source differentiation skipped: no source graph");
    }

    if (artifacts.target_graph) {
      std::vector<DifferentiationBlock> blocks;
      try {
        auto groups = groups_within(candidates, *artifacts.target_graph);
        for (const auto& g : select_groups(groups, affinity_target, config.max_groups, config.max_members)) {
          try {
            BlockRequest request{&g, &T, config.use_tree ? &target_packs : nullptr, &S, query.source,
                                 Seconds{config.diff_timeout_s}};
            blocks.push_back(generate_block(request, gateway, &meter));
          } catch (const std::exception& e) {
            trace.warnings.push_back(std::string("candidate group skipped: ") + e.what());
          }
        }
      } catch (const std::exception& e) {
        trace.warnings.push_back(std::string("candidate differentiation skipped: ") + e.what());
      }
      trace.candidate_blocks = blocks.size();
      candidate_text = render_candidate_blocks(blocks);
    } else {
      trace.warnings.push_back("candidate differentiation skipped: no target graph");
    }
  }

  // Step 5: one decision call.
  std::vector<PromptColumn> listed;
  for (const auto& c : candidates) {
    auto it = target_packs.find(c);
    listed.push_back(prompt_column(T, c, it == target_packs.end() ? nullptr : &it->second));
  }
  const std::string prompt = assemble_final_prompt(prompt_column(S, query.source, source_pack ? &*source_pack : nullptr),
                                                   source_text, listed, candidate_text);
  ChatCall call;
  call.role = CallRole::kDecision;
  call.prompt = prompt;
  call.timeout = Seconds{config.decision_timeout_s};
  trace.prompt_snapshot = prompt;

  ColumnRef chosen;
  try {
    auto reply = gateway.complete(call, &meter);
    try {
      chosen = parse_choice(reply.text, candidates, T);
    } catch (const ChoiceError& e) {
      trace.warnings.push_back(std::string("decision retry: ") + e.what());
      std::vector<std::string> cids;
      for (const auto& c : listed) cids.push_back(c.cid);
      call.prompt = prompt + "\nReminder: your previous reply did not end with a valid choice. End with exactly one line "
                             "\"ANSWER: <cid>\" where <cid> is one of: " + text::join(cids, ", ") + ".";
      trace.prompt_snapshot = call.prompt;
      reply = gateway.complete(call, &meter);
      chosen = parse_choice(reply.text, candidates, T);
    }
  } catch (const ChoiceError& e) {
    throw PipelineError(std::string("decision failed: ") + e.what(), trace.prompt_snapshot);
  } catch (const GatewayError& e) {
    throw PipelineError(std::string("decision call failed: ") + e.what(), trace.prompt_snapshot);
  }
  for (const auto& w : trace.warnings) spdlog::debug("{}: {}", S.column(query.source).cid, w);
  return finish(chosen, candidates);
}

}  // namespace construm
