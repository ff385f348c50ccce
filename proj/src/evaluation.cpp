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
#include <exception>
#include <mutex>
#include <set>
#include <thread>

#include <spdlog/spdlog.h>

#include "construm/error.hpp"
#include "construm/evaluation.hpp"
#include "construm/similarity_graph.hpp"

namespace construm {

using nlohmann::json;

std::vector<SimilarPair> qualifying_pairs(const BenchmarkSpec& spec, std::span<const EmbeddingVector> embeddings) {
  if (spec.source == nullptr) throw Error("benchmark spec has no source catalog");
  const auto columns = spec.source->columns();
  if (embeddings.size() != columns.size()) throw Error("benchmark: one embedding per source column required");
  std::vector<SimilarPair> out;
  for (std::size_t i = 0; i < columns.size(); ++i) {
    for (std::size_t j = i + 1; j < columns.size(); ++j) {
      const std::size_t separation = j - i - 1;
      if (separation < spec.min_separation) continue;
      double c = cosine(embeddings[i], embeddings[j]);
      if (!reaches_threshold(c, spec.pair_tau)) continue;
      out.push_back(SimilarPair{columns[i].ref, columns[j].ref, c, separation});
    }
  }
  return out;
}

std::vector<MatchQuery> generate_benchmark(const BenchmarkSpec& spec, std::span<const EmbeddingVector> embeddings) {
  std::set<ColumnRef> members;
  for (const auto& p : qualifying_pairs(spec, embeddings)) {
    members.insert(p.a);
    members.insert(p.b);
  }
  std::vector<ColumnRef> kept;
  for (const auto& m : members) {
    if (spec.verified_matches.contains(m)) kept.push_back(m);
  }
  std::sort(kept.begin(), kept.end(), [&](const ColumnRef& a, const ColumnRef& b) {
    return spec.source->position(a) < spec.source->position(b);
  });
  std::vector<MatchQuery> out;
  for (const auto& m : kept) {
    MatchQuery q;
    q.source = m;
    q.ground_truth = spec.verified_matches.at(m);
    q.slice = m.table_id;
    out.push_back(std::move(q));
  }
  if (out.empty()) spdlog::warn("benchmark generation found no qualifying pairs");
  return out;
}

std::vector<MatchQuery> generate_benchmark(const BenchmarkSpec& spec, ModelGateway& gateway) {
  if (spec.source == nullptr) throw Error("benchmark spec has no source catalog");
  std::vector<std::string> texts;
  for (const auto& c : spec.source->columns()) texts.push_back(column_embedding_text(*spec.source, c.ref));
  auto embeddings = gateway.embed_batch(texts);
  return generate_benchmark(spec, embeddings);
}

json benchmark_to_json(std::span<const MatchQuery> queries, const SchemaCatalog& source, const SchemaCatalog& target) {
  json out = json::array();
  for (const auto& q : queries) {
    json item = {{"source", source.column(q.source).cid}};
    if (!q.shortlist.empty()) {
      json sl = json::array();
      for (const auto& r : q.shortlist) sl.push_back(target.column(r).cid);
      item["shortlist"] = std::move(sl);
    }
    item["truth"] = q.ground_truth ? json(target.column(*q.ground_truth).cid) : json(nullptr);
    if (!q.slice.empty()) item["slice"] = q.slice;
    out.push_back(std::move(item));
  }
  return out;
}

ColumnRef resolve_column(const SchemaCatalog& catalog, std::string_view token) {
  if (const auto* meta = catalog.find_cid(token)) return meta->ref;
  auto colon = token.rfind(':');
  if (colon != std::string_view::npos) {
    if (const auto* meta = catalog.find_by_name(token.substr(0, colon), token.substr(colon + 1))) return meta->ref;
  }
  throw CatalogError("unknown " + std::string(to_string(catalog.side())) + " column \"" + std::string(token) + "\"");
}

std::vector<MatchQuery> benchmark_from_json(const json& doc, const SchemaCatalog& source, const SchemaCatalog& target) {
  if (!doc.is_array()) throw ParseError("benchmark", "expected a JSON array of queries");
  std::vector<MatchQuery> out;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& item = doc[i];
    const std::string where = "benchmark[" + std::to_string(i) + "]";
    try {
      MatchQuery q;
      q.source = resolve_column(source, item.at("source").get<std::string>());
      if (item.contains("shortlist")) {
        for (const auto& t : item.at("shortlist")) q.shortlist.push_back(resolve_column(target, t.get<std::string>()));
      }
      if (item.contains("truth") && !item.at("truth").is_null()) {
        q.ground_truth = resolve_column(target, item.at("truth").get<std::string>());
      }
      q.slice = item.value("slice", std::string());
      out.push_back(std::move(q));
    } catch (const json::exception& e) {
      throw ParseError(where, e.what());
    } catch (const CatalogError& e) {
      throw ParseError(where, e.what());
    }
  }
  return out;
}

std::map<ColumnRef, ColumnRef> verified_matches_from_json(const json& doc, const SchemaCatalog& source,
                                                          const SchemaCatalog& target) {
  std::map<ColumnRef, ColumnRef> out;
  auto add = [&](const std::string& s, const std::string& t) {
    out[resolve_column(source, s)] = resolve_column(target, t);
  };
  try {
    if (doc.is_object()) {
      for (const auto& [s, t] : doc.items()) add(s, t.get<std::string>());
    } else if (doc.is_array()) {
      for (const auto& item : doc) add(item.at("source").get<std::string>(), item.at("target").get<std::string>());
    } else {
      throw ParseError("matches", "expected an object or an array");
    }
  } catch (const json::exception& e) {
    throw ParseError("matches", e.what());
  }
  return out;
}

double weighted_total(std::span<const SliceAccuracy> slices) {
  double num = 0.0, den = 0.0;
  for (const auto& s : slices) {
    num += static_cast<double>(s.count) * s.accuracy;
    den += static_cast<double>(s.count);
  }
  return den == 0.0 ? 0.0 : num / den;
}

EvalReport evaluate(std::span<const MatchQuery> queries, std::span<const QueryOutcome> outcomes,
                    const SchemaCatalog& source, const SchemaCatalog& target, std::string mode) {
  if (outcomes.size() != queries.size()) {
    throw Error("missing result for query " +
                (outcomes.size() < queries.size() ? source.column(queries[outcomes.size()].source).cid
                                                  : std::string("(extra results)")));
  }
  EvalReport report;
  report.mode = std::move(mode);
  std::size_t hit1 = 0, hit3 = 0, hit5 = 0, traced = 0;
  std::map<std::string, std::pair<std::size_t, std::size_t>> slice_counts;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const auto& q = queries[i];
    const auto& o = outcomes[i];
    if (!q.ground_truth) throw Error("query " + source.column(q.source).cid + " has no ground truth");
    EvalRow row;
    row.source_cid = source.column(q.source).cid;
    row.slice = q.slice.empty() ? "all" : q.slice;
    row.truth_cid = target.column(*q.ground_truth).cid;
    if (o.result) {
      if (o.result->query.source != q.source) throw Error("missing result for query " + row.source_cid);
      row.chosen_cid = target.column(o.result->chosen).cid;
      const auto& ranked = o.result->ranked;
      auto it = std::find(ranked.begin(), ranked.end(), *q.ground_truth);
      if (it != ranked.end()) row.rank = static_cast<std::size_t>(it - ranked.begin()) + 1;
      row.trace = o.result->trace;
      ++traced;
      report.mean_llm_calls += static_cast<double>(row.trace.llm_calls);
      report.mean_tokens += static_cast<double>(row.trace.total_tokens);
      report.mean_latency_s += row.trace.latency_s;
    } else {
      row.error = o.error.empty() ? "no result" : o.error;
    }
    row.correct = row.rank && *row.rank == 1;
    if (row.rank && *row.rank <= 1) ++hit1;
    if (row.rank && *row.rank <= 3) ++hit3;
    if (row.rank && *row.rank <= 5) ++hit5;
    auto& sc = slice_counts[row.slice];
    ++sc.first;
    if (row.correct) ++sc.second;
    report.rows.push_back(std::move(row));
  }
  const double n = static_cast<double>(queries.size());
  if (n > 0) {
    report.acc_at_1 = static_cast<double>(hit1) / n;
    report.acc_at_3 = static_cast<double>(hit3) / n;
    report.acc_at_5 = static_cast<double>(hit5) / n;
  }
  if (traced > 0) {
    report.mean_llm_calls /= static_cast<double>(traced);
    report.mean_tokens /= static_cast<double>(traced);
    report.mean_latency_s /= static_cast<double>(traced);
  }
  std::vector<SliceAccuracy> slices;
  for (const auto& [name, counts] : slice_counts) {
    SliceAccuracy s{counts.first, static_cast<double>(counts.second) / static_cast<double>(counts.first)};
    report.slices[name] = s;
    slices.push_back(s);
  }
  report.weighted_total = weighted_total(slices);
  return report;
}

AblationTable run_ablation_suite(std::span<const MatchQuery> queries, std::span<const MatchMode> modes,
                                 const MatchArtifacts& artifacts, ModelGateway& gateway,
                                 const AblationOptions& options) {
  AblationTable table;
  if (!artifacts.source || !artifacts.target) throw Error("ablation suite needs both catalogs");
  for (MatchMode mode : modes) {
    const PipelineConfig config = PipelineConfig::for_mode(mode, options.base);
    std::vector<QueryOutcome> outcomes(queries.size());
    std::atomic<std::size_t> next{0};
    auto work = [&] {
      for (std::size_t i = next.fetch_add(1); i < queries.size(); i = next.fetch_add(1)) {
        try {
          outcomes[i].result = run_match(queries[i], config, artifacts, gateway);
        } catch (const std::exception& e) {
          outcomes[i].error = e.what();
        }
      }
    };
    const std::size_t workers = std::clamp<std::size_t>(options.workers, 1, std::max<std::size_t>(1, queries.size()));
    if (workers == 1) {
      work();
    } else {
      std::vector<std::thread> pool;
      for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
      for (auto& t : pool) t.join();
    }
    table.reports.push_back(evaluate(queries, outcomes, *artifacts.source, *artifacts.target,
                                     std::string(to_string(mode))));
  }
  return table;
}

json to_json(const AblationTable& table) {
  json reports = json::array();
  for (const auto& r : table.reports) {
    json slices = json::object();
    for (const auto& [name, s] : r.slices) slices[name] = {{"count", s.count}, {"accuracy", s.accuracy}};
    json rows = json::array();
    for (const auto& row : r.rows) {
      rows.push_back({{"source", row.source_cid},
                      {"slice", row.slice},
                      {"truth", row.truth_cid},
                      {"chosen", row.chosen_cid},
                      {"rank", row.rank ? json(*row.rank) : json(nullptr)},
                      {"correct", row.correct},
                      {"error", row.error},
                      {"trace", to_json(row.trace)}});
    }
    reports.push_back({{"mode", r.mode},
                       {"acc_at_1", r.acc_at_1},
                       {"acc_at_3", r.acc_at_3},
                       {"acc_at_5", r.acc_at_5},
                       {"mean_llm_calls", r.mean_llm_calls},
                       {"mean_tokens", r.mean_tokens},
                       {"mean_latency_s", r.mean_latency_s},
                       {"weighted_total", r.weighted_total},
                       {"slices", std::move(slices)},
                       {"rows", std::move(rows)}});
  }
  return {{"format", "construm.ablation/1"}, {"reports", std::move(reports)}};
}

AblationTable ablation_table_from_json(const json& doc) {
  AblationTable table;
  try {
    for (const auto& r : doc.at("reports")) {
      EvalReport report;
      report.mode = r.at("mode").get<std::string>();
      report.acc_at_1 = r.at("acc_at_1").get<double>();
      report.acc_at_3 = r.at("acc_at_3").get<double>();
      report.acc_at_5 = r.at("acc_at_5").get<double>();
      report.mean_llm_calls = r.at("mean_llm_calls").get<double>();
      report.mean_tokens = r.at("mean_tokens").get<double>();
      report.mean_latency_s = r.at("mean_latency_s").get<double>();
      report.weighted_total = r.at("weighted_total").get<double>();
      for (const auto& [name, s] : r.at("slices").items()) {
        report.slices[name] = SliceAccuracy{s.at("count").get<std::size_t>(), s.at("accuracy").get<double>()};
      }
      for (const auto& row : r.at("rows")) {
        EvalRow e;
        e.source_cid = row.at("source").get<std::string>();
        e.slice = row.at("slice").get<std::string>();
        e.truth_cid = row.at("truth").get<std::string>();
        e.chosen_cid = row.at("chosen").get<std::string>();
        if (!row.at("rank").is_null()) e.rank = row.at("rank").get<std::size_t>();
        e.correct = row.at("correct").get<bool>();
        e.error = row.at("error").get<std::string>();
        e.trace = match_trace_from_json(row.at("trace"));
        report.rows.push_back(std::move(e));
      }
      table.reports.push_back(std::move(report));
    }
  } catch (const json::exception& e) {
    throw ParseError("results", e.what());
  }
  return table;
}

}  // namespace construm
