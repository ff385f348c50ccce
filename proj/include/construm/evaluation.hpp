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

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "construm/gateway.hpp"
#include "construm/pipeline.hpp"
#include "construm/schema.hpp"

namespace construm {

struct BenchmarkSpec {
  const SchemaCatalog* source = nullptr;
  const SchemaCatalog* target = nullptr;
  double pair_tau = 0.9;
  std::size_t min_separation = 5;  // intervening items between the pair
  std::map<ColumnRef, ColumnRef> verified_matches;
};

struct SimilarPair {
  ColumnRef a;
  ColumnRef b;
  double cosine = 0.0;
  std::size_t separation = 0;
};

// Source pairs passing both the similarity and the separation filters.
// `embeddings` follow source catalog order.
std::vector<SimilarPair> qualifying_pairs(const BenchmarkSpec& spec, std::span<const EmbeddingVector> embeddings);

std::vector<MatchQuery> generate_benchmark(const BenchmarkSpec& spec, std::span<const EmbeddingVector> embeddings);
std::vector<MatchQuery> generate_benchmark(const BenchmarkSpec& spec, ModelGateway& gateway);

nlohmann::json benchmark_to_json(std::span<const MatchQuery> queries, const SchemaCatalog& source,
                                 const SchemaCatalog& target);
std::vector<MatchQuery> benchmark_from_json(const nlohmann::json& doc, const SchemaCatalog& source,
                                            const SchemaCatalog& target);

// Resolves "C12" or "<table_id>:<raw name>".
ColumnRef resolve_column(const SchemaCatalog& catalog, std::string_view token);
std::map<ColumnRef, ColumnRef> verified_matches_from_json(const nlohmann::json& doc, const SchemaCatalog& source,
                                                          const SchemaCatalog& target);

struct QueryOutcome {
  std::optional<MatchResult> result;
  std::string error;
};

struct EvalRow {
  std::string source_cid;
  std::string slice;
  std::string truth_cid;
  std::string chosen_cid;            // empty on error
  std::optional<std::size_t> rank;   // 1-based rank of the truth in `ranked`
  bool correct = false;
  std::string error;
  MatchTrace trace;
};

struct SliceAccuracy {
  std::size_t count = 0;
  double accuracy = 0.0;
};

struct EvalReport {
  std::string mode;
  std::vector<EvalRow> rows;
  double acc_at_1 = 0.0;
  double acc_at_3 = 0.0;
  double acc_at_5 = 0.0;
  double mean_llm_calls = 0.0;
  double mean_tokens = 0.0;
  double mean_latency_s = 0.0;
  std::map<std::string, SliceAccuracy> slices;
  double weighted_total = 0.0;
};

EvalReport evaluate(std::span<const MatchQuery> queries, std::span<const QueryOutcome> outcomes,
                    const SchemaCatalog& source, const SchemaCatalog& target, std::string mode = "");

// sum(n_i * acc_i) / sum(n_i)
double weighted_total(std::span<const SliceAccuracy> slices);

struct AblationTable {
  std::vector<EvalReport> reports;  // one per mode, input order
};

struct AblationOptions {
  PipelineConfig base;
  std::size_t workers = 1;
};

AblationTable run_ablation_suite(std::span<const MatchQuery> queries, std::span<const MatchMode> modes,
                                 const MatchArtifacts& artifacts, ModelGateway& gateway,
                                 const AblationOptions& options = {});

nlohmann::json to_json(const AblationTable& table);
AblationTable ablation_table_from_json(const nlohmann::json& doc);

enum class ReportFormat { kCsv, kMarkdown };
ReportFormat parse_report_format(std::string_view s);

std::string render_report(const AblationTable& table, ReportFormat format);
// Per-query rows: mode, slice, source, truth, chosen, correct, rank, calls, tokens, latency, error.
std::string render_query_csv(const AblationTable& table);

std::string csv_escape(std::string_view field);
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

}  // namespace construm
