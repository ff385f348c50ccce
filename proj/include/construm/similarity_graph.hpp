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
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "construm/gateway.hpp"
#include "construm/schema.hpp"

namespace construm {

// Cosines within this distance below a threshold still count as reaching it,
// so identical texts link at tau = 1 despite rounding.
inline constexpr double kCosineTolerance = 1e-12;

inline bool reaches_threshold(double cosine, double tau) noexcept {
  return cosine >= tau - kCosineTolerance;
}

struct SimilarityLink {
  ColumnRef a;  // a < b
  ColumnRef b;
  double cosine = 0.0;
};

// One hyperedge: a set of mutually confusable columns on one side.
struct SimilarityGroup {
  Side side = Side::kTarget;
  std::vector<ColumnRef> members;  // sorted

  std::size_t size() const noexcept { return members.size(); }
  bool contains(const ColumnRef& ref) const;
  friend bool operator==(const SimilarityGroup&, const SimilarityGroup&) = default;
};

// Thresholded all-pairs similarity structure over one catalog side.
class Hypergraph {
 public:
  Hypergraph(Side side, double tau, std::vector<ColumnRef> columns,
             std::vector<EmbeddingVector> embeddings);

  Side side() const noexcept { return side_; }
  double tau() const noexcept { return tau_; }
  std::span<const ColumnRef> columns() const noexcept { return columns_; }
  std::span<const SimilarityLink> links() const noexcept { return links_; }
  std::span<const SimilarityGroup> groups() const noexcept { return groups_; }

  bool contains(const ColumnRef& ref) const noexcept { return index_.contains(ref); }
  const EmbeddingVector& embedding(const ColumnRef& ref) const;
  double cosine(const ColumnRef& a, const ColumnRef& b) const;
  const SimilarityGroup& group_of(const ColumnRef& ref) const;

  // Columns other than `ref` with cosine >= tau, highest first, ties by ref.
  std::vector<std::pair<ColumnRef, double>> neighbors(const ColumnRef& ref, double tau) const;

  nlohmann::json to_json() const;
  static Hypergraph from_json(const nlohmann::json& doc);
  void save(const std::filesystem::path& path) const;
  static Hypergraph load(const std::filesystem::path& path);

 private:
  std::size_t position(const ColumnRef& ref) const;

  Side side_;
  double tau_;
  std::vector<ColumnRef> columns_;
  std::vector<EmbeddingVector> embeddings_;
  std::map<ColumnRef, std::size_t> index_;
  std::vector<SimilarityLink> links_;
  std::vector<SimilarityGroup> groups_;
  std::vector<std::size_t> group_index_;
};

// "name: <name>. description: <description>. table: <table name>."
std::string column_embedding_text(const SchemaCatalog& catalog, const ColumnRef& ref,
                                  bool include_table = true);

std::vector<SimilarityLink> threshold_links(std::span<const ColumnRef> columns,
                                            std::span<const EmbeddingVector> embeddings,
                                            double tau);

// Connected components under `links`; unlinked columns are singletons.
// Groups are ordered by their smallest member.
std::vector<SimilarityGroup> extract_groups(std::span<const SimilarityLink> links,
                                            std::span<const ColumnRef> all_columns, Side side);

Hypergraph build_hypergraph(const SchemaCatalog& catalog, ModelGateway& gateway, double tau,
                            bool include_table_name = true);

// C0 followed by up to cap_total tau-neighbours of the first cap_strong
// members, best cosine first.
std::vector<ColumnRef> expand_candidates(std::span<const ColumnRef> shortlist,
                                         const Hypergraph& target, double tau,
                                         std::size_t cap_total, std::size_t cap_strong);

std::vector<SimilarityGroup> groups_within(std::span<const ColumnRef> candidates,
                                           const Hypergraph& target);

SimilarityGroup source_confusable_set(const ColumnRef& query, const Hypergraph& source,
                                      bool restrict_to_table);

}  // namespace construm
