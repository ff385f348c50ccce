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
#include <fstream>
#include <numeric>
#include <set>

#include "construm/error.hpp"
#include "construm/similarity_graph.hpp"

namespace construm {

using nlohmann::json;

bool SimilarityGroup::contains(const ColumnRef& ref) const {
  return std::binary_search(members.begin(), members.end(), ref);
}

namespace {

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n), rank_(n, 0) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
  }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (rank_[a] < rank_[b]) std::swap(a, b);
    parent_[b] = a;
    if (rank_[a] == rank_[b]) ++rank_[a];
  }

 private:
  std::vector<std::size_t> parent_;
  std::vector<unsigned> rank_;
};

}  // namespace

std::vector<SimilarityLink> threshold_links(std::span<const ColumnRef> columns,
                                            std::span<const EmbeddingVector> embeddings,
                                            double tau) {
  if (columns.size() != embeddings.size()) throw Error("threshold_links: columns/embeddings size mismatch");
  std::vector<SimilarityLink> links;
  for (std::size_t i = 0; i < columns.size(); ++i) {
    for (std::size_t j = i + 1; j < columns.size(); ++j) {
      double c = cosine(embeddings[i], embeddings[j]);
      if (!reaches_threshold(c, tau)) continue;
      if (columns[i] < columns[j]) {
        links.push_back({columns[i], columns[j], c});
      } else {
        links.push_back({columns[j], columns[i], c});
      }
    }
  }
  std::sort(links.begin(), links.end(), [](const SimilarityLink& x, const SimilarityLink& y) {
    return std::tie(x.a, x.b) < std::tie(y.a, y.b);
  });
  return links;
}

std::vector<SimilarityGroup> extract_groups(std::span<const SimilarityLink> links,
                                            std::span<const ColumnRef> all_columns, Side side) {
  std::map<ColumnRef, std::size_t> index;
  for (std::size_t i = 0; i < all_columns.size(); ++i) index.emplace(all_columns[i], i);
  DisjointSets sets(all_columns.size());
  for (const auto& link : links) {
    auto a = index.find(link.a);
    auto b = index.find(link.b);
    if (a == index.end() || b == index.end()) {
      throw Error("similarity link references unknown column " +
                  to_string(a == index.end() ? link.a : link.b));
    }
    sets.unite(a->second, b->second);
  }
  std::map<std::size_t, std::vector<ColumnRef>> components;
  for (std::size_t i = 0; i < all_columns.size(); ++i) components[sets.find(i)].push_back(all_columns[i]);
  std::vector<SimilarityGroup> groups;
  groups.reserve(components.size());
  for (auto& [root, members] : components) {
    std::sort(members.begin(), members.end());
    members.erase(std::unique(members.begin(), members.end()), members.end());
    groups.push_back(SimilarityGroup{side, std::move(members)});
  }
  std::sort(groups.begin(), groups.end(), [](const SimilarityGroup& x, const SimilarityGroup& y) {
    return x.members.front() < y.members.front();
  });
  return groups;
}

Hypergraph::Hypergraph(Side side, double tau, std::vector<ColumnRef> columns,
                       std::vector<EmbeddingVector> embeddings)
    : side_(side), tau_(tau), columns_(std::move(columns)), embeddings_(std::move(embeddings)) {
  if (columns_.size() != embeddings_.size()) throw Error("hypergraph: columns/embeddings size mismatch");
  if (columns_.empty()) throw Error("hypergraph: no columns");
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (columns_[i].side != side_) throw Error("hypergraph: column " + to_string(columns_[i]) + " on wrong side");
    if (!index_.emplace(columns_[i], i).second) throw Error("hypergraph: duplicate column " + to_string(columns_[i]));
    if (embeddings_[i].values.size() != embeddings_.front().values.size()) {
      throw Error("hypergraph: embedding dimension mismatch");
    }
  }
  links_ = threshold_links(columns_, embeddings_, tau_);
  groups_ = extract_groups(links_, columns_, side_);
  group_index_.assign(columns_.size(), 0);
  for (std::size_t g = 0; g < groups_.size(); ++g) {
    for (const auto& m : groups_[g].members) group_index_[index_.at(m)] = g;
  }
}

std::size_t Hypergraph::position(const ColumnRef& ref) const {
  auto it = index_.find(ref);
  if (it == index_.end()) throw Error("hypergraph: unknown column " + to_string(ref));
  return it->second;
}

const EmbeddingVector& Hypergraph::embedding(const ColumnRef& ref) const {
  return embeddings_[position(ref)];
}

double Hypergraph::cosine(const ColumnRef& a, const ColumnRef& b) const {
  return construm::cosine(embedding(a), embedding(b));
}

const SimilarityGroup& Hypergraph::group_of(const ColumnRef& ref) const {
  return groups_[group_index_[position(ref)]];
}

std::vector<std::pair<ColumnRef, double>> Hypergraph::neighbors(const ColumnRef& ref, double tau) const {
  const auto& e = embedding(ref);
  std::vector<std::pair<ColumnRef, double>> out;
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (columns_[i] == ref) continue;
    double c = construm::cosine(e, embeddings_[i]);
    if (reaches_threshold(c, tau)) out.emplace_back(columns_[i], c);
  }
  std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) {
    if (x.second != y.second) return x.second > y.second;
    return x.first < y.first;
  });
  return out;
}

json Hypergraph::to_json() const {
  auto ref_json = [](const ColumnRef& r) { return json::array({r.table_id, r.ordinal}); };
  json embeddings = json::array();
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    embeddings.push_back({{"table_id", columns_[i].table_id},
                          {"ordinal", columns_[i].ordinal},
                          {"norm", embeddings_[i].norm},
                          {"values", embeddings_[i].values}});
  }
  json links = json::array();
  for (const auto& l : links_) links.push_back({{"a", ref_json(l.a)}, {"b", ref_json(l.b)}, {"cosine", l.cosine}});
  json groups = json::array();
  for (const auto& g : groups_) {
    json members = json::array();
    for (const auto& m : g.members) members.push_back(ref_json(m));
    groups.push_back(std::move(members));
  }
  return {{"format", "construm.hypergraph/1"},
          {"side", to_string(side_)},
          {"tau", tau_},
          {"embeddings", std::move(embeddings)},
          {"links", std::move(links)},
          {"groups", std::move(groups)}};
}

Hypergraph Hypergraph::from_json(const json& doc) {
  try {
    Side side = parse_side(doc.at("side").get<std::string>());
    double tau = doc.at("tau").get<double>();
    std::vector<ColumnRef> columns;
    std::vector<EmbeddingVector> embeddings;
    for (const auto& e : doc.at("embeddings")) {
      columns.push_back(ColumnRef{side, e.at("table_id").get<std::string>(), e.at("ordinal").get<std::size_t>()});
      embeddings.push_back(EmbeddingVector{e.at("values").get<std::vector<double>>(), e.value("norm", 1.0)});
    }
    Hypergraph graph(side, tau, std::move(columns), std::move(embeddings));
    if (doc.contains("links") && doc.at("links").size() != graph.links_.size()) {
      throw ParseError("links", "stored links disagree with embeddings and tau");
    }
    if (doc.contains("groups") && doc.at("groups").size() != graph.groups_.size()) {
      throw ParseError("groups", "stored groups disagree with embeddings and tau");
    }
    return graph;
  } catch (const json::exception& e) {
    throw ParseError("hypergraph", e.what());
  }
}

void Hypergraph::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << to_json().dump() << '\n';
}

Hypergraph Hypergraph::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open graph file " + path.string());
  try {
    return from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ParseError(path.string(), e.what());
  }
}

std::string column_embedding_text(const SchemaCatalog& catalog, const ColumnRef& ref,
                                  bool include_table) {
  const auto& meta = catalog.column(ref);
  std::string out = "name: " + catalog.display_name(ref) + ". description: " + meta.description + ".";
  if (include_table) out += " table: " + catalog.table_of(ref).name + ".";
  return out;
}

Hypergraph build_hypergraph(const SchemaCatalog& catalog, ModelGateway& gateway, double tau,
                            bool include_table_name) {
  std::vector<ColumnRef> columns;
  std::vector<std::string> texts;
  for (const auto& c : catalog.columns()) {
    columns.push_back(c.ref);
    texts.push_back(column_embedding_text(catalog, c.ref, include_table_name));
  }
  auto embeddings = gateway.embed_batch(texts);
  return Hypergraph(catalog.side(), tau, std::move(columns), std::move(embeddings));
}

std::vector<ColumnRef> expand_candidates(std::span<const ColumnRef> shortlist, const Hypergraph& target,
                                         double tau, std::size_t cap_total, std::size_t cap_strong) {
  std::vector<ColumnRef> out(shortlist.begin(), shortlist.end());
  if (cap_total == 0) return out;
  std::set<ColumnRef> present(shortlist.begin(), shortlist.end());
  std::map<ColumnRef, double> best;
  const std::size_t strong = std::min(cap_strong, shortlist.size());
  for (std::size_t i = 0; i < strong; ++i) {
    for (const auto& [ref, c] : target.neighbors(shortlist[i], tau)) {
      if (present.contains(ref)) continue;
      auto [it, inserted] = best.emplace(ref, c);
      if (!inserted) it->second = std::max(it->second, c);
    }
  }
  std::vector<std::pair<ColumnRef, double>> additions(best.begin(), best.end());
  std::sort(additions.begin(), additions.end(), [](const auto& x, const auto& y) {
    if (x.second != y.second) return x.second > y.second;
    return x.first < y.first;
  });
  for (std::size_t i = 0; i < additions.size() && i < cap_total; ++i) out.push_back(additions[i].first);
  return out;
}

std::vector<SimilarityGroup> groups_within(std::span<const ColumnRef> candidates, const Hypergraph& target) {
  std::vector<ColumnRef> unique;
  for (const auto& c : candidates) {
    if (std::find(unique.begin(), unique.end(), c) == unique.end()) unique.push_back(c);
  }
  std::vector<EmbeddingVector> embeddings;
  embeddings.reserve(unique.size());
  for (const auto& c : unique) embeddings.push_back(target.embedding(c));
  auto links = threshold_links(unique, embeddings, target.tau());
  return extract_groups(links, unique, target.side());
}

SimilarityGroup source_confusable_set(const ColumnRef& query, const Hypergraph& source,
                                      bool restrict_to_table) {
  SimilarityGroup group = source.group_of(query);
  if (restrict_to_table) {
    std::erase_if(group.members, [&](const ColumnRef& r) { return r.table_id != query.table_id; });
  }
  if (!group.contains(query)) {
    group.members.push_back(query);
    std::sort(group.members.begin(), group.members.end());
  }
  return group;
}

}  // namespace construm
