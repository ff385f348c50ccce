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

#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "construm/error.hpp"
#include "construm/similarity_graph.hpp"
#include "fixtures.hpp"

namespace construm {
namespace {

using testing::make_catalog;

ColumnRef ref(std::size_t i, const std::string& table = "t", Side side = Side::kTarget) {
  return ColumnRef{side, table, i};
}

EmbeddingVector at_angle(double radians) { return normalize_embedding({std::cos(radians), std::sin(radians)}); }

Hypergraph graph_of(const std::vector<EmbeddingVector>& vectors, double tau, Side side = Side::kTarget) {
  std::vector<ColumnRef> refs;
  for (std::size_t i = 0; i < vectors.size(); ++i) refs.push_back(ref(i, "t", side));
  return Hypergraph(side, tau, refs, vectors);
}

std::vector<std::vector<ColumnRef>> members_of(std::span<const SimilarityGroup> groups) {
  std::vector<std::vector<ColumnRef>> out;
  for (const auto& g : groups) out.push_back(g.members);
  return out;
}

// Components of an explicit link list by DFS.
std::vector<std::vector<ColumnRef>> link_dfs(const std::vector<ColumnRef>& nodes, const std::vector<SimilarityLink>& links) {
  std::map<ColumnRef, std::vector<ColumnRef>> adj;
  for (const auto& n : nodes) adj[n];
  for (const auto& l : links) {
    adj[l.a].push_back(l.b);
    adj[l.b].push_back(l.a);
  }
  std::set<ColumnRef> seen;
  std::vector<std::vector<ColumnRef>> out;
  for (const auto& n : nodes) {
    if (seen.contains(n)) continue;
    std::vector<ColumnRef> comp, stack{n};
    seen.insert(n);
    while (!stack.empty()) {
      auto x = stack.back();
      stack.pop_back();
      comp.push_back(x);
      for (const auto& y : adj[x]) {
        if (seen.insert(y).second) stack.push_back(y);
      }
    }
    std::sort(comp.begin(), comp.end());
    out.push_back(comp);
  }
  std::sort(out.begin(), out.end());
  return out;
}

TEST(Hypergraph, ImpossibleThresholdGivesSingletons) {
  std::mt19937_64 rng(1);
  auto cat = testing::random_text_catalog(Side::kTarget, 40, rng);
  auto gw = testing::gateway_with(std::make_shared<ScriptedChatBackend>(testing::default_script()));
  auto g = build_hypergraph(cat, *gw, 1.0 + 1e-6);
  EXPECT_TRUE(g.links().empty());
  EXPECT_EQ(g.groups().size(), 40u);
}

// Planar vectors at 0, acos(.95) and acos(.95)+acos(.92): AB and BC reach 0.9,
// AC does not.
TEST(Hypergraph, HandBuiltChainOfThree) {
  const double ab = std::acos(0.95), bc = std::acos(0.92);
  std::vector<EmbeddingVector> v{at_angle(0), at_angle(ab), at_angle(ab + bc)};
  auto g = graph_of(v, 0.9);
  ASSERT_EQ(g.links().size(), 2u);
  EXPECT_EQ(g.links()[0].a, ref(0));
  EXPECT_EQ(g.links()[0].b, ref(1));
  EXPECT_NEAR(g.links()[0].cosine, 0.95, 1e-12);
  EXPECT_EQ(g.links()[1].a, ref(1));
  EXPECT_EQ(g.links()[1].b, ref(2));
  EXPECT_NEAR(g.links()[1].cosine, 0.92, 1e-12);
  EXPECT_LT(g.cosine(ref(0), ref(2)), 0.9);
  ASSERT_EQ(g.groups().size(), 1u);
  EXPECT_EQ(members_of(g.groups()), testing::dfs_components(g.columns(), v, 0.9));
}

TEST(Hypergraph, DuplicateTextsAlwaysLink) {
  auto cat = make_catalog(Side::kTarget, {{"t", "t", "", true, {{"x", "same words here"}, {"c", "other"}}},
                                          {"u", "u", "", true, {{"x", "same words here"}}}});
  auto gw = testing::gateway_with(std::make_shared<ScriptedChatBackend>(testing::default_script()));
  auto g = build_hypergraph(cat, *gw, 1.0, false);
  EXPECT_NEAR(g.cosine(cat.columns()[0].ref, cat.columns()[2].ref), 1.0, 1e-12);
  ASSERT_EQ(g.links().size(), 1u);
  EXPECT_EQ(g.groups().size(), 2u);
}

TEST(Hypergraph, EmbeddingTextTemplate) {
  auto cat = make_catalog(Side::kSource, {{"t", "Chart Events", "", true, {{"CHARTTIME", "time charted"}}}});
  EXPECT_EQ(column_embedding_text(cat, cat.columns()[0].ref), "name: CHARTTIME. description: time charted. table: Chart Events.");
  EXPECT_EQ(column_embedding_text(cat, cat.columns()[0].ref, false), "name: CHARTTIME. description: time charted.");
}

TEST(Groups, NoLinksGiveSingletons) {
  std::vector<ColumnRef> cols{ref(0), ref(1), ref(2), ref(3)};
  auto groups = extract_groups({}, cols, Side::kTarget);
  ASSERT_EQ(groups.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(groups[i].members, std::vector<ColumnRef>{ref(i)});
}

TEST(Groups, ChainIsTransitive) {
  std::vector<ColumnRef> cols{ref(0), ref(1), ref(2), ref(3)};
  std::vector<SimilarityLink> links{{ref(0), ref(1), 0.95}, {ref(1), ref(2), 0.95}, {ref(2), ref(3), 0.95}};
  auto groups = extract_groups(links, cols, Side::kTarget);
  ASSERT_EQ(groups.size(), 1u);
  EXPECT_EQ(groups[0].size(), 4u);
}

TEST(Groups, UnknownColumnRejected) {
  std::vector<ColumnRef> cols{ref(0), ref(1)};
  std::vector<SimilarityLink> links{{ref(0), ref(5), 0.95}};
  EXPECT_THROW(extract_groups(links, cols, Side::kTarget), Error);
}

TEST(Groups, RandomGraphsMatchDfs) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed);
    const std::size_t n = 1 + rng() % 200;
    std::vector<ColumnRef> cols;
    for (std::size_t i = 0; i < n; ++i) cols.push_back(ref(i, "t" + std::to_string(i % 3)));
    std::shuffle(cols.begin(), cols.end(), rng);
    const double density = 1.5 / static_cast<double>(n);
    std::bernoulli_distribution edge(density);
    std::vector<SimilarityLink> links;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (edge(rng)) links.push_back({std::min(cols[i], cols[j]), std::max(cols[i], cols[j]), 0.99});
      }
    }
    auto got = extract_groups(links, cols, Side::kTarget);
    auto expected = link_dfs(cols, links);
    ASSERT_EQ(members_of(got), expected) << "seed " << seed;
    for (std::size_t i = 1; i < got.size(); ++i) ASSERT_LT(got[i - 1].members.front(), got[i].members.front());
  }
}

TEST(Hypergraph, RandomCatalogsMatchBruteForce) {
  auto gw = testing::gateway_with(std::make_shared<ScriptedChatBackend>(testing::default_script()));
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    auto cat = testing::random_text_catalog(Side::kTarget, 20 + rng() % 120, rng);
    for (double tau : {0.8, 0.9, 0.95}) {
      auto g = build_hypergraph(cat, *gw, tau);
      std::vector<EmbeddingVector> emb;
      for (const auto& c : g.columns()) emb.push_back(g.embedding(c));
      ASSERT_EQ(members_of(g.groups()), testing::dfs_components(g.columns(), emb, tau));
      for (const auto& l : g.links()) {
        ASSERT_LT(l.a, l.b);
        ASSERT_GE(l.cosine, tau - kCosineTolerance);
      }
      std::set<ColumnRef> covered;
      for (const auto& grp : g.groups()) {
        for (const auto& m : grp.members) ASSERT_TRUE(covered.insert(m).second);
      }
      ASSERT_EQ(covered.size(), cat.size());
      for (const auto& c : cat.columns()) ASSERT_TRUE(g.group_of(c.ref).contains(c.ref));
    }
  }
}

TEST(Hypergraph, RaisingTauNeverAddsLinksOrMerges) {
  auto gw = testing::gateway_with(std::make_shared<ScriptedChatBackend>(testing::default_script()));
  const std::vector<double> grid{0.5, 0.6, 0.7, 0.8, 0.85, 0.9, 0.95, 0.99, 1.0};
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(100 + seed);
    auto cat = testing::random_text_catalog(Side::kSource, 80, rng);
    std::optional<Hypergraph> prev;
    for (double tau : grid) {
      auto g = build_hypergraph(cat, *gw, tau);
      if (prev) {
        std::set<std::pair<ColumnRef, ColumnRef>> lower;
        for (const auto& l : prev->links()) lower.emplace(l.a, l.b);
        for (const auto& l : g.links()) ASSERT_TRUE(lower.contains({l.a, l.b}));
        for (const auto& grp : g.groups()) {
          const auto& outer = prev->group_of(grp.members.front());
          for (const auto& m : grp.members) ASSERT_TRUE(outer.contains(m));
        }
      }
      prev.emplace(std::move(g));
    }
  }
}

TEST(Hypergraph, NeighborsSortedWithTieBreak) {
  std::vector<EmbeddingVector> v{at_angle(0), at_angle(0.1), at_angle(-0.1), at_angle(0.05), at_angle(2.0)};
  auto g = graph_of(v, 0.9);
  auto n = g.neighbors(ref(0), 0.9);
  ASSERT_EQ(n.size(), 3u);
  EXPECT_EQ(n[0].first, ref(3));
  EXPECT_EQ(n[1].first, ref(1));
  EXPECT_EQ(n[2].first, ref(2));
  EXPECT_THROW(g.neighbors(ref(9), 0.9), Error);
}

TEST(Hypergraph, JsonRoundTripAndTamper) {
  std::mt19937_64 rng(5);
  auto cat = testing::random_text_catalog(Side::kTarget, 60, rng);
  auto gw = testing::gateway_with(std::make_shared<ScriptedChatBackend>(testing::default_script()));
  auto g = build_hypergraph(cat, *gw, 0.8);
  testing::TempDir dir;
  g.save(dir / "g.json");
  auto back = Hypergraph::load(dir / "g.json");
  EXPECT_EQ(back.to_json().dump(), g.to_json().dump());
  EXPECT_EQ(back.tau(), 0.8);
  EXPECT_EQ(members_of(back.groups()), members_of(g.groups()));
  auto doc = g.to_json();
  doc["links"].push_back(doc["links"].empty() ? nlohmann::json::object() : doc["links"][0]);
  EXPECT_THROW(Hypergraph::from_json(doc), ParseError);
  testing::write_file(dir / "bad.json", "{not json");
  EXPECT_THROW(Hypergraph::load(dir / "bad.json"), ParseError);
  EXPECT_THROW(Hypergraph::load(dir / "missing.json"), Error);
}

TEST(Hypergraph, ConstructorValidation) {
  EXPECT_THROW(Hypergraph(Side::kTarget, 0.9, {}, {}), Error);
  EXPECT_THROW(Hypergraph(Side::kTarget, 0.9, {ref(0), ref(0)}, {at_angle(0), at_angle(1)}), Error);
  EXPECT_THROW(Hypergraph(Side::kTarget, 0.9, {ref(0, "t", Side::kSource)}, {at_angle(0)}), Error);
  EXPECT_THROW(Hypergraph(Side::kTarget, 0.9, {ref(0)}, {}), Error);
}

// Neighbours of A at cosines 0.97, 0.93 and 0.91 in the plane; the other two
// columns are far from all of them.
TEST(Expand, RankedAdditionsUpToCap) {
  std::vector<EmbeddingVector> v{at_angle(0), at_angle(1.6), at_angle(2.5), at_angle(std::acos(0.97)),
                                 at_angle(-std::acos(0.93)), at_angle(std::acos(0.91))};
  auto g = graph_of(v, 0.9);
  std::vector<ColumnRef> c0{ref(0)};
  auto two = expand_candidates(c0, g, 0.9, 2, 3);
  EXPECT_EQ(two, (std::vector<ColumnRef>{ref(0), ref(3), ref(4)}));
  auto all = expand_candidates(c0, g, 0.9, 5, 3);
  EXPECT_EQ(all, (std::vector<ColumnRef>{ref(0), ref(3), ref(4), ref(5)}));
  EXPECT_EQ(expand_candidates(c0, g, 0.9, 0, 3), c0);
  std::vector<ColumnRef> full{ref(0), ref(3), ref(4), ref(5)};
  EXPECT_EQ(expand_candidates(full, g, 0.9, 5, 4), full);
}

TEST(Expand, OnlyStrongCandidatesExpand) {
  std::vector<EmbeddingVector> v{at_angle(0), at_angle(2.0), at_angle(0.05), at_angle(2.05)};
  auto g = graph_of(v, 0.9);
  std::vector<ColumnRef> c0{ref(0), ref(1)};
  EXPECT_EQ(expand_candidates(c0, g, 0.9, 5, 1), (std::vector<ColumnRef>{ref(0), ref(1), ref(2)}));
  EXPECT_EQ(expand_candidates(c0, g, 0.9, 5, 2), (std::vector<ColumnRef>{ref(0), ref(1), ref(2), ref(3)}));
}

TEST(Expand, SoundnessOnRandomCatalogs) {
  auto gw = testing::gateway_with(std::make_shared<ScriptedChatBackend>(testing::default_script()));
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed + 40);
    auto cat = testing::random_text_catalog(Side::kTarget, 100, rng);
    auto g = build_hypergraph(cat, *gw, 0.8);
    std::vector<ColumnRef> c0;
    for (int i = 0; i < 6; ++i) c0.push_back(cat.columns()[rng() % cat.size()].ref);
    std::sort(c0.begin(), c0.end());
    c0.erase(std::unique(c0.begin(), c0.end()), c0.end());
    std::shuffle(c0.begin(), c0.end(), rng);
    auto c = expand_candidates(c0, g, 0.8, 5, 3);
    ASSERT_LE(c.size(), c0.size() + 5);
    ASSERT_TRUE(std::equal(c0.begin(), c0.end(), c.begin()));
    std::set<ColumnRef> unique(c.begin(), c.end());
    ASSERT_EQ(unique.size(), c.size());
    for (std::size_t i = c0.size(); i < c.size(); ++i) {
      bool near_strong = false;
      for (std::size_t s = 0; s < std::min<std::size_t>(3, c0.size()); ++s) near_strong |= g.cosine(c[i], c0[s]) >= 0.8 - 1e-12;
      ASSERT_TRUE(near_strong);
    }
  }
}

TEST(Within, InducedSubgraphComponents) {
  const double ab = std::acos(0.95);
  std::vector<EmbeddingVector> v{at_angle(0), at_angle(ab), at_angle(1.5), at_angle(ab + 0.2)};
  auto g = graph_of(v, 0.9);
  std::vector<ColumnRef> c{ref(0), ref(1), ref(2)};
  auto groups = groups_within(c, g);
  EXPECT_EQ(members_of(groups), (std::vector<std::vector<ColumnRef>>{{ref(0), ref(1)}, {ref(2)}}));
  std::vector<EmbeddingVector> sub{v[0], v[1], v[2]};
  EXPECT_EQ(members_of(groups), testing::dfs_components(c, sub, 0.9));
  // Restricting the full stored component to itself returns it unchanged.
  auto stored = g.group_of(ref(0));
  EXPECT_EQ(groups_within(stored.members, g).front(), stored);
  std::vector<ColumnRef> apart{ref(0), ref(2)};
  EXPECT_EQ(groups_within(apart, g).size(), 2u);
}

TEST(Within, InducedSubgraphCanSplitStoredGroup) {
  const double step = std::acos(0.95);
  std::vector<EmbeddingVector> v{at_angle(0), at_angle(step), at_angle(2 * step)};
  auto g = graph_of(v, 0.9);
  EXPECT_EQ(g.groups().size(), 1u);
  std::vector<ColumnRef> ends{ref(0), ref(2)};
  EXPECT_EQ(groups_within(ends, g).size(), 2u);
}

TEST(SourceSet, SingletonAndRestriction) {
  std::vector<ColumnRef> refs{ref(0, "a", Side::kSource), ref(1, "a", Side::kSource), ref(0, "b", Side::kSource),
                              ref(2, "a", Side::kSource)};
  std::vector<EmbeddingVector> v{at_angle(0), at_angle(0.05), at_angle(0.1), at_angle(2.0)};
  Hypergraph g(Side::kSource, 0.9, refs, v);
  auto lone = source_confusable_set(refs[3], g, true);
  EXPECT_EQ(lone.members, std::vector<ColumnRef>{refs[3]});
  auto full = source_confusable_set(refs[0], g, false);
  EXPECT_EQ(full.size(), 3u);
  auto restricted = source_confusable_set(refs[0], g, true);
  std::vector<ColumnRef> oracle;
  for (const auto& m : full.members) {
    if (m.table_id == refs[0].table_id) oracle.push_back(m);
  }
  EXPECT_EQ(restricted.members, oracle);
  EXPECT_EQ(source_confusable_set(refs[2], g, true).members, std::vector<ColumnRef>{refs[2]});
}

TEST(SourceSet, TimePairGroupsTogether) {
  auto scenario = testing::time_scenario();
  auto gw = testing::gateway_with(std::make_shared<ScriptedChatBackend>(scenario.script));
  auto g = build_hypergraph(scenario.source, *gw, scenario.source_tau);
  auto set = source_confusable_set(scenario.query.source, g, true);
  std::vector<std::string> names;
  for (const auto& m : set.members) names.push_back(scenario.source.column(m).raw_name);
  EXPECT_EQ(names, (std::vector<std::string>{"CHARTTIME", "STORETIME"}));
}

}  // namespace
}  // namespace construm
