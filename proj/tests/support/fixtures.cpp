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

#include "fixtures.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <functional>
#include <regex>
#include <cstdio>
#include <set>
#include <sstream>

#include "construm/text.hpp"
#include "construm/tree_builder.hpp"

namespace construm::testing {

using nlohmann::json;

json catalog_json(Side side, const std::vector<TableSpec>& tables) {
  json t = json::array();
  for (const auto& spec : tables) {
    json cols = json::array();
    for (const auto& c : spec.columns) cols.push_back({{"name", c.name}, {"description", c.description}});
    t.push_back({{"table_id", spec.id},
                 {"name", spec.name},
                 {"description", spec.description},
                 {"ordered", spec.ordered},
                 {"columns", std::move(cols)}});
  }
  return {{"side", std::string(to_string(side))}, {"tables", std::move(t)}};
}

SchemaCatalog make_catalog(Side side, const std::vector<TableSpec>& tables) {
  return parse_catalog(catalog_json(side, tables).dump(2), side, "fixture");
}

std::shared_ptr<ModelGateway> gateway_with(std::shared_ptr<ChatBackend> chat,
                                           std::shared_ptr<EmbeddingBackend> embedder, GatewayOptions options) {
  if (!embedder) embedder = std::make_shared<HashEmbedder>();
  return std::make_shared<ModelGateway>(std::move(chat), std::move(embedder), std::move(options));
}

json default_script() {
  return {{"id", "defaults"},
          {"rules", json::array()},
          {"defaults",
           {{"tree_summary", "summary"},
            {"relation", "none"},
            {"differentiation", "Summary: generic contrast."},
            {"decision", "ANSWER: C1"}}}};
}

ChatReply RecordingBackend::complete(const ChatCall& call) {
  {
    std::lock_guard lock(mutex_);
    calls_.push_back(call);
  }
  return inner_->complete(call);
}

std::vector<ChatCall> RecordingBackend::calls() const {
  std::lock_guard lock(mutex_);
  return calls_;
}

namespace {

std::vector<std::size_t> listed_ordinals(const std::string& prompt) {
  static const std::regex line(R"(^- \[(\d+)\] )");
  std::vector<std::size_t> out;
  for (auto raw : text::split_lines(prompt)) {
    std::string s(raw);
    std::smatch m;
    if (std::regex_search(s, m, line)) out.push_back(std::stoul(m[1].str()));
  }
  return out;
}

std::string fuzz_plan(const std::string& prompt, std::mt19937_64& rng) {
  static const std::regex scope(R"(Columns to group: \[(\d+)\.\.(\d+)\])");
  std::smatch m;
  if (!std::regex_search(prompt, m, scope)) return "no plan";
  const std::size_t lo = std::stoul(m[1].str()), hi = std::stoul(m[2].str());
  const bool ordered = text::contains(prompt, "(ordered)");
  std::uniform_int_distribution<int> mode(0, 5);
  const int kind = mode(rng);
  if (kind == 0) return "I would group these by topic.";
  if (kind == 1) return "groups: [" + std::to_string(lo) + ".." + std::to_string(hi) + "]=everything";
  std::vector<std::size_t> items;
  if (ordered) {
    for (std::size_t o = lo; o <= hi; ++o) items.push_back(o);
  } else {
    items = listed_ordinals(prompt);
    std::shuffle(items.begin(), items.end(), rng);
  }
  if (items.size() < 2) return "groups: [" + std::to_string(lo) + ".." + std::to_string(hi) + "]=single";
  std::uniform_int_distribution<std::size_t> groups_dist(2, 12);
  std::size_t g = std::min(groups_dist(rng), items.size());
  std::vector<std::size_t> cuts;
  std::uniform_int_distribution<std::size_t> cut(1, items.size() - 1);
  std::set<std::size_t> cut_set;
  while (cut_set.size() + 1 < g) cut_set.insert(cut(rng));
  cuts.assign(cut_set.begin(), cut_set.end());
  cuts.push_back(items.size());
  std::string out = "groups: ";
  std::size_t start = 0;
  for (std::size_t i = 0; i < cuts.size(); ++i) {
    std::vector<std::size_t> part(items.begin() + static_cast<std::ptrdiff_t>(start),
                                  items.begin() + static_cast<std::ptrdiff_t>(cuts[i]));
    if (kind == 2 && i == 0 && part.size() > 1) part.pop_back();  // leaves a gap
    std::sort(part.begin(), part.end());
    if (i) out += ", ";
    if (ordered) {
      out += "[" + std::to_string(part.front()) + ".." + std::to_string(part.back()) + "]";
    } else {
      out += "[";
      for (std::size_t k = 0; k < part.size(); ++k) out += (k ? "," : "") + std::to_string(part[k]);
      out += "]";
    }
    out += "=topic " + std::to_string(i + 1);
    start = cuts[i];
  }
  return out;
}

std::string fuzz_moves(const std::string& prompt, std::mt19937_64& rng) {
  static const std::regex bounds(R"(Boundaries in this window: ([0-9, ]+))");
  std::smatch m;
  if (!std::regex_search(prompt, m, bounds)) return "none";
  std::vector<std::size_t> boundaries;
  std::stringstream ss(m[1].str());
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!text::trim(item).empty()) boundaries.push_back(std::stoul(std::string(text::trim(item))));
  }
  std::uniform_int_distribution<int> count(0, 3), shift(-30, 30);
  std::string out;
  for (int i = count(rng); i > 0; --i) {
    std::size_t b = boundaries[rng() % boundaries.size()];
    long to = static_cast<long>(b) + shift(rng);
    if (to < 0) to = 0;
    out += "move boundary " + std::to_string(b) + " -> " + std::to_string(to) + "\n";
  }
  return out.empty() ? "none" : out;
}

std::string fuzz_relations(const std::string& prompt, std::mt19937_64& rng) {
  std::size_t siblings = 0;
  for (auto raw : text::split_lines(prompt)) {
    if (raw.size() > 2 && raw[1] == ':' && raw[0] >= 'A' && raw[0] <= 'Z') ++siblings;
  }
  std::string out;
  std::uniform_int_distribution<int> count(0, 25);
  for (int i = count(rng); i > 0; --i) {
    char a = static_cast<char>('A' + rng() % (siblings + 1));
    char b = static_cast<char>('A' + rng() % (siblings + 1));
    out += std::string(1, a) + " -> " + std::string(1, b) + ": relation " + std::to_string(i) + "\n";
  }
  return out.empty() ? "none" : out;
}

}  // namespace

std::shared_ptr<ChatBackend> fuzz_tree_backend(std::uint64_t seed) {
  return std::make_shared<FunctionChatBackend>("fuzz-tree:" + std::to_string(seed), [seed](const ChatCall& call) {
    std::mt19937_64 rng(text::fnv1a64(call.prompt, seed));
    const std::string& p = call.prompt;
    if (p.rfind("Task: grouping-plan", 0) == 0) return fuzz_plan(p, rng);
    if (p.rfind("Task: boundary-refinement", 0) == 0) return fuzz_moves(p, rng);
    if (p.rfind("Task: sibling-relations", 0) == 0) return fuzz_relations(p, rng);
    auto first = text::split_lines(p).front();
    return "summary for " + std::string(first.substr(6)) + " #" + std::to_string(rng() % 1000);
  });
}

namespace {

const std::vector<std::string>& vocabulary() {
  static const std::vector<std::string> words{
      "income", "pension", "health", "employment", "spouse", "child", "wave", "interview", "date", "time",
      "amount", "status", "hospital", "visit", "diagnosis", "drug", "dose", "unit", "value", "flag",
      "respondent", "household", "wealth", "asset", "debt", "insurance", "claim", "provider", "record", "code"};
  return words;
}

std::string random_words(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  std::uniform_int_distribution<std::size_t> len(lo, hi), pick(0, vocabulary().size() - 1);
  std::vector<std::string> words;
  for (std::size_t i = len(rng); i > 0; --i) words.push_back(vocabulary()[pick(rng)]);
  return text::join(words, " ");
}

}  // namespace

SchemaCatalog random_ordered_catalog(Side side, const std::vector<std::size_t>& table_sizes, std::mt19937_64& rng) {
  std::vector<TableSpec> tables;
  for (std::size_t t = 0; t < table_sizes.size(); ++t) {
    TableSpec spec{"t" + std::to_string(t), "table " + std::to_string(t), random_words(rng, 2, 5), true, {}};
    for (std::size_t c = 0; c < table_sizes[t]; ++c) {
      spec.columns.push_back({"t" + std::to_string(t) + "_c" + std::to_string(c), random_words(rng, 0, 8)});
    }
    tables.push_back(std::move(spec));
  }
  return make_catalog(side, tables);
}

SchemaCatalog random_text_catalog(Side side, std::size_t n, std::mt19937_64& rng) {
  std::vector<TableSpec> tables{{"a", "alpha", "", true, {}}, {"b", "beta", "", false, {}}};
  std::vector<std::string> descriptions;
  std::uniform_int_distribution<int> coin(0, 99);
  std::uniform_int_distribution<std::size_t> pick(0, vocabulary().size() - 1);
  for (std::size_t i = 0; i < n; ++i) {
    std::string desc;
    if (!descriptions.empty() && coin(rng) < 40) {
      auto words = text::split_whitespace(descriptions[rng() % descriptions.size()]);
      for (int k = coin(rng) % 3; k > 0 && !words.empty(); --k) words[rng() % words.size()] = vocabulary()[pick(rng)];
      desc = text::join(words, " ");
    } else {
      desc = random_words(rng, 6, 12);
    }
    descriptions.push_back(desc);
    auto& table = tables[coin(rng) < 70 ? 0 : 1];
    table.columns.push_back({"col" + std::to_string(i), desc});
  }
  std::erase_if(tables, [](const TableSpec& t) { return t.columns.empty(); });
  return make_catalog(side, tables);
}

std::vector<std::vector<ColumnRef>> dfs_components(std::span<const ColumnRef> refs,
                                                   std::span<const EmbeddingVector> embeddings, double tau) {
  const std::size_t n = refs.size();
  std::vector<std::vector<std::size_t>> adj(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      double dot = 0.0;
      for (std::size_t d = 0; d < embeddings[i].values.size(); ++d) dot += embeddings[i].values[d] * embeddings[j].values[d];
      if (dot >= tau - 1e-12) adj[i].push_back(j);
    }
  }
  std::vector<int> comp(n, -1);
  std::vector<std::vector<ColumnRef>> out;
  for (std::size_t s = 0; s < n; ++s) {
    if (comp[s] >= 0) continue;
    std::vector<ColumnRef> members;
    std::vector<std::size_t> stack{s};
    comp[s] = static_cast<int>(out.size());
    while (!stack.empty()) {
      std::size_t v = stack.back();
      stack.pop_back();
      members.push_back(refs[v]);
      for (std::size_t w : adj[v]) {
        if (comp[w] < 0) {
          comp[w] = comp[s];
          stack.push_back(w);
        }
      }
    }
    std::sort(members.begin(), members.end());
    out.push_back(std::move(members));
  }
  std::sort(out.begin(), out.end());
  return out;
}

PlantedScenario planted_scenario() {
  static const std::vector<std::string> topics{"blood pressure", "household income", "hospital stay", "pension amount",
                                               "drug dose"};
  static const std::vector<std::string> topic_details{
      "systolic diastolic mmhg cuff reading seated", "wages salary earnings annual gross household",
      "admission discharge nights ward inpatient days", "retirement benefit monthly payout annuity employer",
      "medication milligrams daily prescription tablet regimen"};
  static const std::vector<std::string> filler_words{
      "zebra", "quartz", "violin", "maple", "comet", "harbor", "lantern", "meadow", "falcon", "glacier",
      "orchid", "canyon", "ember", "willow", "summit", "breeze", "coral", "thistle", "pebble", "aurora"};
  TableSpec target{"measures", "measures", "survey measures", true, {}};
  std::size_t filler = 0;
  std::vector<std::pair<std::size_t, std::size_t>> pair_ordinals;
  for (std::size_t p = 0; p < topics.size(); ++p) {
    for (int f = 0; f < 2; ++f) {
      target.columns.push_back({"filler_" + std::to_string(filler), filler_words[filler] + " reading"});
      ++filler;
    }
    const std::string desc = topics[p] + " " + topic_details[p];
    std::size_t a = target.columns.size();
    target.columns.push_back({"pair" + std::to_string(p + 1) + "_a", desc});
    target.columns.push_back({"pair" + std::to_string(p + 1) + "_b", desc});
    pair_ordinals.emplace_back(a, a + 1);
  }
  while (target.columns.size() < 30) {
    target.columns.push_back({"filler_" + std::to_string(filler), filler_words[filler] + " reading"});
    ++filler;
  }

  TableSpec source{"items", "items", "questionnaire items", true, {}};
  for (std::size_t p = 0; p < topics.size(); ++p) {
    source.columns.push_back({"q" + std::to_string(p + 1) + "_a", "question about " + topics[p] + " in wave one"});
    source.columns.push_back({"q" + std::to_string(p + 1) + "_b", "question about " + topics[p] + " in wave two"});
  }

  PlantedScenario s{make_catalog(Side::kSource, {source}), make_catalog(Side::kTarget, {target}), {}, {}, 0.9};
  json rules = json::array();
  json fallback_rules = json::array();
  for (std::size_t p = 0; p < topics.size(); ++p) {
    const ColumnRef a{Side::kTarget, "measures", pair_ordinals[p].first};
    const ColumnRef b{Side::kTarget, "measures", pair_ordinals[p].second};
    const std::string ca = s.target.column(a).cid, cb = s.target.column(b).cid;
    const std::string tag = "CUE-PAIR-" + std::to_string(p + 1);
    rules.push_back({{"role", "differentiation"},
                     {"all", {s.target.column(a).raw_name, s.target.column(b).raw_name}},
                     {"reply", "Summary: " + tag + " same topic; the a column covers wave one, the b column wave two.\n- " +
                                   ca + ": wave one\n- " + cb + ": wave two"}});
    for (int v = 0; v < 2; ++v) {
      const ColumnRef q{Side::kSource, "items", 2 * p + static_cast<std::size_t>(v)};
      const ColumnRef truth = v == 0 ? a : b;
      const std::string anchor = "Query column: name " + s.source.column(q).raw_name + ";";
      rules.push_back({{"role", "decision"}, {"all", {anchor, tag}}, {"reply", "ANSWER: " + s.target.column(truth).cid}});
      fallback_rules.push_back({{"role", "decision"}, {"all", {anchor}}, {"reply", "ANSWER: " + ca}});
      MatchQuery query;
      query.source = q;
      query.ground_truth = truth;
      query.slice = "pairs";
      const std::size_t f1 = p * 4, f2 = p * 4 + 1;
      query.shortlist = {b, ColumnRef{Side::kTarget, "measures", f1}, a, ColumnRef{Side::kTarget, "measures", f2}};
      s.queries.push_back(std::move(query));
    }
  }
  for (auto& r : fallback_rules) rules.push_back(std::move(r));
  s.script = default_script();
  s.script["id"] = "planted";
  s.script["rules"] = std::move(rules);
  return s;
}

TimeScenario time_scenario() {
  TableSpec source{"chartevents", "chartevents", "charted observations for patients", true,
                   {{"ROW_ID", "unique row number"},
                    {"SUBJECT_ID", "identifier of the patient"},
                    {"ITEMID", "code of the measured item"},
                    {"CHARTTIME", "time at which the charted observation was made at the bedside"},
                    {"STORETIME", "time at which the charted observation was manually entered or validated at the bedside"},
                    {"VALUENUM", "value in numeric form"}}};
  TableSpec target{"measurement", "measurement", "measurements taken on a person", true,
                   {{"person_id", "person identifier"},
                    {"measurement_concept_id", "concept of the measurement"},
                    {"observation_time", "time of the observation"},
                    {"recorded_time", "time the observation was recorded"},
                    {"value_as_number", "numeric result"}}};
  TimeScenario s{make_catalog(Side::kSource, {source}), make_catalog(Side::kTarget, {target}), {}, {}, {}, {}};
  const ColumnRef chart{Side::kSource, "chartevents", 3}, store{Side::kSource, "chartevents", 4};
  s.observation_time = ColumnRef{Side::kTarget, "measurement", 2};
  s.recorded_time = ColumnRef{Side::kTarget, "measurement", 3};
  s.query.source = chart;
  s.query.ground_truth = s.observation_time;
  s.query.shortlist = {s.recorded_time, s.observation_time};
  s.script = default_script();
  s.script["id"] = "observation-time";
  s.script["rules"] = json::array(
      {{{"role", "differentiation"},
        {"all", {"CHARTTIME", "STORETIME"}},
        {"reply", "Summary: Both timestamp a charted observation; STORETIME marks manual entry or validation.\n- " +
                      s.source.column(chart).cid + ": when the observation was made, not entry time\n- " +
                      s.source.column(store).cid + ": when staff entered or validated the value"}},
       {{"role", "decision"}, {"all", {"not entry time"}}, {"reply", "ANSWER: " + s.target.column(s.observation_time).cid}},
       {{"role", "decision"}, {"reply", "ANSWER: " + s.target.column(s.recorded_time).cid}}});
  return s;
}

MatchArtifacts BuiltArtifacts::view(const SchemaCatalog& source, const SchemaCatalog& target) const {
  return MatchArtifacts{&source,
                        &target,
                        source_tree ? &*source_tree : nullptr,
                        target_tree ? &*target_tree : nullptr,
                        source_graph ? &*source_graph : nullptr,
                        target_graph ? &*target_graph : nullptr};
}

BuiltArtifacts build_artifacts(const SchemaCatalog& source, const SchemaCatalog& target, ModelGateway& gateway,
                               double source_tau, double target_tau, const TreeParams& params) {
  BuiltArtifacts a;
  a.source_tree = build_context_tree(source, params, gateway);
  a.target_tree = build_context_tree(target, params, gateway);
  a.source_graph = build_hypergraph(source, gateway, source_tau);
  a.target_graph = build_hypergraph(target, gateway, target_tau);
  return a;
}

SchemaCatalog cross_reference_catalog(Side side, std::size_t n, const std::string& prefix) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < n; ++i) {
    char buf[32];
    if (i % 5 == 4) {
      names.push_back(names.back() + "B");
    } else {
      std::snprintf(buf, sizeof buf, "%s%03zu", prefix.c_str(), i + 1);
      names.emplace_back(buf);
    }
  }
  std::vector<TableSpec> tables{{"section_a", "section a", "first section", true, {}},
                                {"section_b", "section b", "second section", true, {}}};
  for (std::size_t i = 0; i < n; ++i) {
    const std::string& r1 = names[(i + 1) % n];
    const std::string& r2 = names[(i + 7) % n];
    const std::string& r3 = names[(i + n - 1) % n];
    std::string desc = "asked if " + r1 + " = 1 and " + r2 + " not missing; see " + r3 + " branch (" + names[i] +
                       " follows " + r3 + ")";
    tables[i < n / 2 ? 0 : 1].columns.push_back({names[i], desc});
  }
  return make_catalog(side, tables);
}

ContextTree chain_tree(const SchemaCatalog& catalog, std::size_t levels) {
  const auto& table = catalog.tables().front();
  ContextTree tree(catalog.side());
  auto summary = [](std::size_t level, std::size_t b, std::size_t e) {
    std::string s = "level " + std::to_string(level) + " covers items " + std::to_string(b) + " to " +
                    std::to_string(e - 1) + ".";
    for (std::size_t i = 0; i < (level * 7 + b) % 5 + 2; ++i) s += " Further detail on topic " + std::to_string(i) + ".";
    return s;
  };
  std::function<NodeId(std::size_t, std::size_t, std::size_t)> build = [&](std::size_t level, std::size_t b,
                                                                          std::size_t e) {
    TreeNode n;
    n.label = "L" + std::to_string(level) + "[" + std::to_string(b) + ".." + std::to_string(e - 1) + "]";
    n.summary = summary(level, b, e);
    n.table_id = table.table_id;
    n.span = OrdinalSpan{b, e};
    if (level + 1 == levels) {
      n.kind = NodeKind::kGroupLeaf;
      for (std::size_t o = b; o < e; ++o) n.members.push_back(table.columns[o]);
      return tree.add_node(std::move(n));
    }
    n.kind = level == 0 ? NodeKind::kDbRoot : level == 1 ? NodeKind::kTableRoot : NodeKind::kWithinTable;
    if (level == 0) {
      n.table_id.reset();
      n.span.reset();
    }
    NodeId id = tree.add_node(std::move(n));
    std::vector<NodeId> kids;
    if (e - b >= 2) {
      std::size_t mid = b + (e - b) / 2;
      kids.push_back(build(level + 1, b, mid));
      kids.push_back(build(level + 1, mid, e));
    } else {
      kids.push_back(build(level + 1, b, e));
    }
    for (NodeId k : kids) tree.attach(id, k);
    if (kids.size() == 2) tree.add_relation({kids[0], kids[1], "left half precedes right half at level " + std::to_string(level + 1), true});
    return id;
  };
  NodeId root = build(0, 0, table.columns.size());
  tree.set_root(root);
  tree.finalize();
  return tree;
}

TempDir::TempDir() {
  static std::atomic<std::uint64_t> counter{0};
  std::random_device rd;
  const auto tag = std::to_string(rd()) + "-" + std::to_string(counter.fetch_add(1));
  path_ = std::filesystem::temp_directory_path() / ("construm-test-" + tag);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << content;
}

}  // namespace construm::testing
