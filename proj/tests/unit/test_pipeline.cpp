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

#include <gtest/gtest.h>

#include "construm/error.hpp"
#include "construm/pipeline.hpp"
#include "construm/text.hpp"
#include "fixtures.hpp"

namespace construm {
namespace {

using nlohmann::json;

std::shared_ptr<ModelGateway> scripted_gateway(const json& script, std::shared_ptr<testing::RecordingBackend>* recorder = nullptr,
                                               GatewayOptions options = {}) {
  auto rec = std::make_shared<testing::RecordingBackend>(std::make_shared<ScriptedChatBackend>(script));
  if (recorder) *recorder = rec;
  return testing::gateway_with(rec, nullptr, options);
}

std::size_t count_role(const std::vector<ChatCall>& calls, CallRole role) {
  return static_cast<std::size_t>(std::count_if(calls.begin(), calls.end(), [&](const ChatCall& c) { return c.role == role; }));
}

TEST(Config, ModesImplyFlags) {
  auto full = PipelineConfig::for_mode(MatchMode::kFull);
  EXPECT_TRUE(full.use_tree && full.use_diff && full.use_expansion);
  auto no_tree = PipelineConfig::for_mode(MatchMode::kNoTree);
  EXPECT_FALSE(no_tree.use_tree);
  EXPECT_TRUE(no_tree.use_diff);
  auto no_diff = PipelineConfig::for_mode(MatchMode::kNoDiff);
  EXPECT_TRUE(no_diff.use_tree);
  EXPECT_FALSE(no_diff.use_diff);
  auto local = PipelineConfig::for_mode(MatchMode::kLlmLocal);
  EXPECT_FALSE(local.use_tree || local.use_diff || local.use_expansion);
  auto bad = full;
  bad.use_tree = false;
  EXPECT_THROW(bad.validate(), Error);
  auto zero = full;
  zero.k = 0;
  EXPECT_THROW(zero.validate(), Error);
  EXPECT_EQ(parse_match_mode("no_diff"), MatchMode::kNoDiff);
  EXPECT_THROW(parse_match_mode("fast"), Error);
}

TEST(Config, JsonRoundTrip) {
  auto c = PipelineConfig::for_mode(MatchMode::kNoTree);
  c.k = 7;
  c.pack_budget = 900;
  c.cap_total = 2;
  auto back = pipeline_config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
  EXPECT_FALSE(back.use_tree);
  EXPECT_EQ(back.k, 7u);
}

SchemaCatalog seeded_text_catalog(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return testing::random_text_catalog(Side::kTarget, n, rng);
}

struct ShortlistSetup {
  SchemaCatalog target;
  std::shared_ptr<ModelGateway> gw = testing::gateway_with(std::make_shared<ScriptedChatBackend>(testing::default_script()));
  std::optional<Hypergraph> graph;
  explicit ShortlistSetup(std::size_t n, std::uint64_t seed = 1) : target(seeded_text_catalog(n, seed)) {
    graph.emplace(build_hypergraph(target, *gw, 0.9));
  }
};

TEST(Shortlist, ClampedToTargetSize) {
  ShortlistSetup s(12);
  auto q = s.graph->embedding(s.target.columns()[3].ref);
  EXPECT_EQ(shortlist(q, *s.graph, 20).size(), 12u);
  EXPECT_EQ(shortlist(q, *s.graph, 1), std::vector<ColumnRef>{s.target.columns()[3].ref});
}

TEST(Shortlist, ArgmaxAndOrderOracle) {
  ShortlistSetup s(150, 7);
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> raw(64);
    std::normal_distribution<double> nd;
    for (auto& x : raw) x = nd(rng);
    auto q = normalize_embedding(raw);
    auto got = shortlist(q, *s.graph, 10);
    ASSERT_EQ(got.size(), 10u);
    double best = -2;
    ColumnRef arg;
    for (const auto& c : s.target.columns()) {
      double v = cosine(q, s.graph->embedding(c.ref));
      if (v > best) {
        best = v;
        arg = c.ref;
      }
    }
    ASSERT_EQ(got.front(), arg);
    for (std::size_t i = 1; i < got.size(); ++i) {
      ASSERT_GE(cosine(q, s.graph->embedding(got[i - 1])), cosine(q, s.graph->embedding(got[i])));
    }
  }
}

TEST(Shortlist, TiesByTableThenOrdinal) {
  std::vector<ColumnRef> refs{{Side::kTarget, "b", 0}, {Side::kTarget, "a", 1}, {Side::kTarget, "a", 0}};
  std::vector<EmbeddingVector> v(3, normalize_embedding({1, 0}));
  Hypergraph g(Side::kTarget, 0.9, refs, v);
  EXPECT_EQ(shortlist(normalize_embedding({1, 0}), g, 3), (std::vector<ColumnRef>{refs[2], refs[1], refs[0]}));
}

TEST(Choice, ParseRules) {
  auto cat = testing::make_catalog(Side::kTarget, {{"t", "t", "", true, {{"a", ""}, {"b", ""}, {"c", ""}}}});
  std::vector<ColumnRef> c{cat.columns()[0].ref, cat.columns()[1].ref};
  EXPECT_EQ(parse_choice("reasoning...\nANSWER: C1", c, cat), c[0]);
  EXPECT_EQ(parse_choice("maybe ANSWER: C1 ... ANSWER: C2", c, cat), c[1]);
  try {
    parse_choice("ANSWER: C99", c, cat);
    FAIL();
  } catch (const ChoiceError& e) {
    EXPECT_EQ(e.kind(), ChoiceError::Kind::kInvalidChoice);
  }
  try {
    parse_choice("ANSWER: C3", c, cat);
    FAIL();
  } catch (const ChoiceError& e) {
    EXPECT_EQ(e.kind(), ChoiceError::Kind::kInvalidChoice);
  }
  try {
    parse_choice("I pick the first one", c, cat);
    FAIL();
  } catch (const ChoiceError& e) {
    EXPECT_EQ(e.kind(), ChoiceError::Kind::kNoAnswer);
  }
}

TEST(Prompt, LocalLayoutIsExact) {
  PromptColumn q{"C4", "CHARTTIME", "time charted", "chartevents", std::nullopt};
  std::vector<PromptColumn> cands{{"C1", "observation_time", "time of obs", "measurement", std::nullopt},
                                  {"C2", "recorded_time", "", "measurement", std::nullopt}};
  EXPECT_EQ(assemble_final_prompt(q, "", cands, ""),
            "Task: match-decision\nChoose the one candidate target column that matches the query column.\n"
            "Query column: name CHARTTIME; desc time charted; table chartevents\n"
            "Candidates:\n"
            "- C1: name observation_time; desc time of obs; table measurement\n"
            "- C2: name recorded_time; desc (none); table measurement\n"
            "End your reply with a final line \"ANSWER: <cid>\" naming exactly one candidate cid.");
  EXPECT_THROW(assemble_final_prompt(q, "", {}, ""), Error);
}

TEST(Prompt, SectionOrderOracle) {
  PromptColumn q{"C4", "CHARTTIME", "time charted", "chartevents", std::string("Column: CHARTTIME\nPath to root (summaries):\n  - [0] src")};
  std::vector<PromptColumn> cands{{"C1", "observation_time", "obs", "measurement", std::string("Column: observation_time")},
                                  {"C2", "recorded_time", "rec", "measurement", std::nullopt}};
  auto p = assemble_final_prompt(q, "Source diff (confusable source group):\nContrast: x\n", cands,
                                 "Differentiation among candidates:\nGroup #1 (C1 vs C2):\ny\n");
  std::vector<std::string> markers{"Query column: name CHARTTIME", "  context:\n    Column: CHARTTIME", "Source diff",
                                   "Candidates:", "- C1: name observation_time", "    Column: observation_time",
                                   "- C2: name recorded_time", "Differentiation among candidates:", "Group #1",
                                   "ANSWER: <cid>"};
  std::size_t last = 0;
  for (const auto& m : markers) {
    auto at = p.find(m);
    ASSERT_NE(at, std::string::npos) << m;
    ASSERT_GE(at, last) << m;
    last = at;
  }
}

struct TimeRun {
  testing::TimeScenario s = testing::time_scenario();
  std::shared_ptr<testing::RecordingBackend> recorder;
  std::shared_ptr<ModelGateway> gw = scripted_gateway(s.script, &recorder);
  testing::BuiltArtifacts art = testing::build_artifacts(s.source, s.target, *gw, s.source_tau, s.target_tau);
  MatchResult run(MatchMode mode) { return run_match(s.query, PipelineConfig::for_mode(mode), art.view(s.source, s.target), *gw); }
};

TEST(Run, TimeScenarioFullVersusLocal) {
  TimeRun t;
  auto full = t.run(MatchMode::kFull);
  EXPECT_EQ(full.chosen, t.s.observation_time);
  EXPECT_TRUE(full.trace.source_block);
  EXPECT_NE(full.trace.prompt_snapshot.find("Source diff"), std::string::npos);
  auto local = t.run(MatchMode::kLlmLocal);
  EXPECT_EQ(local.chosen, t.s.recorded_time);
  EXPECT_EQ(local.trace.prompt_snapshot.find("Source diff"), std::string::npos);
  EXPECT_EQ(t.run(MatchMode::kNoTree).chosen, t.s.observation_time);
  EXPECT_EQ(t.run(MatchMode::kNoDiff).chosen, t.s.recorded_time);
}

TEST(Run, EmbedTopOneMakesNoCalls) {
  TimeRun t;
  auto before = t.gw->usage();
  auto r = t.run(MatchMode::kEmbedTop1);
  EXPECT_EQ(r.chosen, t.s.query.shortlist.front());
  EXPECT_EQ(r.trace.llm_calls, 0);
  EXPECT_EQ(r.trace.total_tokens, 0);
  EXPECT_EQ(t.gw->usage().calls, before.calls);
  auto internal = t.s.query;
  internal.shortlist.clear();
  auto cfg = PipelineConfig::for_mode(MatchMode::kEmbedTop1);
  cfg.k = 1;
  auto r2 = run_match(internal, cfg, t.art.view(t.s.source, t.s.target), *t.gw);
  EXPECT_EQ(r2.chosen, shortlist(t.s.query.source, t.art.view(t.s.source, t.s.target), 1).front());
  EXPECT_EQ(r2.candidates.size(), 1u);
}

TEST(Run, NoGroupsMeansNoDifferentiationSections) {
  std::mt19937_64 rng(8);
  auto source = testing::random_ordered_catalog(Side::kSource, {6}, rng);
  auto target = testing::random_ordered_catalog(Side::kTarget, {8}, rng);
  std::shared_ptr<testing::RecordingBackend> recorder;
  auto gw = scripted_gateway(testing::default_script(), &recorder);
  auto art = testing::build_artifacts(source, target, *gw, 1.0 + 1e-9, 1.0 + 1e-9);
  auto before = recorder->calls().size();
  MatchQuery q;
  q.source = source.columns()[0].ref;
  q.shortlist = {target.columns()[2].ref, target.columns()[0].ref, target.columns()[5].ref};
  auto r = run_match(q, PipelineConfig::for_mode(MatchMode::kFull), art.view(source, target), *gw);
  auto calls = recorder->calls();
  EXPECT_EQ(calls.size() - before, 1u);
  EXPECT_EQ(calls.back().role, CallRole::kDecision);
  EXPECT_EQ(r.trace.prompt_snapshot.find("Differentiation among candidates"), std::string::npos);
  EXPECT_EQ(r.trace.prompt_snapshot.find("Source diff"), std::string::npos);
  EXPECT_NE(r.trace.prompt_snapshot.find("Path to root (summaries):"), std::string::npos);
  EXPECT_EQ(r.chosen, target.columns()[0].ref);
  EXPECT_EQ(r.candidates, q.shortlist);
  EXPECT_EQ(r.trace.llm_calls, 1);
}

TEST(Run, RetryOnceThenHardError) {
  TimeRun t;
  auto script = t.s.script;
  script["rules"] = json::array({{{"role", "decision"}, {"contains", "Reminder:"}, {"reply", "ANSWER: C3"}},
                                 {{"role", "decision"}, {"reply", "Probably the observation one."}}});
  std::shared_ptr<testing::RecordingBackend> recorder;
  auto gw = scripted_gateway(script, &recorder);
  auto view = t.art.view(t.s.source, t.s.target);
  auto local = PipelineConfig::for_mode(MatchMode::kLlmLocal);
  auto r = run_match(t.s.query, local, view, *gw);
  EXPECT_EQ(r.chosen, t.s.observation_time);
  EXPECT_EQ(r.trace.llm_calls, 2);
  EXPECT_EQ(count_role(recorder->calls(), CallRole::kDecision), 2u);

  script["rules"] = json::array({{{"role", "decision"}, {"reply", "ANSWER: C99"}}});
  auto gw2 = scripted_gateway(script);
  try {
    run_match(t.s.query, local, view, *gw2);
    FAIL();
  } catch (const PipelineError& e) {
    EXPECT_NE(e.prompt_snapshot().find("Reminder:"), std::string::npos);
    EXPECT_NE(e.prompt_snapshot().find("Task: match-decision"), std::string::npos);
  }
}

TEST(Run, AuxiliaryFailuresDegrade) {
  TimeRun t;
  auto backend = std::make_shared<FunctionChatBackend>("flaky-diff", [](const ChatCall& c) -> std::string {
    if (c.role == CallRole::kDifferentiation) throw ScriptMissError("no differentiation today");
    return "ANSWER: C4";
  });
  auto gw = testing::gateway_with(backend);
  auto r = run_match(t.s.query, PipelineConfig::for_mode(MatchMode::kFull), t.art.view(t.s.source, t.s.target), *gw);
  EXPECT_EQ(r.chosen, t.s.recorded_time);
  EXPECT_FALSE(r.trace.source_block);
  EXPECT_FALSE(r.trace.warnings.empty());
  MatchArtifacts bare{&t.s.source, &t.s.target};
  auto r2 = run_match(t.s.query, PipelineConfig::for_mode(MatchMode::kFull), bare, *gw);
  EXPECT_EQ(r2.candidates, t.s.query.shortlist);
  EXPECT_GE(r2.trace.warnings.size(), 3u);
}

bool line_subsequence(const std::string& small, const std::string& big) {
  auto a = text::split_lines(small);
  auto b = text::split_lines(big);
  std::size_t j = 0;
  for (auto line : a) {
    while (j < b.size() && b[j] != line) ++j;
    if (j == b.size()) return false;
    ++j;
  }
  return true;
}

TEST(Run, AblationContainmentAndPlantedAccuracy) {
  auto s = testing::planted_scenario();
  auto gw = scripted_gateway(s.script);
  auto art = testing::build_artifacts(s.source, s.target, *gw, s.tau, s.tau);
  auto view = art.view(s.source, s.target);
  std::size_t full_ok = 0, local_ok = 0;
  for (const auto& q : s.queries) {
    auto full = run_match(q, PipelineConfig::for_mode(MatchMode::kFull), view, *gw);
    auto local = run_match(q, PipelineConfig::for_mode(MatchMode::kLlmLocal), view, *gw);
    full_ok += full.chosen == *q.ground_truth;
    local_ok += local.chosen == *q.ground_truth;
    ASSERT_TRUE(line_subsequence(local.trace.prompt_snapshot, full.trace.prompt_snapshot));
    ASSERT_GE(full.trace.candidate_blocks, 1u);
    ASSERT_NE(std::find(full.candidates.begin(), full.candidates.end(), full.chosen), full.candidates.end());
    ASSERT_TRUE(std::equal(q.shortlist.begin(), q.shortlist.end(), full.candidates.begin()));
    ASSERT_EQ(full.ranked.front(), full.chosen);
    ASSERT_EQ(full.ranked.size(), full.candidates.size());
  }
  EXPECT_EQ(full_ok, s.queries.size());
  EXPECT_EQ(local_ok * 2, s.queries.size());
}

TEST(Run, RankedRemainderByCosine) {
  TimeRun t;
  auto view = t.art.view(t.s.source, t.s.target);
  auto q = t.s.query;
  q.shortlist.clear();
  auto cfg = PipelineConfig::for_mode(MatchMode::kLlmLocal);
  cfg.k = 5;
  auto r = run_match(q, cfg, view, *t.gw);
  ASSERT_EQ(r.ranked.front(), r.chosen);
  const auto& qe = t.art.source_graph->embedding(q.source);
  for (std::size_t i = 2; i < r.ranked.size(); ++i) {
    EXPECT_GE(cosine(qe, t.art.target_graph->embedding(r.ranked[i - 1])), cosine(qe, t.art.target_graph->embedding(r.ranked[i])));
  }
}

TEST(Run, TraceTokensEqualGatewayDelta) {
  auto s = testing::planted_scenario();
  auto gw = scripted_gateway(s.script, nullptr, GatewayOptions{false, std::nullopt});
  auto art = testing::build_artifacts(s.source, s.target, *gw, s.tau, s.tau);
  auto view = art.view(s.source, s.target);
  for (const auto& q : s.queries) {
    auto before = gw->usage();
    auto r = run_match(q, PipelineConfig::for_mode(MatchMode::kFull), view, *gw);
    auto after = gw->usage();
    ASSERT_EQ(r.trace.total_tokens, after.total_tokens() - before.total_tokens());
    ASSERT_EQ(r.trace.llm_calls, after.calls - before.calls);
    ASSERT_GT(r.trace.total_tokens, 0);
    auto back = match_trace_from_json(to_json(r.trace));
    ASSERT_EQ(to_json(back), to_json(r.trace));
  }
}

TEST(Run, MaskedPromptsCarryNoRawIdentifiers) {
  auto source = testing::cross_reference_catalog(Side::kSource, 20, "S");
  auto target = testing::cross_reference_catalog(Side::kTarget, 20, "T");
  auto ms = mask_catalog(source), mt = mask_catalog(target);
  std::shared_ptr<testing::RecordingBackend> recorder;
  auto gw = scripted_gateway(testing::default_script(), &recorder);
  auto art = testing::build_artifacts(ms, mt, *gw, 0.8, 0.8);
  MatchQuery q;
  q.source = ms.columns()[4].ref;
  auto r = run_match(q, PipelineConfig::for_mode(MatchMode::kFull), art.view(ms, mt), *gw);
  EXPECT_EQ(r.candidates.size() >= 20u, true);
  for (const auto& c : recorder->calls()) {
    EXPECT_TRUE(find_raw_identifiers(source, c.prompt).empty()) << c.prompt;
    EXPECT_TRUE(find_raw_identifiers(target, c.prompt).empty()) << c.prompt;
  }
}

TEST(Run, ExternalShortlistDeduplicatedAndValidated) {
  TimeRun t;
  auto q = t.s.query;
  q.shortlist = {t.s.recorded_time, t.s.observation_time, t.s.recorded_time};
  auto r = run_match(q, PipelineConfig::for_mode(MatchMode::kLlmLocal), t.art.view(t.s.source, t.s.target), *t.gw);
  EXPECT_EQ(r.candidates.size(), 2u);
  q.shortlist = {ColumnRef{Side::kTarget, "nope", 0}};
  EXPECT_THROW(run_match(q, PipelineConfig::for_mode(MatchMode::kLlmLocal), t.art.view(t.s.source, t.s.target), *t.gw),
               Error);
}

}  // namespace
}  // namespace construm
