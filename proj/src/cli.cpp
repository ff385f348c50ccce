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
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "construm/cli.hpp"
#include "construm/evaluation.hpp"
#include "construm/pipeline.hpp"
#include "construm/similarity_graph.hpp"
#include "construm/text.hpp"
#include "construm/tree_builder.hpp"

namespace construm::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonFlags {
  std::optional<std::string> config;
  std::optional<std::string> backend;
  std::optional<std::string> embedder;
  std::optional<std::string> cache_dir;
  bool no_cache = false;
  std::optional<std::size_t> workers;
  std::string log_level = "warn";
};

void add_common(CLI::App* app, CommonFlags& f) {
  app->add_option("--config", f.config, "JSON run configuration");
  app->add_option("--backend", f.backend, "live or scripted:<script path>");
  app->add_option("--embedder", f.embedder, "hash or live");
  app->add_option("--cache-dir", f.cache_dir, "directory for cached replies");
  app->add_flag("--no-cache", f.no_cache, "disable the reply cache");
  app->add_option("--workers", f.workers, "worker threads");
  app->add_option("--log-level", f.log_level, "trace, debug, info, warn, error or off");
}

RunConfig resolve_config(const CommonFlags& f, const EnvLookup& env) {
  RunConfig rc;
  if (f.config) {
    if (!fs::exists(*f.config)) throw UsageError("config file not found: " + *f.config);
    rc = load_run_config(*f.config, rc);
  }
  apply_environment(rc, env);
  if (f.backend) rc.backend = *f.backend;
  if (f.embedder) rc.embedder = *f.embedder;
  if (f.cache_dir) rc.cache_dir = fs::path(*f.cache_dir);
  if (f.no_cache) rc.cache = false;
  if (f.workers) rc.workers = std::max<std::size_t>(1, *f.workers);
  spdlog::set_level(spdlog::level::from_str(f.log_level));
  return rc;
}

void require_file(const std::string& path, const std::string& flag) {
  if (!fs::exists(path)) throw UsageError(flag + ": file not found: " + path);
}

SchemaCatalog open_catalog(const std::string& path, Side side, bool mask, const std::string& flag) {
  require_file(path, flag);
  SchemaCatalog catalog = load_catalog(path, side);
  return mask ? mask_catalog(catalog) : catalog;
}

std::shared_ptr<ModelGateway> open_gateway(const RunConfig& rc, bool need_chat) {
  try {
    return make_gateway(rc, need_chat);
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

void write_text(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw UsageError("cannot write " + path.string());
    out << content;
  }
  fs::rename(tmp, path);
}

void write_json(const fs::path& path, const json& doc) { write_text(path, doc.dump(2) + "\n"); }

void save_run_config(const fs::path& path, const RunConfig& rc, const std::vector<std::string>& args) {
  json doc = to_json(rc);
  doc["command"] = args;
  write_json(path, doc);
}

fs::path sidecar(const fs::path& out) {
  return out.parent_path() / (out.stem().string() + ".run_config.json");
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto t = std::string(text::trim(item));
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

json read_json(const std::string& path, const std::string& flag) {
  require_file(path, flag);
  std::ifstream in(path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path, e.what());
  }
}

struct ArtifactFlags {
  std::string source_catalog;
  std::string target_catalog;
  std::optional<std::string> source_tree;
  std::optional<std::string> target_tree;
  std::optional<std::string> source_graph;
  std::optional<std::string> target_graph;
  bool mask_source = false;
  bool mask_target = false;
};

void add_artifact_flags(CLI::App* app, ArtifactFlags& f) {
  app->add_option("--source-catalog", f.source_catalog, "source catalog JSON")->required();
  app->add_option("--target-catalog", f.target_catalog, "target catalog JSON")->required();
  app->add_option("--source-tree", f.source_tree, "source context tree");
  app->add_option("--target-tree", f.target_tree, "target context tree");
  app->add_option("--source-graph", f.source_graph, "source similarity graph");
  app->add_option("--target-graph", f.target_graph, "target similarity graph");
  app->add_flag("--mask-source", f.mask_source, "mask source identifiers");
  app->add_flag("--mask-target", f.mask_target, "mask target identifiers");
}

struct LoadedArtifacts {
  std::optional<SchemaCatalog> source;
  std::optional<SchemaCatalog> target;
  std::optional<ContextTree> source_tree;
  std::optional<ContextTree> target_tree;
  std::optional<Hypergraph> source_graph;
  std::optional<Hypergraph> target_graph;

  MatchArtifacts view() const {
    return MatchArtifacts{source ? &*source : nullptr,
                          target ? &*target : nullptr,
                          source_tree ? &*source_tree : nullptr,
                          target_tree ? &*target_tree : nullptr,
                          source_graph ? &*source_graph : nullptr,
                          target_graph ? &*target_graph : nullptr};
  }
};

LoadedArtifacts load_artifacts(const ArtifactFlags& f, RunConfig& rc, ModelGateway& gateway, bool need_trees) {
  rc.mask_source = rc.mask_source || f.mask_source;
  rc.mask_target = rc.mask_target || f.mask_target;
  LoadedArtifacts a;
  a.source = open_catalog(f.source_catalog, Side::kSource, rc.mask_source, "--source-catalog");
  a.target = open_catalog(f.target_catalog, Side::kTarget, rc.mask_target, "--target-catalog");
  auto tree = [&](const std::optional<std::string>& path, const char* flag, Side side) -> std::optional<ContextTree> {
    if (!path) return std::nullopt;
    require_file(*path, flag);
    ContextTree t = ContextTree::load(*path);
    if (t.side() != side) throw UsageError(std::string(flag) + ": tree was built for the other side");
    return t;
  };
  a.source_tree = tree(f.source_tree, "--source-tree", Side::kSource);
  a.target_tree = tree(f.target_tree, "--target-tree", Side::kTarget);
  if (need_trees && (!a.source_tree || !a.target_tree)) {
    throw UsageError("the selected mode needs --source-tree and --target-tree");
  }
  auto graph = [&](const std::optional<std::string>& path, const char* flag, const SchemaCatalog& catalog) {
    if (path) {
      require_file(*path, flag);
      Hypergraph g = Hypergraph::load(*path);
      if (g.side() != catalog.side()) throw UsageError(std::string(flag) + ": graph was built for the other side");
      return g;
    }
    return build_hypergraph(catalog, gateway, rc.tau_for(catalog.side()), rc.include_table_name);
  };
  a.source_graph = graph(f.source_graph, "--source-graph", *a.source);
  a.target_graph = graph(f.target_graph, "--target-graph", *a.target);
  return a;
}

Side side_flag(const std::string& s) {
  try {
    return parse_side(s);
  } catch (const Error& e) {
    throw UsageError(std::string("--side: ") + e.what());
  }
}

MatchMode mode_flag(const std::string& s) {
  try {
    return parse_match_mode(s);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

std::string usage_line(const Usage& u) {
  return std::to_string(u.calls) + " LLM calls (" + std::to_string(u.cache_hits) + " cached), " +
         std::to_string(u.total_tokens()) + " tokens";
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const EnvLookup& env) {
  CLI::App app{"Context-tree and similarity-group evidence for LLM schema matching", "construm"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "show help for every subcommand");

  // build-tree
  CommonFlags tree_common;
  std::string tree_catalog, tree_side = "target", tree_out;
  std::optional<std::size_t> window, leaf_budget, fanout, min_group, switch_budget;
  std::optional<double> delta;
  std::optional<std::string> checkpoint_dir;
  bool tree_mask = false, no_refine = false, no_relations = false;
  auto* build_tree = app.add_subcommand("build-tree", "build a context tree over one catalog");
  add_common(build_tree, tree_common);
  build_tree->add_option("--catalog", tree_catalog, "catalog JSON")->required();
  build_tree->add_option("--side", tree_side, "source or target");
  build_tree->add_option("--out", tree_out, "tree file to write")->required();
  build_tree->add_option("--window", window, "columns per summarization window");
  build_tree->add_option("--leaf-budget", leaf_budget, "maximum columns per leaf");
  build_tree->add_option("--fanout", fanout, "target child groups per split");
  build_tree->add_option("--min-group", min_group, "minimum group size");
  build_tree->add_option("--switch-budget", switch_budget, "boundary moves per refinement pass");
  build_tree->add_option("--delta", delta, "table clustering distance cutoff");
  build_tree->add_option("--checkpoint-dir", checkpoint_dir, "per-table checkpoints for resuming");
  build_tree->add_flag("--mask", tree_mask, "mask identifiers before building");
  build_tree->add_flag("--no-refine", no_refine, "skip boundary refinement");
  build_tree->add_flag("--no-relations", no_relations, "skip sibling relation annotation");

  // build-graph
  CommonFlags graph_common;
  std::string graph_catalog, graph_side = "target", graph_out;
  std::optional<double> graph_tau;
  bool graph_mask = false, no_table_name = false;
  auto* build_graph = app.add_subcommand("build-graph", "build the similarity graph over one catalog");
  add_common(build_graph, graph_common);
  build_graph->add_option("--catalog", graph_catalog, "catalog JSON")->required();
  build_graph->add_option("--side", graph_side, "source or target");
  build_graph->add_option("--tau", graph_tau, "cosine threshold for links");
  build_graph->add_option("--out", graph_out, "graph file to write")->required();
  build_graph->add_flag("--mask", graph_mask, "mask identifiers before embedding");
  build_graph->add_flag("--no-table-name", no_table_name, "leave the table name out of embedding text");

  // match
  CommonFlags match_common;
  ArtifactFlags match_artifacts;
  std::optional<std::string> match_mode, queries_file;
  std::optional<std::size_t> match_k, match_budget;
  std::vector<std::string> query_tokens;
  std::string match_out;
  auto* match = app.add_subcommand("match", "match source columns against the target catalog");
  add_common(match, match_common);
  add_artifact_flags(match, match_artifacts);
  match->add_option("--mode", match_mode, "full, no_tree, no_diff, llm_local or embed_top1");
  match->add_option("--k", match_k, "shortlist size");
  match->add_option("--budget", match_budget, "context pack budget in characters");
  match->add_option("--queries", queries_file, "benchmark JSON with the queries");
  match->add_option("--query", query_tokens, "source column (cid or table:name), repeatable");
  match->add_option("--out", match_out, "trace directory")->required();

  // bench
  auto* bench = app.add_subcommand("bench", "benchmark generation, runs and reports");
  bench->require_subcommand(1);

  CommonFlags gen_common;
  std::string gen_source, gen_target, gen_matches, gen_out;
  std::optional<double> gen_pair_tau;
  std::optional<std::size_t> gen_min_sep;
  bool gen_mask_source = false, gen_mask_target = false;
  auto* generate = bench->add_subcommand("generate", "derive queries from similar, separated source pairs");
  add_common(generate, gen_common);
  generate->add_option("--source-catalog", gen_source, "source catalog JSON")->required();
  generate->add_option("--target-catalog", gen_target, "target catalog JSON")->required();
  generate->add_option("--matches", gen_matches, "verified matches JSON")->required();
  generate->add_option("--pair-tau", gen_pair_tau, "similarity threshold for pairs");
  generate->add_option("--min-separation", gen_min_sep, "minimum intervening items");
  generate->add_option("--out", gen_out, "benchmark file to write")->required();
  generate->add_flag("--mask-source", gen_mask_source, "mask source identifiers");
  generate->add_flag("--mask-target", gen_mask_target, "mask target identifiers");

  CommonFlags run_common;
  ArtifactFlags run_artifacts;
  std::string run_benchmark, run_out, run_modes = "embed_top1,llm_local,full,no_tree,no_diff";
  std::optional<std::size_t> run_k, run_budget;
  auto* bench_run = bench->add_subcommand("run", "run the benchmark under several modes");
  add_common(bench_run, run_common);
  add_artifact_flags(bench_run, run_artifacts);
  bench_run->add_option("--benchmark", run_benchmark, "benchmark JSON")->required();
  bench_run->add_option("--modes", run_modes, "comma-separated modes");
  bench_run->add_option("--mode", run_modes, "single mode (same as --modes)");
  bench_run->add_option("--k", run_k, "shortlist size");
  bench_run->add_option("--budget", run_budget, "context pack budget in characters");
  bench_run->add_option("--out", run_out, "output directory")->required();

  std::string report_results, report_format = "markdown";
  std::optional<std::string> report_out;
  auto add_report_flags = [&](CLI::App* sub) {
    sub->add_option("--results", report_results, "results.json from bench run")->required();
    sub->add_option("--format", report_format, "markdown or csv");
    sub->add_option("--out", report_out, "file to write (default stdout)");
  };
  auto* bench_report = bench->add_subcommand("report", "render a results file");
  add_report_flags(bench_report);
  auto* report = app.add_subcommand("report", "render a results file");
  add_report_flags(report);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    const CLI::App* scope = &app;
    for (auto* sub : app.get_subcommands()) {
      scope = sub;
      for (auto* inner : sub->get_subcommands()) scope = inner;
    }
    err << scope->help();
    return kExitUser;
  }

  if (build_tree->parsed()) {
    RunConfig rc = resolve_config(tree_common, env);
    if (window) rc.tree.window = *window;
    if (leaf_budget) rc.tree.leaf_budget = *leaf_budget;
    if (fanout) rc.tree.fan_out = *fanout;
    if (min_group) rc.tree.min_group = *min_group;
    if (switch_budget) rc.tree.switch_budget = *switch_budget;
    if (delta) rc.tree.cluster_threshold = *delta;
    if (no_refine) rc.tree.refine_boundaries = false;
    if (no_relations) rc.tree.annotate_relations = false;
    try {
      rc.tree.validate();
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
    Side side = side_flag(tree_side);
    bool& mask = side == Side::kSource ? rc.mask_source : rc.mask_target;
    mask = mask || tree_mask;
    SchemaCatalog catalog = open_catalog(tree_catalog, side, mask, "--catalog");
    auto gateway = open_gateway(rc, true);
    TreeBuildOptions options;
    options.workers = rc.workers;
    if (checkpoint_dir) options.checkpoint_dir = fs::path(*checkpoint_dir);
    ContextTree tree = build_context_tree(catalog, rc.tree, *gateway, options);
    fs::path out_path(tree_out);
    if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
    tree.save(out_path);
    save_run_config(sidecar(out_path), rc, args);
    out << "wrote " << out_path.string() << ": " << tree.size() << " nodes, height " << tree.height() << ", "
        << usage_line(gateway->usage()) << "\n";
    return kExitOk;
  }

  if (build_graph->parsed()) {
    RunConfig rc = resolve_config(graph_common, env);
    Side side = side_flag(graph_side);
    if (graph_tau) {
      if (side == Side::kSource) {
        rc.source_tau = *graph_tau;
      } else {
        rc.tau = *graph_tau;
      }
    }
    if (no_table_name) rc.include_table_name = false;
    bool& mask = side == Side::kSource ? rc.mask_source : rc.mask_target;
    mask = mask || graph_mask;
    SchemaCatalog catalog = open_catalog(graph_catalog, side, mask, "--catalog");
    auto gateway = open_gateway(rc, false);
    Hypergraph graph = build_hypergraph(catalog, *gateway, rc.tau_for(side), rc.include_table_name);
    fs::path out_path(graph_out);
    if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
    graph.save(out_path);
    save_run_config(sidecar(out_path), rc, args);
    std::size_t grouped = std::count_if(graph.groups().begin(), graph.groups().end(),
                                        [](const SimilarityGroup& g) { return g.size() > 1; });
    out << "wrote " << out_path.string() << ": " << graph.links().size() << " links, " << grouped
        << " non-singleton groups\n";
    return kExitOk;
  }

  if (match->parsed()) {
    RunConfig rc = resolve_config(match_common, env);
    if (match_mode) rc.match.mode = mode_flag(*match_mode);
    if (match_k) rc.match.k = *match_k;
    if (match_budget) rc.match.pack_budget = *match_budget;
    rc.match = PipelineConfig::for_mode(rc.match.mode, rc.match);
    if (!queries_file && query_tokens.empty()) throw UsageError("match needs --queries or --query");
    bool needs_chat = rc.match.mode != MatchMode::kEmbedTop1;
    auto gateway = open_gateway(rc, needs_chat);
    auto loaded = load_artifacts(match_artifacts, rc, *gateway, rc.match.use_tree);
    std::vector<MatchQuery> queries;
    if (queries_file) queries = benchmark_from_json(read_json(*queries_file, "--queries"), *loaded.source, *loaded.target);
    for (const auto& token : query_tokens) {
      MatchQuery q;
      q.source = resolve_column(*loaded.source, token);
      queries.push_back(std::move(q));
    }
    const auto artifacts = loaded.view();
    std::vector<json> records(queries.size());
    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> failures{0};
    auto work = [&] {
      for (std::size_t i = next.fetch_add(1); i < queries.size(); i = next.fetch_add(1)) {
        const std::string cid = loaded.source->column(queries[i].source).cid;
        try {
          auto result = run_match(queries[i], rc.match, artifacts, *gateway);
          if (!rc.latency_recorded()) result.trace.latency_s = 0.0;
          records[i] = to_json(result, *loaded.source, *loaded.target);
        } catch (const PipelineError& e) {
          ++failures;
          records[i] = {{"source", cid}, {"error", e.what()}, {"prompt_snapshot", e.prompt_snapshot()}};
        } catch (const std::exception& e) {
          ++failures;
          records[i] = {{"source", cid}, {"error", e.what()}};
        }
      }
    };
    std::vector<std::thread> pool;
    for (std::size_t w = 1; w < std::min<std::size_t>(rc.workers, std::max<std::size_t>(1, queries.size())); ++w) {
      pool.emplace_back(work);
    }
    work();
    for (auto& t : pool) t.join();
    fs::path dir(match_out);
    for (std::size_t i = 0; i < records.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "%04zu-", i + 1);
      write_json(dir / "traces" / (name + records[i].at("source").get<std::string>() + ".json"), records[i]);
    }
    write_json(dir / "results.json", json(records));
    save_run_config(dir / "run_config.json", rc, args);
    out << "matched " << queries.size() << " queries (" << failures.load() << " failed), "
        << usage_line(gateway->usage()) << "\n";
    return kExitOk;
  }

  if (generate->parsed()) {
    RunConfig rc = resolve_config(gen_common, env);
    if (gen_pair_tau) rc.pair_tau = *gen_pair_tau;
    if (gen_min_sep) rc.min_separation = *gen_min_sep;
    rc.mask_source = rc.mask_source || gen_mask_source;
    rc.mask_target = rc.mask_target || gen_mask_target;
    SchemaCatalog source = open_catalog(gen_source, Side::kSource, rc.mask_source, "--source-catalog");
    SchemaCatalog target = open_catalog(gen_target, Side::kTarget, rc.mask_target, "--target-catalog");
    BenchmarkSpec spec;
    spec.source = &source;
    spec.target = &target;
    spec.pair_tau = rc.pair_tau;
    spec.min_separation = rc.min_separation;
    spec.verified_matches = verified_matches_from_json(read_json(gen_matches, "--matches"), source, target);
    auto gateway = open_gateway(rc, false);
    auto queries = generate_benchmark(spec, *gateway);
    fs::path out_path(gen_out);
    write_json(out_path, benchmark_to_json(queries, source, target));
    save_run_config(sidecar(out_path), rc, args);
    out << "wrote " << out_path.string() << ": " << queries.size() << " queries\n";
    return kExitOk;
  }

  if (bench_run->parsed()) {
    RunConfig rc = resolve_config(run_common, env);
    if (run_k) rc.match.k = *run_k;
    if (run_budget) rc.match.pack_budget = *run_budget;
    std::vector<MatchMode> modes;
    bool needs_tree = false, needs_chat = false;
    for (const auto& m : split_list(run_modes)) {
      modes.push_back(mode_flag(m));
      auto cfg = PipelineConfig::for_mode(modes.back(), rc.match);
      needs_tree = needs_tree || cfg.use_tree;
      needs_chat = needs_chat || modes.back() != MatchMode::kEmbedTop1;
    }
    if (modes.empty()) throw UsageError("--modes is empty");
    auto gateway = open_gateway(rc, needs_chat);
    auto loaded = load_artifacts(run_artifacts, rc, *gateway, needs_tree);
    auto queries = benchmark_from_json(read_json(run_benchmark, "--benchmark"), *loaded.source, *loaded.target);
    AblationOptions options;
    options.base = rc.match;
    options.workers = rc.workers;
    AblationTable table = run_ablation_suite(queries, modes, loaded.view(), *gateway, options);
    if (!rc.latency_recorded()) {
      for (auto& r : table.reports) {
        r.mean_latency_s = 0.0;
        for (auto& row : r.rows) row.trace.latency_s = 0.0;
      }
    }
    fs::path dir(run_out);
    write_json(dir / "results.json", to_json(table));
    write_text(dir / "report.md", render_report(table, ReportFormat::kMarkdown));
    write_text(dir / "report.csv", render_report(table, ReportFormat::kCsv));
    write_text(dir / "queries.csv", render_query_csv(table));
    save_run_config(dir / "run_config.json", rc, args);
    out << render_report(table, ReportFormat::kMarkdown);
    return kExitOk;
  }

  if (bench_report->parsed() || report->parsed()) {
    ReportFormat format;
    try {
      format = parse_report_format(report_format);
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
    AblationTable table = ablation_table_from_json(read_json(report_results, "--results"));
    std::string rendered = render_report(table, format);
    if (report_out) {
      write_text(*report_out, rendered);
    } else {
      out << rendered;
    }
    return kExitOk;
  }

  err << app.help();
  return kExitUser;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const EnvLookup& env) {
  try {
    return run(args, out, err, env);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUser;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUser;
  } catch (const CatalogError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUser;
  } catch (const BudgetError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUser;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return dispatch(args, out, err);
}

}  // namespace construm::cli
