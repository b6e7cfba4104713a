#include "docre/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "docre/config.hpp"
#include "docre/corpus.hpp"
#include "docre/error.hpp"
#include "docre/experiments.hpp"
#include "docre/graph.hpp"
#include "docre/synth.hpp"
#include "docre/trainer.hpp"

namespace docre {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir = "docre-out";
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "Key-value config file");
  cmd->add_option("--set", c.overrides, "Override one config key (key=value); repeatable");
  cmd->add_option("--out-dir", c.out_dir, "Directory for every output of this run");
}

// Defaults, then the config file, then DOCRE_* variables, then --set flags.
TrainConfig load_config(const Common& c) {
  TrainConfig config = c.config_path.empty() ? TrainConfig{} : TrainConfig::from_file(c.config_path);
  config.apply_environment();
  for (const auto& kv : c.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw Error(ErrorKind::Config, "--set expects key=value, got '" + kv + "'");
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    config.set(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
  }
  config.validate();
  return config;
}

const std::string& require_path(const std::string& value, const char* flag) {
  if (value.empty()) throw Error(ErrorKind::Config, std::string("missing required path ") + flag);
  if (!fs::exists(value)) throw Error(ErrorKind::Config, std::string(flag) + " path does not exist: " + value);
  return value;
}

fs::path prepare_out_dir(const std::string& dir) {
  fs::path p(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create output directory " + dir + ": " + ec.message());
  return p;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::Io, "failed writing " + path.string());
}

void write_snapshot(const fs::path& dir, const TrainConfig& config) {
  write_text(dir / "config.txt", config.to_text());
}

std::vector<Document> load_corpus(const std::string& path, std::ostream& err) {
  IngestResult r = ingest_jsonl(fs::path(path));
  if (const auto w = r.total_warnings()) {
    err << "warning: " << path << ": " << w << " dropped mentions/relations\n";
  }
  return std::move(r.documents);
}

int cmd_train(const Common& c, const std::string& train_path, const std::string& dev_path, std::ostream& out,
              std::ostream& err) {
  const TrainConfig config = load_config(c);
  require_path(train_path, "--train");
  require_path(dev_path, "--dev");
  const fs::path dir = prepare_out_dir(c.out_dir);
  write_snapshot(dir, config);
  const auto train_docs = load_corpus(train_path, err);
  const auto dev_docs = load_corpus(dev_path, err);

  std::ofstream metrics(dir / "metrics.jsonl", std::ios::binary);
  if (!metrics) throw Error(ErrorKind::Io, "cannot write metrics.jsonl");
  TrainResult result = train(train_docs, dev_docs, config, config.seed, std::nullopt, [&](const EpochMetrics& m) {
    metrics << m.to_json().dump() << '\n';
    metrics.flush();
    err << "epoch " << m.epoch << "  loss " << m.train_loss << "  dev F1 " << m.dev.overall.f1()
        << (m.improved ? "  *" : "") << '\n';
  });
  save_checkpoint(dir / "checkpoint", result.model, {result.best_epoch, result.best_dev_f1});
  const EvalReport report = evaluate(result.model, dev_docs);
  write_text(dir / "report.json", report.to_json().dump(2) + "\n");
  out << "best epoch " << result.best_epoch << (result.stopped_early ? " (early stop)" : "") << '\n'
      << report.to_table();
  return kExitOk;
}

int cmd_eval(const Common& c, const std::string& checkpoint, const std::string& data, std::ostream& out,
             std::ostream& err) {
  require_path(checkpoint, "--checkpoint");
  require_path(data, "--data");
  LoadedCheckpoint loaded = load_checkpoint(checkpoint);
  const fs::path dir = prepare_out_dir(c.out_dir);
  write_snapshot(dir, loaded.model.config());
  const EvalReport report = evaluate(loaded.model, load_corpus(data, err));
  write_text(dir / "report.json", report.to_json().dump(2) + "\n");
  out << report.to_table();
  return kExitOk;
}

AblationInputs load_inputs(const std::string& train_path, const std::string& dev_path,
                           const std::string& test_path, std::ostream& err) {
  require_path(train_path, "--train");
  require_path(dev_path, "--dev");
  AblationInputs in;
  in.train = load_corpus(train_path, err);
  in.dev = load_corpus(dev_path, err);
  in.eval = test_path.empty() ? in.dev : load_corpus(require_path(test_path, "--test"), err);
  return in;
}

int cmd_ablate(const Common& c, const std::string& train_path, const std::string& dev_path,
               const std::string& test_path, const std::string& category, std::ostream& out, std::ostream& err) {
  const TrainConfig config = load_config(c);
  const AblationInputs in = load_inputs(train_path, dev_path, test_path, err);
  const fs::path dir = prepare_out_dir(c.out_dir);
  write_snapshot(dir, config);
  std::vector<AblationReport> reports;
  if (category == "all") {
    reports = ablate_all(in, config, config.seeds);
  } else {
    EdgeKind kind;
    try {
      kind = parse_edge_kind(category);
    } catch (const Error& e) {
      throw Error(ErrorKind::Config, std::string("--category: ") + e.what());
    }
    reports.push_back(ablate(in, config, kind, config.seeds));
  }
  json j = json::array();
  for (const auto& r : reports) j.push_back(r.to_json());
  write_text(dir / "ablation.json", j.dump(2) + "\n");
  out << ablation_table(reports);
  return kExitOk;
}

int cmd_sweep(const Common& c, const std::string& train_path, const std::string& dev_path,
              const std::vector<std::size_t>& values, std::ostream& out, std::ostream& err) {
  const TrainConfig config = load_config(c);
  const AblationInputs in = load_inputs(train_path, dev_path, "", err);
  const fs::path dir = prepare_out_dir(c.out_dir);
  write_snapshot(dir, config);
  const auto rows = sweep_top_n(in, config, values, {config.seed});
  write_text(dir / "sweep.json", sweep_json(rows).dump(2) + "\n");
  out << sweep_table(rows);
  return kExitOk;
}

int cmd_build_graph(const Common& c, const std::string& data, std::ostream& out, std::ostream& err) {
  const TrainConfig config = load_config(c);
  require_path(data, "--data");
  const fs::path dir = prepare_out_dir(c.out_dir);
  write_snapshot(dir, config);
  const auto docs = merge_all(load_corpus(data, err));
  std::ofstream graphs(dir / "graphs.jsonl", std::ios::binary);
  if (!graphs) throw Error(ErrorKind::Io, "cannot write graphs.jsonl");
  std::map<EdgeKind, std::size_t> totals;
  std::size_t nodes = 0;
  for (const auto& doc : docs) {
    const DocumentGraph g = build_graph(doc, graph_options(config));
    graphs << graph_report(doc, g).dump() << '\n';
    nodes += g.size();
    for (auto [k, n] : g.count_by_kind()) totals[k] += n;
  }
  out << docs.size() << " documents, " << nodes << " nodes\n";
  for (EdgeKind k : kAllEdgeKinds) out << "  " << kind_name(k) << ": " << totals[k] << '\n';
  return kExitOk;
}

struct SynthArgs {
  std::size_t entities = 300;
  std::optional<std::size_t> triples;
  std::size_t docs = 100;
  double pct_inter = 0.5;
  double pct_coref_only = 0.0;
  std::uint64_t seed = 1;
  std::optional<std::uint64_t> kb_seed;
  std::string out;
};

int cmd_gen_synth(const Common& c, const SynthArgs& a, std::ostream& out) {
  if (a.out.empty()) throw Error(ErrorKind::Config, "missing required path --out");
  const std::size_t capacity = a.entities < 2 ? 0 : a.entities * (a.entities - 1);
  const std::size_t triples = a.triples ? *a.triples : std::min(capacity, a.entities);
  const ToyKB kb = gen_kb(a.entities, triples, a.kb_seed ? *a.kb_seed : a.seed);
  const SynthCorpus corpus = gen_corpus(kb, a.docs, a.pct_inter, a.pct_coref_only, a.seed);
  const fs::path dir = prepare_out_dir(c.out_dir);
  const fs::path path = dir / a.out;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  corpus.write(path);
  fs::path kb_path = path;
  kb_path += ".kb.json";
  write_text(kb_path, kb.to_json().dump(2) + "\n");
  out << "wrote " << corpus.documents.size() << " documents to " << path.string() << '\n';
  return kExitOk;
}

int cmd_run_seeds(const Common& c, const std::string& train_path, const std::string& dev_path,
                  const std::string& test_path, std::ostream& out, std::ostream& err) {
  const TrainConfig config = load_config(c);
  const AblationInputs in = load_inputs(train_path, dev_path, test_path, err);
  const fs::path dir = prepare_out_dir(c.out_dir);
  write_snapshot(dir, config);
  const SeedSummary summary = run_seeds(in.train, in.dev, in.eval, config);
  write_text(dir / "seeds.json", summary.to_json().dump(2) + "\n");
  out << summary.to_table();
  for (const auto& r : summary.runs) {
    if (!r.ok) err << "seed " << r.seed << " failed: " << r.error << '\n';
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Document-level relation extraction with an edge-typed GCNN"};
  app.name("docre");
  app.require_subcommand(1);

  Common common;
  std::string train_path, dev_path, test_path, data_path, checkpoint, category = "all";
  std::vector<std::size_t> values = {0, 2, 4, 6};
  SynthArgs synth;

  auto* train_cmd = app.add_subcommand("train", "Train a model and keep the best checkpoint");
  add_common(train_cmd, common);
  train_cmd->add_option("--train", train_path, "Training corpus (JSONL)");
  train_cmd->add_option("--dev", dev_path, "Development corpus used for model selection");

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  add_common(eval_cmd, common);
  eval_cmd->add_option("--checkpoint", checkpoint, "Checkpoint directory");
  eval_cmd->add_option("--data", data_path, "Corpus to evaluate (JSONL)");

  auto* ablate_cmd = app.add_subcommand("ablate", "Edge-category ablation");
  add_common(ablate_cmd, common);
  ablate_cmd->add_option("--train", train_path);
  ablate_cmd->add_option("--dev", dev_path);
  ablate_cmd->add_option("--test", test_path, "Report split (default: dev)");
  ablate_cmd->add_option("--category", category, "Edge category to remove, or 'all'");

  auto* sweep_cmd = app.add_subcommand("sweep-topn", "Train once per top-N value");
  add_common(sweep_cmd, common);
  sweep_cmd->add_option("--train", train_path);
  sweep_cmd->add_option("--dev", dev_path);
  sweep_cmd->add_option("--values", values, "Top-N values")->delimiter(',');

  auto* graph_cmd = app.add_subcommand("build-graph", "Build document graphs and report edge counts");
  add_common(graph_cmd, common);
  graph_cmd->add_option("--data", data_path, "Corpus (JSONL)");

  auto* synth_cmd = app.add_subcommand("gen-synth", "Generate a synthetic corpus");
  add_common(synth_cmd, common);
  synth_cmd->add_option("--entities", synth.entities);
  synth_cmd->add_option("--triples", synth.triples, "KB triples (default: one per entity)");
  synth_cmd->add_option("--docs", synth.docs);
  synth_cmd->add_option("--pct-inter", synth.pct_inter);
  synth_cmd->add_option("--pct-coref-only", synth.pct_coref_only);
  synth_cmd->add_option("--seed", synth.seed);
  synth_cmd->add_option("--kb-seed", synth.kb_seed, "Knowledge-base seed (default: --seed); share it across splits");
  synth_cmd->add_option("--out", synth.out, "Corpus path, relative to --out-dir");

  auto* seeds_cmd = app.add_subcommand("run-seeds", "Train and evaluate once per configured seed");
  add_common(seeds_cmd, common);
  seeds_cmd->add_option("--train", train_path);
  seeds_cmd->add_option("--dev", dev_path);
  seeds_cmd->add_option("--test", test_path, "Report split (default: dev)");

  // gen-synth writes beside the working directory unless told otherwise.
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    if (!args.empty() && args.front() == "gen-synth") common.out_dir = ".";
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, eo;
    const int code = app.exit(e, o, eo);
    out << o.str();
    err << eo.str();
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*train_cmd) return cmd_train(common, train_path, dev_path, out, err);
    if (*eval_cmd) return cmd_eval(common, checkpoint, data_path, out, err);
    if (*ablate_cmd) return cmd_ablate(common, train_path, dev_path, test_path, category, out, err);
    if (*sweep_cmd) return cmd_sweep(common, train_path, dev_path, values, out, err);
    if (*graph_cmd) return cmd_build_graph(common, data_path, out, err);
    if (*synth_cmd) return cmd_gen_synth(common, synth, out);
    if (*seeds_cmd) return cmd_run_seeds(common, train_path, dev_path, test_path, out, err);
  } catch (const Error& e) {
    err << "docre: " << e.what() << '\n';
    return e.kind() == ErrorKind::Config ? kExitConfig : kExitRuntime;
  } catch (const std::exception& e) {
    err << "docre: error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace docre
