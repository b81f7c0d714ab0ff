// conex: command-line driver for the extraction pipeline.

#include <atomic>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "conex/annotation.hpp"
#include "conex/annotation_http.hpp"
#include "conex/conex.hpp"

namespace fs = std::filesystem;
using conex::Error;
using conex::ErrorKind;
using conex::Json;

namespace {

enum ExitCode : int {
  kExitOk = 0,
  kExitInternal = 1,
  kExitUsage = 2,
  kExitMissingInput = 3,
  kExitSchema = 4,
  kExitSeedConflict = 5,
  kExitInvalidArgument = 6,
  kExitDivergence = 7,
  kExitDegenerate = 8,
  kExitMissingJudgment = 9,
  kExitNotFound = 10,
};

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return kExitInvalidArgument;
    case ErrorKind::kParse:
    case ErrorKind::kSchema: return kExitSchema;
    case ErrorKind::kMissingInput: return kExitMissingInput;
    case ErrorKind::kSeedConflict: return kExitSeedConflict;
    case ErrorKind::kNotFound: return kExitNotFound;
    case ErrorKind::kDivergence: return kExitDivergence;
    case ErrorKind::kDegenerate: return kExitDegenerate;
    case ErrorKind::kMissingJudgment: return kExitMissingJudgment;
  }
  return kExitInternal;
}

void report_error(std::string_view kind, const std::string& message, int code) {
  std::cerr << Json{{"error", {{"kind", kind}, {"message", message}, {"exit_code", code}}}}.dump() << '\n';
}

// Options shared by every subcommand.
struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "pipeline config JSON");
    app->add_option("--seed", seed, "base seed; overrides the config seed bundle");
  }

  conex::PipelineConfig load() const {
    conex::PipelineConfig c;
    if (!config_path.empty()) {
      c = conex::config_from_json(conex::read_json_file(config_path), fs::path(config_path).parent_path());
    }
    if (seed) {
      c.seeds = conex::SeedBundle::from_base(*seed);
      c.train.seed = c.seeds.train;
      c.forest.seed = c.seeds.forest;
      c.synthetic.seed = c.seeds.synthetic;
    }
    return c;
  }
};

std::string require(const std::string& flag_value, const conex::PipelineConfig& c, const std::string& key,
                    const std::string& flag) {
  if (!flag_value.empty()) return flag_value;
  if (auto p = c.path(key)) return *p;
  throw Error(ErrorKind::kMissingInput, "missing " + flag + " (or paths." + key + " in the config)");
}

std::string optional_path(const std::string& flag_value, const conex::PipelineConfig& c, const std::string& key) {
  if (!flag_value.empty()) return flag_value;
  return c.path(key).value_or("");
}

/// Manifest whose seed must equal the configured split seed.
Json load_manifest(const std::string& path, const conex::PipelineConfig& c) {
  Json m = conex::read_json_file(path);
  if (!m.contains("seed") || !m.at("seed").is_number_unsigned()) {
    throw Error(ErrorKind::kSchema, "split manifest '" + path + "' lacks an unsigned seed");
  }
  const auto seed = m.at("seed").get<std::uint64_t>();
  if (seed != c.seeds.split) {
    throw Error(ErrorKind::kSeedConflict, "split manifest '" + path + "' was built with seed " +
                                              std::to_string(seed) + " but the split seed is " +
                                              std::to_string(c.seeds.split));
  }
  return m;
}

std::set<std::string> manifest_ids(const Json& manifest, const std::string& subset) {
  if (subset != "train" && subset != "validation" && subset != "test") {
    throw Error(ErrorKind::kInvalidArgument, "unknown subset '" + subset + "'");
  }
  std::set<std::string> ids;
  for (const auto& id : manifest.at(subset)) ids.insert(id.get<std::string>());
  return ids;
}

std::vector<conex::EntityRecord> load_subset(const std::string& corpus_path, const std::string& split_path,
                                             const std::string& subset, const conex::PipelineConfig& c) {
  auto records = conex::read_corpus_file(corpus_path);
  if (subset == "all") return records;
  if (split_path.empty()) throw Error(ErrorKind::kMissingInput, "subset '" + subset + "' needs --split");
  return conex::select_subset(records, load_manifest(split_path, c), subset);
}

conex::KgStore load_kg(const std::string& path, const std::string& format) {
  return conex::read_kg_file(path, format.empty() ? conex::guess_kg_format(path) : conex::parse_kg_format(format));
}

conex::HeadModel load_head(const std::string& path) { return conex::head_from_json(conex::read_json_file(path)); }

conex::RandomForest load_forest(const std::string& path) {
  return conex::RandomForest::from_json(conex::read_json_file(path));
}

conex::RuleSet load_rules(const std::string& path) {
  return path.empty() ? conex::RuleSet::defaults() : conex::rules_from_json(conex::read_json_file(path));
}

std::vector<conex::SystemOutput> read_outputs_file(const std::string& path) {
  auto in = conex::open_input(path);
  return conex::read_system_outputs(in);
}

conex::SystemOutput read_single_output(const std::string& path) {
  auto outs = read_outputs_file(path);
  if (outs.size() != 1) {
    throw Error(ErrorKind::kSchema, "'" + path + "' must hold exactly one system, found " +
                                        std::to_string(outs.size()));
  }
  return outs.front();
}

void print_summary(const Json& j) { std::cout << j.dump() << '\n'; }

// ---------------------------------------------------------------------------
// Subcommands

struct GenSynthetic {
  Common common;
  std::string out_dir;
  std::optional<std::size_t> entities, vocabulary;
  std::optional<double> nesting_rate, kg_coverage;

  void attach(CLI::App& root) {
    auto* app = root.add_subcommand("gen-synthetic", "write a templated corpus with known gold concepts");
    common.attach(app);
    app->add_option("--out-dir", out_dir, "output directory")->required();
    app->add_option("--entities", entities);
    app->add_option("--vocabulary", vocabulary, "concept vocabulary size");
    app->add_option("--nesting-rate", nesting_rate);
    app->add_option("--kg-coverage", kg_coverage);
    app->callback([this] { run(); });
  }

  void run() const {
    auto c = common.load();
    if (entities) c.synthetic.entities = *entities;
    if (vocabulary) c.synthetic.vocabulary_size = *vocabulary;
    if (nesting_rate) c.synthetic.nesting_rate = *nesting_rate;
    if (kg_coverage) c.synthetic.kg_coverage = *kg_coverage;
    const auto corpus = conex::generate_synthetic(c.synthetic);
    const fs::path dir(out_dir);
    {
      auto out = conex::open_output((dir / "corpus.jsonl").string());
      conex::write_corpus(out, corpus.records);
    }
    {
      auto out = conex::open_output((dir / "kg.tsv").string());
      conex::write_kg_tsv(out, corpus.kg);
    }
    {
      auto out = conex::open_output((dir / "truth.jsonl").string());
      conex::write_system_output(out, corpus.truth);
    }
    {
      auto out = conex::open_output((dir / "vocabulary.txt").string());
      for (const auto& v : corpus.vocabulary) out << v << '\n';
    }
    conex::write_json_file((dir / "audit.json").string(), corpus.audit.to_json());
    print_summary(corpus.audit.to_json());
  }
};

struct BuildDataset {
  Common common;
  std::string corpus, kg, kg_format, out_dir, manifest;

  void attach(CLI::App& root) {
    auto* app = root.add_subcommand("build-dataset", "attach KG concepts and split the corpus");
    common.attach(app);
    app->add_option("--corpus", corpus);
    app->add_option("--kg", kg);
    app->add_option("--kg-format", kg_format, "tsv or jsonl (default: by extension)");
    app->add_option("--out-dir", out_dir)->required();
    app->add_option("--manifest", manifest, "reuse an existing split manifest");
    app->callback([this] { run(); });
  }

  void run() const {
    const auto c = common.load();
    const auto kg_store = load_kg(require(kg, c, "kg", "--kg"), kg_format);
    auto records = conex::attach_kg_concepts(conex::read_corpus_file(require(corpus, c, "corpus", "--corpus")),
                                             kg_store);
    conex::DatasetSplit split;
    if (!manifest.empty()) {
      split = conex::split_from_manifest(load_manifest(manifest, c), records);
    } else {
      split = conex::split_dataset(records, c.seeds.split, c.test_count, c.train_ratio);
    }
    const fs::path dir(out_dir);
    {
      auto out = conex::open_output((dir / "dataset.jsonl").string());
      conex::write_corpus(out, records);
    }
    conex::write_json_file((dir / "split.json").string(), conex::split_manifest(split));
    std::size_t labeled = 0;
    for (const auto& r : records) labeled += conex::build_weak_labels(r).empty() ? 0 : 1;
    print_summary(Json{{"records", records.size()},
                       {"weakly_labeled", labeled},
                       {"train", split.train.size()},
                       {"validation", split.validation.size()},
                       {"test", split.test.size()},
                       {"seed", split.seed}});
  }
};

struct TrainHead {
  Common common;
  std::string dataset, split, out, log;
  std::optional<int> epochs;

  void attach(CLI::App& root) {
    auto* app = root.add_subcommand("train-head", "train the start/end pointer head");
    common.attach(app);
    app->add_option("--dataset", dataset);
    app->add_option("--split", split);
    app->add_option("--out", out, "checkpoint path")->required();
    app->add_option("--log", log, "epoch log JSONL");
    app->add_option("--epochs", epochs);
    app->callback([this] { run(); });
  }

  void run() const {
    auto c = common.load();
    if (epochs) c.train.epochs = *epochs;
    const auto records = conex::read_corpus_file(require(dataset, c, "dataset", "--dataset"));
    const auto s = conex::split_from_manifest(load_manifest(require(split, c, "split", "--split"), c), records);
    const conex::HashedEmbedder embedder(c.embedder);
    const conex::QuestionTemplate question(c.question);
    const auto result = conex::train_head(s, c.train, embedder, question);
    conex::write_json_file(out, conex::head_to_json({result.params, c.embedder, question, c.train}));
    if (!log.empty()) {
      auto f = conex::open_output(log);
      for (const auto& e : result.log) f << e.to_json().dump() << '\n';
    }
    Json summary{{"epochs", result.log.size()}, {"best_epoch", result.best_epoch}};
    if (result.best_epoch > 0) summary["best"] = result.log.at(result.best_epoch - 1).to_json();
    print_summary(summary);
  }
};

struct Decode {
  Common common;
  std::string dataset, split, subset = "all", head, out, system_output, system_id = "ftt";
  std::optional<double> threshold;
  std::optional<std::size_t> top_k;

  void attach(CLI::App& root) {
    auto* app = root.add_subcommand("decode", "score spans and write the candidate dump");
    common.attach(app);
    app->add_option("--dataset", dataset, "corpus or dataset JSONL");
    app->add_option("--split", split);
    app->add_option("--subset", subset, "all, train, validation or test");
    app->add_option("--head", head);
    app->add_option("--out", out, "candidate dump")->required();
    app->add_option("--threshold", threshold);
    app->add_option("--top-k", top_k);
    app->add_option("--system-output", system_output, "also write the truncated candidates as a system output");
    app->add_option("--system-id", system_id);
    app->callback([this] { run(); });
  }

  void run() const {
    auto c = common.load();
    if (threshold) c.decode.threshold = *threshold;
    if (top_k) c.decode.top_k = *top_k;
    c.decode.validate();
    const auto model = load_head(require(head, c, "head", "--head"));
    const auto records =
        load_subset(require(dataset, c, "dataset", "--dataset"), optional_path(split, c, "split"), subset, c);
    const auto cands = conex::decode_records(records, model, c.decode);
    {
      auto f = conex::open_output(out);
      conex::write_candidates(f, cands);
    }
    if (!system_output.empty()) {
      auto f = conex::open_output(system_output);
      conex::write_system_output(f, conex::candidates_as_output(cands, system_id));
    }
    std::size_t spans = 0;
    for (const auto& rc : cands) spans += rc.spans.size();
    print_summary(Json{{"records", cands.size()}, {"candidates", spans}});
  }
};

struct Select {
  Common common;
  std::string candidates, kg, kg_format, out, labels, truth, train_candidates, forest_in, forest_out, importance,
      labels_out;
  std::optional<std::size_t> label_sample;

  void attach(CLI::App& root) {
    auto* app = root.add_subcommand("select", "train or load the selector and filter candidates");
    common.attach(app);
    app->add_option("--candidates", candidates, "candidate dump to filter")->required();
    app->add_option("--kg", kg);
    app->add_option("--kg-format", kg_format);
    app->add_option("--out", out, "selected concepts JSONL")->required();
    auto* g = app->add_option_group("training source");
    g->add_option("--labels", labels, "labeled examples CSV");
    g->add_option("--truth", truth, "truth system output for auto-labeling");
    g->add_option("--forest", forest_in, "trained forest JSON");
    g->require_option(1);
    app->add_option("--train-candidates", train_candidates, "candidate dump to auto-label (with --truth)");
    app->add_option("--label-sample", label_sample, "number of auto-labeled candidates");
    app->add_option("--save-forest", forest_out);
    app->add_option("--importance", importance, "feature importance JSON");
    app->add_option("--save-labels", labels_out, "write the training examples as CSV");
    app->callback([this] { run(); });
  }

  void run() const {
    const auto c = common.load();
    const conex::KgStore kg_store = load_kg(require(kg, c, "kg", "--kg"), kg_format);
    const conex::ConceptIndex index(kg_store, c.mode);
    conex::RandomForest forest;
    std::vector<conex::LabeledExample> examples;
    if (!forest_in.empty()) {
      forest = load_forest(forest_in);
    } else {
      if (!labels.empty()) {
        auto in = conex::open_input(labels);
        examples = conex::read_labeled_csv(in);
      } else {
        if (train_candidates.empty()) throw Error(ErrorKind::kMissingInput, "--truth needs --train-candidates");
        examples = conex::auto_label(conex::read_candidates_file(train_candidates), read_single_output(truth),
                                     index, label_sample.value_or(c.label_sample), c.seeds.sample);
      }
      forest = conex::train_forest(examples, c.forest);
    }
    if (!labels_out.empty()) {
      auto f = conex::open_output(labels_out);
      conex::write_labeled_csv(f, examples);
    }
    if (!forest_out.empty()) conex::write_json_file(forest_out, forest.to_json());
    if (!importance.empty()) conex::write_json_file(importance, forest.feature_importance().to_json());
    const auto selection = conex::apply_selector(conex::read_candidates_file(candidates), forest, index);
    {
      auto f = conex::open_output(out);
      conex::write_selection(f, selection);
    }
    std::size_t kept = 0;
    for (const auto& s : selection) kept += s.concepts.size();
    std::size_t keep_labels = 0;
    for (const auto& e : examples) keep_labels += e.label == conex::Label::kKeep ? 1 : 0;
    print_summary(Json{{"training_examples", examples.size()},
                       {"keep_labels", keep_labels},
                       {"records", selection.size()},
                       {"selected", kept}});
  }
};

struct Prune {
  Common common;
  std::string selection, kg, kg_format, rules, out, audit, system_id = "conex";

  void attach(CLI::App& root) {
    auto* app = root.add_subcommand("prune", "apply the pruning rules to selected concepts");
    common.attach(app);
    app->add_option("--selection", selection)->required();
    app->add_option("--kg", kg);
    app->add_option("--kg-format", kg_format);
    app->add_option("--rules", rules, "rule file (default: built-in rules)");
    app->add_option("--out", out, "system output JSONL")->required();
    app->add_option("--audit", audit, "per-decision audit JSONL");
    app->add_option("--system-id", system_id);
    app->callback([this] { run(); });
  }

  void run() const {
    const auto c = common.load();
    const auto kg_store = load_kg(require(kg, c, "kg", "--kg"), kg_format);
    const conex::ConceptIndex index(kg_store, c.mode);
    auto in = conex::open_input(selection);
    const auto result =
        conex::prune_selection(conex::read_selection(in), load_rules(optional_path(rules, c, "rules")), index, system_id);
    {
      auto f = conex::open_output(out);
      conex::write_system_output(f, result.output);
    }
    if (!audit.empty()) {
      auto f = conex::open_output(audit);
      for (const auto& [entity, d] : result.audit) {
        Json j = d.to_json();
        j["entity_id"] = entity;
        f << j.dump() << '\n';
      }
    }
    std::size_t kept = 0;
    for (const auto& [e, cs] : result.output.concepts) kept += cs.size();
    print_summary(Json{{"records", result.output.concepts.size()}, {"kept", kept}, {"decisions", result.audit.size()}});
  }
};

struct Hearst {
  Common common;
  std::string dataset, split, subset = "all", patterns, out, system_id = "hearst";

  void attach(CLI::App& root) {
    auto* app = root.add_subcommand("hearst", "run the lexical pattern baseline");
    common.attach(app);
    app->add_option("--dataset", dataset);
    app->add_option("--split", split);
    app->add_option("--subset", subset);
    app->add_option("--patterns", patterns);
    app->add_option("--out", out, "system output JSONL")->required();
    app->add_option("--system-id", system_id);
    app->callback([this] { run(); });
  }

  void run() const {
    const auto c = common.load();
    const auto records =
        load_subset(require(dataset, c, "dataset", "--dataset"), optional_path(split, c, "split"), subset, c);
    const auto matchers = conex::compile_patterns(conex::read_json_file(require(patterns, c, "patterns", "--patterns")));
    const auto so = conex::hearst_output(records, matchers, system_id);
    auto f = conex::open_output(out);
    conex::write_system_output(f, so);
    std::size_t n = 0;
    for (const auto& [e, cs] : so.concepts) n += cs.size();
    print_summary(Json{{"records", records.size()}, {"concepts", n}});
  }
};

struct Evaluate {
  Common common;
  std::vector<std::string> systems;
  std::string kg, kg_format, judgments, truth, split, subset = "test", out;

  void attach(CLI::App& root) {
    auto* app = root.add_subcommand("evaluate", "score system outputs against the KG and judgments");
    common.attach(app);
    app->add_option("--system", systems, "system output JSONL (repeatable)")->required();
    app->add_option("--kg", kg);
    app->add_option("--kg-format", kg_format);
    auto* g = app->add_option_group("judgment source");
    g->add_option("--judgments", judgments, "judgment CSV");
    g->add_option("--truth", truth, "truth system output; also reports gold recall");
    g->require_option(1);
    app->add_option("--split", split, "restrict to a manifest subset");
    app->add_option("--subset", subset);
    app->add_option("--out", out, "report JSON");
    app->callback([this] { run(); });
  }

  void run() const {
    const auto c = common.load();
    const auto kg_store = load_kg(require(kg, c, "kg", "--kg"), kg_format);
    const conex::ConceptIndex index(kg_store, c.mode);
    std::vector<conex::SystemOutput> outputs;
    for (const auto& p : systems) {
      for (auto& so : read_outputs_file(p)) outputs.push_back(std::move(so));
    }
    std::optional<std::set<std::string>> scope;
    if (!split.empty()) scope = manifest_ids(load_manifest(split, c), subset);
    if (scope) {
      for (auto& so : outputs) so = conex::restrict_output(so, *scope);
    }
    std::optional<conex::SystemOutput> gold;
    conex::JudgmentStore store(c.mode);
    if (!truth.empty()) {
      gold = read_single_output(truth);
      if (scope) gold = conex::restrict_output(*gold, *scope);
      store = conex::judgments_from_truth(*gold, outputs, c.mode);
    } else {
      auto in = conex::open_input(judgments);
      store = conex::read_judgments(in, c.mode);
    }
    const auto reports = conex::evaluate_systems(outputs, index, store);
    Json systems_json = Json::array();
    Json table = Json::array();
    table.push_back({"system", "EC#", "EC len", "NC#", "NC len", "OC ratio", "precision", "R-recall", "R-F1"});
    auto opt = [](const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); };
    for (std::size_t k = 0; k < reports.size(); ++k) {
      const auto& r = reports[k];
      Json j = r.to_json();
      if (gold) j["gold_recall"] = opt(conex::gold_recall(outputs[k], gold->concepts, c.mode));
      systems_json.push_back(j);
      table.push_back({r.system_id, r.ec_count, opt(r.ec_length), r.nc_count, opt(r.nc_length), r.oc_ratio,
                       opt(r.precision), opt(r.relative_recall), opt(r.relative_f1)});
    }
    const Json report{{"systems", systems_json}, {"table", table}};
    if (!out.empty()) conex::write_json_file(out, report);
    print_summary(report);
  }
};

struct BatchComplete {
  Common common;
  std::string dataset, kg, kg_format, head, forest, rules, out;
  std::optional<double> threshold;

  void attach(CLI::App& root) {
    auto* app = root.add_subcommand("batch-complete", "extract new instanceOf pairs over a whole corpus");
    common.attach(app);
    app->add_option("--dataset", dataset);
    app->add_option("--kg", kg);
    app->add_option("--kg-format", kg_format);
    app->add_option("--head", head);
    app->add_option("--forest", forest);
    app->add_option("--rules", rules);
    app->add_option("--threshold", threshold);
    app->add_option("--out", out, "new pairs TSV")->required();
    app->callback([this] { run(); });
  }

  void run() const {
    auto c = common.load();
    if (threshold) c.decode.threshold = *threshold;
    c.decode.validate();
    const auto kg_store = load_kg(require(kg, c, "kg", "--kg"), kg_format);
    const conex::ConceptIndex index(kg_store, c.mode);
    conex::BatchSummary summary;
    const auto pairs = conex::batch_complete(conex::read_corpus_file(require(dataset, c, "dataset", "--dataset")),
                                             load_head(require(head, c, "head", "--head")),
                                             load_forest(require(forest, c, "forest", "--forest")),
                                             load_rules(optional_path(rules, c, "rules")), index, c.decode, summary);
    auto f = conex::open_output(out);
    for (const auto& [e, concept_text] : pairs) f << e << '\t' << concept_text << '\n';
    print_summary(summary.to_json());
  }
};

std::atomic<httplib::Server*> g_server{nullptr};

extern "C" void stop_server(int) {
  if (auto* s = g_server.load()) s->stop();
}

struct Serve {
  Common common;
  std::string candidates, dataset, kg, kg_format, log, host = "127.0.0.1";
  std::optional<std::size_t> sample;
  std::optional<int> port;

  void attach(CLI::App& root) {
    auto* app = root.add_subcommand("serve", "run the annotation HTTP service");
    common.attach(app);
    app->add_option("--candidates", candidates);
    app->add_option("--dataset", dataset);
    app->add_option("--kg", kg);
    app->add_option("--kg-format", kg_format);
    app->add_option("--log", log, "append-only annotation log")->required();
    app->add_option("--sample", sample, "number of tasks to sample");
    app->add_option("--host", host);
    app->add_option("--port", port, "overrides CONEX_PORT");
    app->callback([this] { run(); });
  }

  void run() const {
    const auto c = common.load();
    std::vector<conex::AnnotationTask> tasks;
    if (!fs::exists(log) || fs::file_size(log) == 0) {
      const auto kg_store = load_kg(require(kg, c, "kg", "--kg"), kg_format);
      const conex::ConceptIndex index(kg_store, c.mode);
      tasks = conex::sample_tasks(conex::read_corpus_file(require(dataset, c, "dataset", "--dataset")),
                                  conex::read_candidates_file(require(candidates, c, "candidates", "--candidates")),
                                  index, sample.value_or(c.annotation_sample), c.seeds.sample);
    }
    auto store = conex::AnnotationStore::open(log, tasks);
    httplib::Server server;
    conex::mount_annotation_api(server, store);
    const int p = port.value_or(conex::annotation_port_from_env());
    g_server = &server;
    std::signal(SIGINT, stop_server);
    std::signal(SIGTERM, stop_server);
    std::cerr << Json{{"event", "listening"}, {"host", host}, {"port", p}, {"progress", store.progress().to_json()}}
                     .dump()
              << std::endl;
    if (!server.listen(host, p)) {
      throw Error(ErrorKind::kInvalidArgument, "cannot listen on " + host + ":" + std::to_string(p));
    }
    g_server = nullptr;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"conex: multi-granular concept extraction"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  GenSynthetic gen;
  BuildDataset build;
  TrainHead train;
  Decode decode;
  Select select;
  Prune prune;
  Hearst hearst;
  Evaluate evaluate;
  BatchComplete batch;
  Serve serve;
  gen.attach(app);
  build.attach(app);
  train.attach(app);
  decode.attach(app);
  select.attach(app);
  prune.attach(app);
  hearst.attach(app);
  evaluate.attach(app);
  batch.attach(app);
  serve.attach(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error("usage", e.what(), kExitUsage);
    return kExitUsage;
  } catch (const Error& e) {
    const int code = exit_code_for(e.kind());
    report_error(conex::error_kind_name(e.kind()), e.what(), code);
    return code;
  } catch (const Json::exception& e) {
    report_error("schema_violation", e.what(), kExitSchema);
    return kExitSchema;
  } catch (const std::exception& e) {
    report_error("internal", e.what(), kExitInternal);
    return kExitInternal;
  }
  return kExitOk;
}
