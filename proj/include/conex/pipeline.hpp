#pragma once

// Pipeline stages over in-memory data and the documented file formats.
// Each stage is usable on its own; the CLI is a thin layer over these.

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "conex/corpus.hpp"
#include "conex/embedding.hpp"
#include "conex/error.hpp"
#include "conex/evaluator.hpp"
#include "conex/hearst.hpp"
#include "conex/pointer_head.hpp"
#include "conex/pruner.hpp"
#include "conex/rng.hpp"
#include "conex/selector.hpp"
#include "conex/span_decoder.hpp"
#include "conex/synthetic.hpp"

namespace conex {

// ---------------------------------------------------------------------------
// Configuration

struct SeedBundle {
  std::uint64_t split = 1;
  std::uint64_t train = 2;
  std::uint64_t forest = 3;
  std::uint64_t sample = 4;
  std::uint64_t synthetic = 5;

  /// Every stream derived from a single base seed.
  static SeedBundle from_base(std::uint64_t base) {
    return {derive_seed(base, 1), derive_seed(base, 2), derive_seed(base, 3), derive_seed(base, 4),
            derive_seed(base, 5)};
  }
};

struct PipelineConfig {
  LanguageMode mode = LanguageMode::kWord;
  SeedBundle seeds;
  std::size_t test_count = 500;
  double train_ratio = 0.9;
  EmbedderConfig embedder;
  std::string question = std::string(QuestionTemplate::kDefault);
  TrainConfig train;
  DecodeConfig decode;
  ForestConfig forest;
  std::size_t label_sample = 1000;
  std::size_t annotation_sample = 1000;
  SyntheticConfig synthetic;
  std::map<std::string, std::string> paths;  // free-form named paths

  std::optional<std::string> path(const std::string& key) const {
    auto it = paths.find(key);
    if (it == paths.end()) return std::nullopt;
    return it->second;
  }
};

inline PipelineConfig config_from_json(const Json& j, const std::filesystem::path& base_dir = {}) {
  PipelineConfig c;
  try {
    if (j.contains("language_mode")) c.mode = parse_mode(j.at("language_mode").get<std::string>());
    if (j.contains("seeds")) {
      const Json& s = j.at("seeds");
      c.seeds.split = s.value("split", c.seeds.split);
      c.seeds.train = s.value("train", c.seeds.train);
      c.seeds.forest = s.value("forest", c.seeds.forest);
      c.seeds.sample = s.value("sample", c.seeds.sample);
      c.seeds.synthetic = s.value("synthetic", c.seeds.synthetic);
    }
    if (j.contains("split")) {
      c.test_count = j.at("split").value("test_count", c.test_count);
      c.train_ratio = j.at("split").value("train_ratio", c.train_ratio);
    }
    if (j.contains("embedder")) {
      c.embedder.dim = j.at("embedder").value("dim", c.embedder.dim);
      c.embedder.window = j.at("embedder").value("window", c.embedder.window);
    }
    c.question = j.value("question", c.question);
    if (j.contains("train")) {
      const Json& t = j.at("train");
      c.train.alpha = t.value("alpha", c.train.alpha);
      c.train.beta = t.value("beta", c.train.beta);
      c.train.learning_rate = t.value("learning_rate", c.train.learning_rate);
      c.train.batch_size = t.value("batch_size", c.train.batch_size);
      c.train.epochs = t.value("epochs", c.train.epochs);
      c.train.adam_beta1 = t.value("adam_beta1", c.train.adam_beta1);
      c.train.adam_beta2 = t.value("adam_beta2", c.train.adam_beta2);
      c.train.adam_epsilon = t.value("adam_epsilon", c.train.adam_epsilon);
      c.train.max_span_length = t.value("max_span_length", c.train.max_span_length);
    }
    if (j.contains("decode")) {
      const Json& d = j.at("decode");
      c.decode.threshold = d.value("threshold", c.decode.threshold);
      c.decode.max_span_length = d.value("max_span_length", c.decode.max_span_length);
      if (d.contains("top_k") && !d.at("top_k").is_null()) c.decode.top_k = d.at("top_k").get<std::size_t>();
    }
    if (j.contains("forest")) {
      const Json& f = j.at("forest");
      c.forest.tree_count = f.value("tree_count", c.forest.tree_count);
      c.forest.max_depth = f.value("max_depth", c.forest.max_depth);
      c.forest.min_leaf = f.value("min_leaf", c.forest.min_leaf);
      c.forest.features_per_split = f.value("features_per_split", c.forest.features_per_split);
      c.forest.bootstrap = f.value("bootstrap", c.forest.bootstrap);
    }
    c.label_sample = j.value("label_sample", c.label_sample);
    c.annotation_sample = j.value("annotation_sample", c.annotation_sample);
    if (j.contains("synthetic")) {
      const Json& s = j.at("synthetic");
      c.synthetic.entities = s.value("entities", c.synthetic.entities);
      c.synthetic.vocabulary_size = s.value("vocabulary_size", c.synthetic.vocabulary_size);
      c.synthetic.nesting_rate = s.value("nesting_rate", c.synthetic.nesting_rate);
      c.synthetic.kg_coverage = s.value("kg_coverage", c.synthetic.kg_coverage);
      c.synthetic.second_concept_rate = s.value("second_concept_rate", c.synthetic.second_concept_rate);
    }
    if (j.contains("paths")) {
      for (const auto& [key, value] : j.at("paths").items()) {
        std::filesystem::path p = value.get<std::string>();
        if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
        c.paths[key] = p.string();
      }
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::kSchema, std::string("malformed pipeline config: ") + e.what());
  }
  c.train.seed = c.seeds.train;
  c.forest.seed = c.seeds.forest;
  c.synthetic.seed = c.seeds.synthetic;
  return c;
}

// ---------------------------------------------------------------------------
// File helpers

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kMissingInput, "cannot open input '" + path + "'");
  return in;
}

inline std::ofstream open_output(const std::string& path) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kInvalidArgument, "cannot write '" + path + "'");
  return out;
}

inline Json read_json_file(const std::string& path) {
  auto in = open_input(path);
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::kSchema, "invalid json in '" + path + "': " + e.what());
  }
}

inline void write_json_file(const std::string& path, const Json& j) {
  auto out = open_output(path);
  out << j.dump(2) << '\n';
}

inline KgStore read_kg_file(const std::string& path, KgFormat format) {
  auto in = open_input(path);
  return load_kg_dump(in, format);
}

inline KgFormat guess_kg_format(const std::string& path) {
  return std::filesystem::path(path).extension() == ".jsonl" ? KgFormat::kJsonl : KgFormat::kTsv;
}

inline std::vector<EntityRecord> read_corpus_file(const std::string& path) {
  auto in = open_input(path);
  return read_corpus(in);
}

inline std::vector<RecordCandidates> read_candidates_file(const std::string& path) {
  auto in = open_input(path);
  return read_candidates(in);
}

// ---------------------------------------------------------------------------
// Stages

/// Replaces each record's gold concepts with its KG concepts (sorted).
inline std::vector<EntityRecord> attach_kg_concepts(std::vector<EntityRecord> records, const KgStore& kg) {
  for (auto& r : records) {
    const auto& cs = kg.concepts_of(r.entity_id);
    r.gold_concepts.assign(cs.begin(), cs.end());
  }
  return records;
}

/// Records selected by a manifest subset name ("all", "train", "validation", "test").
inline std::vector<EntityRecord> select_subset(const std::vector<EntityRecord>& records,
                                               const std::optional<Json>& manifest,
                                               const std::string& subset) {
  if (subset == "all") return records;
  if (!manifest) throw Error(ErrorKind::kMissingInput, "subset '" + subset + "' needs a split manifest");
  const DatasetSplit split = split_from_manifest(*manifest, records);
  if (subset == "train") return split.train;
  if (subset == "validation") return split.validation;
  if (subset == "test") return split.test;
  throw Error(ErrorKind::kInvalidArgument, "unknown subset '" + subset + "'");
}

inline std::vector<RecordCandidates> decode_records(const std::vector<EntityRecord>& records,
                                                    const HeadModel& head, const DecodeConfig& config) {
  std::vector<RecordCandidates> out;
  for (const auto& r : records) {
    out.push_back({r.entity_id, decode(head.predict(r), r, config)});
  }
  return out;
}

inline void write_candidates(std::ostream& out, const std::vector<RecordCandidates>& cands) {
  for (const auto& rc : cands) out << candidates_to_json(rc).dump() << '\n';
}

/// Candidate dump viewed as a system output (fixed-threshold truncation).
inline SystemOutput candidates_as_output(const std::vector<RecordCandidates>& cands,
                                         const std::string& system_id) {
  SystemOutput so;
  so.system_id = system_id;
  for (const auto& rc : cands) {
    auto& dst = so.concepts[rc.entity_id];
    for (const auto& s : rc.spans) dst.push_back(s.surface);
  }
  return so;
}

/// Uniformly samples `count` candidates (fixed seed) and labels them keep
/// iff the truth lists the surface for that entity.
inline std::vector<LabeledExample> auto_label(const std::vector<RecordCandidates>& cands,
                                              const SystemOutput& truth, const ConceptIndex& kg,
                                              std::size_t count, std::uint64_t seed) {
  std::vector<std::pair<std::size_t, std::size_t>> pool;
  for (std::size_t r = 0; r < cands.size(); ++r) {
    for (std::size_t s = 0; s < cands[r].spans.size(); ++s) pool.emplace_back(r, s);
  }
  Rng rng(seed);
  rng.shuffle(pool);
  if (pool.size() > count) pool.resize(count);
  const JudgmentStore judged =
      judgments_from_truth(truth, {candidates_as_output(cands, "candidates")}, kg.mode());
  std::vector<LabeledExample> out;
  for (const auto& [r, s] : pool) {
    const auto& rc = cands[r];
    const auto& span = rc.spans[s];
    LabeledExample ex;
    ex.features = extract_features(span, rc.spans, kg);
    ex.label = judged.get(rc.entity_id, span.surface) == Verdict::kCorrect ? Label::kKeep : Label::kDrop;
    ex.provenance = rc.entity_id + ":" + std::to_string(span.start) + "-" + std::to_string(span.end);
    out.push_back(std::move(ex));
  }
  return out;
}

struct SelectedConcept {
  std::string surface;
  double vote = 0.0;
  std::size_t start = 0;
  std::size_t end = 0;
  double confidence = 0.0;
};

struct RecordSelection {
  std::string entity_id;
  std::vector<SelectedConcept> concepts;
};

inline std::vector<RecordSelection> apply_selector(const std::vector<RecordCandidates>& cands,
                                                   const RandomForest& forest, const ConceptIndex& kg) {
  std::vector<RecordSelection> out;
  for (const auto& rc : cands) {
    RecordSelection sel{rc.entity_id, {}};
    for (const auto& span : rc.spans) {
      const Prediction p = forest.predict(extract_features(span, rc.spans, kg));
      if (p.label == Label::kKeep) {
        sel.concepts.push_back({span.surface, p.keep_fraction, span.start, span.end, span.confidence});
      }
    }
    out.push_back(std::move(sel));
  }
  return out;
}

inline void write_selection(std::ostream& out, const std::vector<RecordSelection>& sel) {
  for (const auto& rs : sel) {
    Json concepts = Json::array();
    for (const auto& c : rs.concepts) {
      concepts.push_back({{"surface", c.surface}, {"vote", c.vote}, {"i", c.start}, {"j", c.end}, {"cs", c.confidence}});
    }
    out << Json{{"entity_id", rs.entity_id}, {"concepts", std::move(concepts)}}.dump() << '\n';
  }
}

inline std::vector<RecordSelection> read_selection(std::istream& in) {
  std::vector<RecordSelection> out;
  for_each_jsonl(in, [&](const Json& obj) {
    RecordSelection rs;
    rs.entity_id = obj.at("entity_id").get<std::string>();
    for (const auto& c : obj.at("concepts")) {
      SelectedConcept sc;
      sc.surface = c.at("surface").get<std::string>();
      sc.vote = c.value("vote", 1.0);
      sc.start = c.value("i", std::size_t{0});
      sc.end = c.value("j", std::size_t{0});
      sc.confidence = c.value("cs", 0.0);
      rs.concepts.push_back(std::move(sc));
    }
    out.push_back(std::move(rs));
  });
  return out;
}

struct PruneStageResult {
  SystemOutput output;
  std::vector<std::pair<std::string, PruneDecision>> audit;  // (entity, decision)
};

inline PruneStageResult prune_selection(const std::vector<RecordSelection>& selection, const RuleSet& rules,
                                        const ConceptIndex& kg, const std::string& system_id) {
  PruneStageResult out;
  out.output.system_id = system_id;
  for (const auto& rs : selection) {
    std::vector<ScoredConcept> scored;
    for (const auto& c : rs.concepts) scored.push_back({c.surface, c.vote});
    PruneResult pr = prune(scored, rules, kg);
    auto& dst = out.output.concepts[rs.entity_id];
    for (const auto& k : pr.kept) dst.push_back(k.surface);
    for (auto& d : pr.decisions) out.audit.emplace_back(rs.entity_id, std::move(d));
  }
  return out;
}

inline SystemOutput hearst_output(const std::vector<EntityRecord>& records,
                                  const std::vector<HearstMatcher>& matchers, const std::string& system_id) {
  SystemOutput so;
  so.system_id = system_id;
  for (const auto& r : records) so.concepts[r.entity_id] = hearst_match(r, matchers);
  return so;
}

/// Restricts an output to the given entities, listing empty ones too.
inline SystemOutput restrict_output(const SystemOutput& so, const std::set<std::string>& entities) {
  SystemOutput out;
  out.system_id = so.system_id;
  for (const auto& e : entities) {
    auto it = so.concepts.find(e);
    out.concepts[e] = it == so.concepts.end() ? std::vector<std::string>{} : it->second;
  }
  return out;
}

struct BatchSummary {
  std::size_t entities = 0;
  std::size_t candidates = 0;
  std::size_t selected = 0;
  std::size_t kept = 0;
  std::size_t existing = 0;
  std::size_t new_relations = 0;

  Json to_json() const {
    return Json{{"entities", entities}, {"candidates", candidates}, {"selected", selected},
                {"kept", kept},         {"existing", existing},     {"new_relations", new_relations}};
  }
};

/// Full extraction over a corpus; returns new (entity, concept) pairs not
/// already in the KG.
inline std::vector<std::pair<std::string, std::string>> batch_complete(
    const std::vector<EntityRecord>& records, const HeadModel& head, const RandomForest& forest,
    const RuleSet& rules, const ConceptIndex& kg, const DecodeConfig& decode_config, BatchSummary& summary) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& r : records) {
    const std::vector<RecordCandidates> cands = {{r.entity_id, decode(head.predict(r), r, decode_config)}};
    const auto selection = apply_selector(cands, forest, kg);
    const auto pruned = prune_selection(selection, rules, kg, "batch");
    ++summary.entities;
    summary.candidates += cands[0].spans.size();
    summary.selected += selection[0].concepts.size();
    for (const auto& c : pruned.output.concepts.at(r.entity_id)) {
      ++summary.kept;
      if (kg.entity_has(r.entity_id, c)) {
        ++summary.existing;
      } else {
        ++summary.new_relations;
        out.emplace_back(r.entity_id, c);
      }
    }
  }
  return out;
}

}  // namespace conex
