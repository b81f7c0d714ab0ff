#pragma once

// KG dumps, entity records, weak span labels, and reproducible splits.

#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "conex/error.hpp"
#include "conex/rng.hpp"
#include "conex/text.hpp"

namespace conex {

using Json = nlohmann::json;

/// Entity -> concept sets. Immutable once loaded; share freely.
class KgStore {
 public:
  /// Adds one instanceOf pair. Returns false for an empty concept.
  bool add(const std::string& entity, std::string_view concept_text) {
    std::string norm = normalize_whitespace(concept_text);
    if (norm.empty()) return false;
    entity_to_concepts_[entity].insert(norm);
    vocabulary_.insert(std::move(norm));
    return true;
  }

  const std::map<std::string, std::set<std::string>>& entity_to_concepts()
      const {
    return entity_to_concepts_;
  }
  const std::set<std::string>& concept_vocabulary() const { return vocabulary_; }

  std::size_t entity_count() const { return entity_to_concepts_.size(); }

  const std::set<std::string>& concepts_of(const std::string& entity) const {
    static const std::set<std::string> kEmpty;
    auto it = entity_to_concepts_.find(entity);
    return it == entity_to_concepts_.end() ? kEmpty : it->second;
  }

 private:
  std::map<std::string, std::set<std::string>> entity_to_concepts_;
  std::set<std::string> vocabulary_;
};

enum class KgFormat { kTsv, kJsonl };

inline KgFormat parse_kg_format(std::string_view name) {
  if (name == "tsv") return KgFormat::kTsv;
  if (name == "jsonl") return KgFormat::kJsonl;
  throw Error(ErrorKind::kInvalidArgument,
              "unknown kg format '" + std::string(name) + "'");
}

inline KgStore load_kg_dump(std::istream& in, KgFormat format) {
  KgStore kg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (normalize_whitespace(line).empty()) continue;
    if (format == KgFormat::kTsv) {
      const auto tab = line.find('\t');
      if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos) {
        throw ParseError(lineno, "expected entity<TAB>concept");
      }
      const std::string entity = normalize_whitespace(line.substr(0, tab));
      if (entity.empty()) throw ParseError(lineno, "empty entity");
      if (!kg.add(entity, line.substr(tab + 1))) {
        throw ParseError(lineno, "empty concept");
      }
    } else {
      Json obj;
      try {
        obj = Json::parse(line);
      } catch (const Json::exception& e) {
        throw ParseError(lineno, std::string("invalid json: ") + e.what());
      }
      if (!obj.is_object() || !obj.contains("entity") ||
          !obj["entity"].is_string() || !obj.contains("concepts") ||
          !obj["concepts"].is_array()) {
        throw ParseError(lineno, "expected {\"entity\": str, \"concepts\": [str]}");
      }
      const std::string entity = normalize_whitespace(obj["entity"].get<std::string>());
      if (entity.empty()) throw ParseError(lineno, "empty entity");
      for (const auto& c : obj["concepts"]) {
        if (!c.is_string() || !kg.add(entity, c.get<std::string>())) {
          throw ParseError(lineno, "concept must be a non-empty string");
        }
      }
    }
  }
  return kg;
}

inline void write_kg_tsv(std::ostream& out, const KgStore& kg) {
  for (const auto& [entity, concepts] : kg.entity_to_concepts()) {
    for (const auto& c : concepts) out << entity << '\t' << c << '\n';
  }
}

/// KG lookups by surface_key for one language mode. Backs selector
/// feature D, the pruner's vocabulary check, and EC classification.
class ConceptIndex {
 public:
  ConceptIndex() = default;
  ConceptIndex(const KgStore& kg, LanguageMode mode) : mode_(mode) {
    for (const auto& [entity, concepts] : kg.entity_to_concepts()) {
      auto& keys = by_entity_[entity];
      for (const auto& c : concepts) {
        std::string key = surface_key(c, mode);
        keys.insert(key);
        vocabulary_.insert(std::move(key));
      }
    }
  }

  LanguageMode mode() const { return mode_; }

  bool in_vocabulary(std::string_view surface) const {
    return vocabulary_.count(surface_key(surface, mode_)) > 0;
  }

  bool entity_has(const std::string& entity, std::string_view surface) const {
    auto it = by_entity_.find(entity);
    return it != by_entity_.end() &&
           it->second.count(surface_key(surface, mode_)) > 0;
  }

 private:
  LanguageMode mode_ = LanguageMode::kWord;
  std::set<std::string> vocabulary_;
  std::map<std::string, std::set<std::string>> by_entity_;
};

struct EntityRecord {
  std::string entity_id;
  std::string surface_name;
  std::string abstract_text;
  Tokens tokens;
  LanguageMode mode = LanguageMode::kWord;
  std::vector<std::string> gold_concepts;
};

/// Builds a record, tokenizing the abstract. Gold concepts are normalized,
/// deduplicated, and kept in first-seen order.
inline EntityRecord make_record(std::string entity_id, std::string name,
                                std::string abstract_text, LanguageMode mode,
                                const std::vector<std::string>& gold = {}) {
  EntityRecord r;
  r.entity_id = std::move(entity_id);
  r.surface_name = std::move(name);
  r.tokens = tokenize(abstract_text, mode);
  r.abstract_text = std::move(abstract_text);
  r.mode = mode;
  std::set<std::string> seen;
  for (const auto& g : gold) {
    std::string norm = normalize_whitespace(g);
    if (!norm.empty() && seen.insert(norm).second) {
      r.gold_concepts.push_back(std::move(norm));
    }
  }
  return r;
}

struct WeakLabels {
  std::vector<std::uint8_t> start_flags;
  std::vector<std::uint8_t> end_flags;
  std::set<std::pair<std::size_t, std::size_t>> span_flags;

  bool empty() const { return span_flags.empty(); }
  std::size_t size() const { return start_flags.size(); }
};

inline WeakLabels empty_labels(std::size_t n) {
  return WeakLabels{std::vector<std::uint8_t>(n, 0),
                    std::vector<std::uint8_t>(n, 0), {}};
}

/// Marks every occurrence of every concept in `concepts` that appears as a
/// contiguous token run of the record (lowercased in word mode).
inline WeakLabels build_weak_labels(const EntityRecord& record,
                                    const std::vector<std::string>& concepts) {
  WeakLabels labels = empty_labels(record.tokens.size());
  Tokens hay = record.tokens;
  if (record.mode == LanguageMode::kWord) {
    for (auto& t : hay) t = ascii_lower(t);
  }
  for (const auto& concept_text : concepts) {
    if (normalize_whitespace(concept_text).empty()) continue;
    const Tokens needle = match_tokens(concept_text, record.mode);
    if (needle.size() > hay.size()) continue;
    for (std::size_t i = 0; i + needle.size() <= hay.size(); ++i) {
      if (std::equal(needle.begin(), needle.end(), hay.begin() + static_cast<std::ptrdiff_t>(i))) {
        const std::size_t j = i + needle.size() - 1;
        labels.span_flags.emplace(i, j);
        labels.start_flags[i] = 1;
        labels.end_flags[j] = 1;
      }
    }
  }
  return labels;
}

inline WeakLabels build_weak_labels(const EntityRecord& record) {
  return build_weak_labels(record, record.gold_concepts);
}

inline WeakLabels build_weak_labels(const EntityRecord& record,
                                    const KgStore& kg) {
  const auto& concepts = kg.concepts_of(record.entity_id);
  return build_weak_labels(record,
                           std::vector<std::string>(concepts.begin(), concepts.end()));
}

struct DatasetSplit {
  std::vector<EntityRecord> train;
  std::vector<EntityRecord> validation;
  std::vector<EntityRecord> test;
  std::uint64_t seed = 0;
};

/// Shuffles with `seed`, takes `test_count` records as test, and divides
/// the rest train:validation by `train_ratio` (rounded to nearest).
inline DatasetSplit split_dataset(std::vector<EntityRecord> records,
                                  std::uint64_t seed, std::size_t test_count,
                                  double train_ratio) {
  if (!(train_ratio > 0.0 && train_ratio < 1.0)) {
    throw Error(ErrorKind::kInvalidArgument, "train ratio must lie in (0,1)");
  }
  if (records.size() < test_count) {
    throw Error(ErrorKind::kInvalidArgument,
                "too few records: need at least " + std::to_string(test_count) +
                    ", got " + std::to_string(records.size()));
  }
  Rng rng(seed);
  rng.shuffle(records);
  DatasetSplit split;
  split.seed = seed;
  const std::size_t rest = records.size() - test_count;
  const auto train_count = static_cast<std::size_t>(
      std::llround(static_cast<double>(rest) * train_ratio));
  auto it = records.begin();
  auto take = [&](std::vector<EntityRecord>& dst, std::size_t n) {
    dst.assign(std::make_move_iterator(it),
               std::make_move_iterator(it + static_cast<std::ptrdiff_t>(n)));
    it += static_cast<std::ptrdiff_t>(n);
  };
  take(split.test, test_count);
  take(split.train, train_count);
  take(split.validation, rest - train_count);
  return split;
}

// ---------------------------------------------------------------------------
// File formats

inline Json record_to_json(const EntityRecord& r) {
  return Json{{"entity_id", r.entity_id},
              {"name", r.surface_name},
              {"abstract", r.abstract_text},
              {"language_mode", mode_name(r.mode)},
              {"gold_concepts", r.gold_concepts}};
}

inline EntityRecord record_from_json(const Json& obj) {
  auto str = [&](const char* key) -> std::string {
    if (!obj.contains(key) || !obj[key].is_string()) {
      throw Error(ErrorKind::kSchema, std::string("missing string field '") + key + "'");
    }
    return obj[key].get<std::string>();
  };
  std::vector<std::string> gold;
  if (obj.contains("gold_concepts")) {
    if (!obj["gold_concepts"].is_array()) {
      throw Error(ErrorKind::kSchema, "gold_concepts must be an array");
    }
    for (const auto& g : obj["gold_concepts"]) {
      if (!g.is_string()) throw Error(ErrorKind::kSchema, "gold concept must be a string");
      gold.push_back(g.get<std::string>());
    }
  }
  return make_record(str("entity_id"), str("name"), str("abstract"),
                     parse_mode(str("language_mode")), gold);
}

/// Parses one JSONL stream, reporting failures with their line number.
template <class Fn>
void for_each_jsonl(std::istream& in, Fn&& fn) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (normalize_whitespace(line).empty()) continue;
    Json obj;
    try {
      obj = Json::parse(line);
    } catch (const Json::exception& e) {
      throw ParseError(lineno, std::string("invalid json: ") + e.what());
    }
    try {
      fn(obj);
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw Error(e.kind(), "line " + std::to_string(lineno) + ": " + e.what());
    } catch (const Json::exception& e) {
      throw Error(ErrorKind::kSchema, "line " + std::to_string(lineno) + ": " + e.what());
    }
  }
}

inline std::vector<EntityRecord> read_corpus(std::istream& in) {
  std::vector<EntityRecord> out;
  for_each_jsonl(in, [&](const Json& obj) { out.push_back(record_from_json(obj)); });
  return out;
}

inline void write_corpus(std::ostream& out, const std::vector<EntityRecord>& records) {
  for (const auto& r : records) out << record_to_json(r).dump() << '\n';
}

inline Json split_manifest(const DatasetSplit& split) {
  auto ids = [](const std::vector<EntityRecord>& rs) {
    Json arr = Json::array();
    for (const auto& r : rs) arr.push_back(r.entity_id);
    return arr;
  };
  return Json{{"seed", split.seed},
              {"train", ids(split.train)},
              {"validation", ids(split.validation)},
              {"test", ids(split.test)}};
}

/// Rebuilds a split from a manifest and the records it references.
inline DatasetSplit split_from_manifest(const Json& manifest,
                                        const std::vector<EntityRecord>& records) {
  std::map<std::string, const EntityRecord*> by_id;
  for (const auto& r : records) by_id[r.entity_id] = &r;
  DatasetSplit split;
  if (!manifest.contains("seed") || !manifest["seed"].is_number_unsigned()) {
    throw Error(ErrorKind::kSchema, "split manifest lacks an unsigned seed");
  }
  split.seed = manifest["seed"].get<std::uint64_t>();
  auto fill = [&](const char* key, std::vector<EntityRecord>& dst) {
    if (!manifest.contains(key) || !manifest[key].is_array()) {
      throw Error(ErrorKind::kSchema, std::string("split manifest lacks '") + key + "'");
    }
    for (const auto& id : manifest[key]) {
      auto it = by_id.find(id.get<std::string>());
      if (it == by_id.end()) {
        throw Error(ErrorKind::kSchema,
                    "split manifest references unknown entity " + id.get<std::string>());
      }
      dst.push_back(*it->second);
    }
  };
  fill("train", split.train);
  fill("validation", split.validation);
  fill("test", split.test);
  return split;
}

}  // namespace conex
