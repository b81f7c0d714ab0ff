#pragma once

// Templated synthetic corpus with known gold concepts. Nested entities
// carry a three-level concept chain ("m1 m2 head", "m2 head", "head"); the
// rest carry a bare head. A fraction of gold pairs is withheld from the KG
// so that correct extractions can surface as new concepts.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "conex/corpus.hpp"
#include "conex/error.hpp"
#include "conex/evaluator.hpp"
#include "conex/rng.hpp"

namespace conex {

struct SyntheticConfig {
  std::size_t entities = 200;
  std::size_t vocabulary_size = 50;
  double nesting_rate = 0.5;
  double kg_coverage = 0.8;
  double second_concept_rate = 0.3;
  std::uint64_t seed = 5;

  void validate() const {
    if (entities == 0) throw Error(ErrorKind::kInvalidArgument, "entities must be >= 1");
    if (vocabulary_size < 6) throw Error(ErrorKind::kInvalidArgument, "vocabulary must hold >= 6 concepts");
    for (double r : {nesting_rate, kg_coverage, second_concept_rate}) {
      if (r < 0.0 || r > 1.0) throw Error(ErrorKind::kInvalidArgument, "rates must lie in [0,1]");
    }
  }
};

struct SyntheticAudit {
  std::size_t entities = 0;
  std::size_t nested_entities = 0;  // truth holds an overlapping pair
  std::size_t vocabulary = 0;
  std::size_t gold_pairs = 0;
  std::size_t kg_pairs = 0;

  double nested_fraction() const {
    return entities == 0 ? 0.0 : static_cast<double>(nested_entities) / static_cast<double>(entities);
  }

  Json to_json() const {
    return Json{{"entities", entities},
                {"nested_entities", nested_entities},
                {"nested_fraction", nested_fraction()},
                {"vocabulary", vocabulary},
                {"gold_pairs", gold_pairs},
                {"kg_pairs", kg_pairs}};
  }
};

struct SyntheticCorpus {
  std::vector<EntityRecord> records;  // gold_concepts = the KG's concepts
  KgStore kg;
  SystemOutput truth;  // every correct concept present in each abstract
  std::vector<std::string> vocabulary;
  SyntheticAudit audit;
};

namespace detail {

inline const std::vector<std::string>& synthetic_heads() {
  static const std::vector<std::string> k = {
      "company", "station",  "politician", "river",  "university", "museum",   "festival",
      "novel",   "vehicle",  "bridge",     "hospital", "airline",  "band",     "software",
      "stadium", "magazine", "painter",    "lake",   "library",    "ship"};
  return k;
}

inline const std::vector<std::string>& synthetic_modifiers() {
  static const std::vector<std::string> k = {
      "technology", "railway",     "multinational", "american",   "regional",  "private",
      "historic",   "electric",    "independent",   "national",   "modern",    "digital",
      "classical",  "international", "municipal",   "coastal",    "academic",  "commercial",
      "experimental", "medieval",  "alpine",        "tropical",   "urban",     "federal"};
  return k;
}

inline const std::vector<std::string>& synthetic_fillers() {
  static const std::vector<std::string> k = {
      "operates in the {m} sector",        "was established in the {m} era",
      "serves the northern region",        "is known for its long history",
      "attracts many visitors each year",  "works closely with the {m} council",
      "was renamed in the last decade",    "gained attention during the {m} boom"};
  return k;
}

inline std::string synthetic_name(Rng& rng) {
  static const std::vector<std::string> syl = {"ka", "lo", "ver", "min", "dra", "sel", "tu",
                                               "nor", "quin", "bar", "fen", "ri", "zo", "mal"};
  auto word = [&] {
    std::string w;
    const std::size_t parts = 2 + static_cast<std::size_t>(rng.below(2));
    for (std::size_t k = 0; k < parts; ++k) w += rng.pick(syl);
    w[0] = static_cast<char>(w[0] - 'a' + 'A');
    return w;
  };
  return word() + " " + word();
}

inline std::string article_for(const std::string& word) {
  return std::string("aeiou").find(word[0]) != std::string::npos ? "an" : "a";
}

}  // namespace detail

inline SyntheticCorpus generate_synthetic(const SyntheticConfig& config) {
  config.validate();
  Rng rng(config.seed);
  const auto& heads_all = detail::synthetic_heads();
  const auto& mods = detail::synthetic_modifiers();

  // Suffix-closed vocabulary: heads, "m head", "m' m head".
  const std::size_t v = config.vocabulary_size;
  const std::size_t n_heads = std::min(heads_all.size(), std::max<std::size_t>(2, v / 5));
  const std::size_t n_three = std::max<std::size_t>(1, (v * 3) / 10);
  const std::size_t n_two = v - n_heads - n_three;
  if (n_two < n_three) throw Error(ErrorKind::kInvalidArgument, "vocabulary too small for chains");

  std::vector<std::string> heads(heads_all.begin(), heads_all.begin() + static_cast<std::ptrdiff_t>(n_heads));
  std::vector<std::pair<std::string, std::string>> twos;  // (modifier, head)
  std::set<std::string> used;
  while (twos.size() < n_two) {
    const std::string m = rng.pick(mods), h = heads[twos.size() % heads.size()];
    if (used.insert(m + " " + h).second) twos.emplace_back(m, h);
  }
  std::vector<std::vector<std::string>> threes;  // [m1, m2, head]
  while (threes.size() < n_three) {
    const auto& [m2, h] = twos[threes.size() % twos.size()];
    const std::string m1 = rng.pick(mods);
    if (m1 == m2) continue;
    if (used.insert(m1 + " " + m2 + " " + h).second) threes.push_back({m1, m2, h});
  }

  SyntheticCorpus out;
  out.vocabulary = heads;
  for (const auto& [m, h] : twos) out.vocabulary.push_back(m + " " + h);
  for (const auto& t : threes) out.vocabulary.push_back(t[0] + " " + t[1] + " " + t[2]);
  out.truth.system_id = "truth";

  // Exactly round(rate * N) nested entities, positions shuffled.
  const auto nested_count = static_cast<std::size_t>(
      std::llround(config.nesting_rate * static_cast<double>(config.entities)));
  std::vector<std::uint8_t> nested(config.entities, 0);
  std::fill(nested.begin(), nested.begin() + static_cast<std::ptrdiff_t>(nested_count), 1);
  rng.shuffle(nested);

  std::set<std::string> names;
  for (std::size_t e = 0; e < config.entities; ++e) {
    std::string name;
    do {
      name = detail::synthetic_name(rng);
    } while (!names.insert(name).second);
    char id[16];
    std::snprintf(id, sizeof(id), "E%05zu", e);

    std::vector<std::string> gold;
    std::string phrase;
    if (nested[e]) {
      const auto& t = threes[static_cast<std::size_t>(rng.below(threes.size()))];
      phrase = t[0] + " " + t[1] + " " + t[2];
      gold = {phrase, t[1] + " " + t[2], t[2]};
    } else {
      phrase = rng.pick(heads);
      gold = {phrase};
    }
    std::string filler = rng.pick(detail::synthetic_fillers());
    if (auto at = filler.find("{m}"); at != std::string::npos) filler.replace(at, 3, rng.pick(mods));
    std::string text = name + " is " + detail::article_for(phrase) + " " + phrase + " that " + filler + ".";
    if (rng.bernoulli(config.second_concept_rate)) {
      std::string other;
      do {
        other = rng.pick(heads);
      } while (std::find(gold.begin(), gold.end(), other) != gold.end() ||
               (phrase.size() >= other.size() &&
                phrase.compare(phrase.size() - other.size(), other.size(), other) == 0));
      text += " It is also listed as " + detail::article_for(other) + " " + other + ".";
      gold.push_back(other);
    }

    std::vector<std::string> in_kg;
    for (const auto& g : gold) {
      if (rng.bernoulli(config.kg_coverage)) {
        out.kg.add(id, g);
        in_kg.push_back(g);
      }
    }
    out.truth.concepts[id] = gold;
    out.records.push_back(make_record(id, name, text, LanguageMode::kWord, in_kg));
    out.audit.gold_pairs += gold.size();
    out.audit.kg_pairs += in_kg.size();
  }

  out.audit.entities = config.entities;
  out.audit.vocabulary = out.vocabulary.size();
  for (const auto& [entity, gold] : out.truth.concepts) {
    std::map<std::string, std::vector<std::string>> one{{entity, gold}};
    if (oc_ratio(one, LanguageMode::kWord) > 0.0) ++out.audit.nested_entities;
  }
  return out;
}

/// Judgments implied by a truth output: every (entity, concept) in `pairs`
/// is correct iff the truth lists it.
inline JudgmentStore judgments_from_truth(const SystemOutput& truth,
                                          const std::vector<SystemOutput>& outputs,
                                          LanguageMode mode) {
  JudgmentStore store(mode);
  for (const auto& out : outputs) {
    for (const auto& [entity, list] : out.concepts) {
      std::set<std::string> keys;
      if (auto it = truth.concepts.find(entity); it != truth.concepts.end()) {
        for (const auto& c : it->second) keys.insert(surface_key(c, mode));
      }
      for (const auto& c : list) {
        store.set(entity, c, keys.count(surface_key(c, mode)) ? Verdict::kCorrect : Verdict::kIncorrect);
      }
    }
  }
  return store;
}

}  // namespace conex
