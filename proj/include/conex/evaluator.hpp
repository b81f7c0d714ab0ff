#pragma once

// Evaluation against a KG plus human judgments: EC/NC accounting, concept
// lengths, overlap ratio, precision, pooled relative recall, relative F1.
// Ratios with a zero denominator are absent, never 0.

#include <cmath>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "conex/corpus.hpp"
#include "conex/csv.hpp"
#include "conex/error.hpp"
#include "conex/text.hpp"

namespace conex {

struct SystemOutput {
  std::string system_id;
  std::map<std::string, std::vector<std::string>> concepts;  // entity -> concepts
};

enum class Verdict { kCorrect, kIncorrect };

inline Verdict parse_verdict(std::string_view s) {
  if (s == "correct") return Verdict::kCorrect;
  if (s == "incorrect") return Verdict::kIncorrect;
  throw Error(ErrorKind::kSchema, "verdict must be correct or incorrect, got '" + std::string(s) + "'");
}

inline std::string_view verdict_name(Verdict v) {
  return v == Verdict::kCorrect ? "correct" : "incorrect";
}

/// (entity, concept key) -> verdict.
class JudgmentStore {
 public:
  explicit JudgmentStore(LanguageMode mode = LanguageMode::kWord) : mode_(mode) {}

  void set(const std::string& entity, std::string_view concept_text, Verdict v) {
    verdicts_[{entity, surface_key(concept_text, mode_)}] = v;
  }

  std::optional<Verdict> get(const std::string& entity, std::string_view concept_text) const {
    auto it = verdicts_.find({entity, surface_key(concept_text, mode_)});
    if (it == verdicts_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t size() const { return verdicts_.size(); }
  LanguageMode mode() const { return mode_; }

 private:
  LanguageMode mode_;
  std::map<std::pair<std::string, std::string>, Verdict> verdicts_;
};

/// Judgments CSV: entity_id,concept,verdict (header optional).
inline JudgmentStore read_judgments(std::istream& in, LanguageMode mode) {
  JudgmentStore store(mode);
  bool first = true;
  for (const auto& row : csv::read(in)) {
    if (first) {
      first = false;
      if (!row.fields.empty() && row.fields[0] == "entity_id") continue;
    }
    if (row.fields.size() != 3) throw ParseError(row.line, "expected entity_id,concept,verdict");
    try {
      store.set(row.fields[0], row.fields[1], parse_verdict(row.fields[2]));
    } catch (const Error& e) {
      throw ParseError(row.line, e.what());
    }
  }
  return store;
}

enum class ConceptClass { kExisting, kNew, kWrong };

struct ClassifiedConcept {
  std::string entity_id;
  std::string concept_text;
  ConceptClass cls = ConceptClass::kWrong;
};

/// Deduplicated (by surface key) concepts per entity, first spelling kept.
inline std::map<std::string, std::vector<std::string>> unique_concepts(const SystemOutput& output,
                                                                       LanguageMode mode) {
  std::map<std::string, std::vector<std::string>> out;
  for (const auto& [entity, list] : output.concepts) {
    std::set<std::string> seen;
    auto& dst = out[entity];
    for (const auto& c : list) {
      const std::string key = surface_key(c, mode);
      if (!key.empty() && seen.insert(key).second) dst.push_back(normalize_whitespace(c));
    }
  }
  return out;
}

/// EC if the KG already links the concept to the entity; otherwise NC when
/// judged correct, wrong when judged incorrect. A non-EC concept without a
/// judgment is an error naming the pair.
inline std::vector<ClassifiedConcept> classify_concepts(const SystemOutput& output,
                                                        const ConceptIndex& kg,
                                                        const JudgmentStore& judgments) {
  std::vector<ClassifiedConcept> out;
  for (const auto& [entity, list] : unique_concepts(output, kg.mode())) {
    for (const auto& c : list) {
      ClassifiedConcept cc{entity, c, ConceptClass::kWrong};
      if (kg.entity_has(entity, c)) {
        cc.cls = ConceptClass::kExisting;
      } else {
        const auto v = judgments.get(entity, c);
        if (!v) {
          throw Error(ErrorKind::kMissingJudgment,
                      "missing judgment for (" + entity + ", " + c + ")");
        }
        cc.cls = *v == Verdict::kCorrect ? ConceptClass::kNew : ConceptClass::kWrong;
      }
      out.push_back(std::move(cc));
    }
  }
  return out;
}

inline std::size_t concept_length(std::string_view concept_text, LanguageMode mode) {
  return unit_length(concept_text, mode);
}

inline bool is_contiguous_subsequence(const Tokens& inner, const Tokens& outer) {
  return contains_run(outer, inner);
}

/// Fraction of concepts that take part in at least one same-entity pair
/// where one's token sequence is a contiguous run of the other's.
inline double oc_ratio(const std::map<std::string, std::vector<std::string>>& per_entity,
                       LanguageMode mode) {
  std::size_t total = 0, overlapped = 0;
  for (const auto& [entity, list] : per_entity) {
    std::vector<Tokens> toks;
    for (const auto& c : list) toks.push_back(match_tokens(c, mode));
    for (std::size_t a = 0; a < toks.size(); ++a) {
      ++total;
      for (std::size_t b = 0; b < toks.size(); ++b) {
        if (a != b && (is_contiguous_subsequence(toks[a], toks[b]) ||
                       is_contiguous_subsequence(toks[b], toks[a]))) {
          ++overlapped;
          break;
        }
      }
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(overlapped) / static_cast<double>(total);
}

inline std::optional<double> precision_from_counts(std::size_t correct, std::size_t total) {
  if (total == 0) return std::nullopt;
  return static_cast<double>(correct) / static_cast<double>(total);
}

inline std::optional<double> precision(const std::vector<ClassifiedConcept>& classified) {
  std::size_t correct = 0;
  for (const auto& c : classified) correct += c.cls != ConceptClass::kWrong ? 1 : 0;
  return precision_from_counts(correct, classified.size());
}

inline std::optional<double> relative_f1(std::optional<double> p, std::optional<double> r) {
  if (!p || !r) return std::nullopt;
  if (*p + *r == 0.0) return 0.0;
  return 2.0 * *p * *r / (*p + *r);
}

using NcPair = std::pair<std::string, std::string>;  // (entity, concept key)

inline std::set<NcPair> nc_pairs(const std::vector<ClassifiedConcept>& classified, LanguageMode mode) {
  std::set<NcPair> out;
  for (const auto& c : classified) {
    if (c.cls == ConceptClass::kNew) out.emplace(c.entity_id, surface_key(c.concept_text, mode));
  }
  return out;
}

/// Per system: |own NC pairs| / |union of NC pairs over all systems|.
inline std::vector<std::optional<double>> relative_recall(const std::vector<std::set<NcPair>>& per_system) {
  std::set<NcPair> pool;
  for (const auto& s : per_system) pool.insert(s.begin(), s.end());
  std::vector<std::optional<double>> out;
  for (const auto& s : per_system) {
    if (pool.empty()) {
      out.push_back(std::nullopt);
    } else {
      out.push_back(static_cast<double>(s.size()) / static_cast<double>(pool.size()));
    }
  }
  return out;
}

struct EvalReport {
  std::string system_id;
  std::size_t total = 0;
  std::size_t ec_count = 0;
  std::size_t nc_count = 0;
  std::size_t wrong_count = 0;
  std::optional<double> ec_length;
  std::optional<double> nc_length;
  double oc_ratio = 0.0;
  std::optional<double> precision;
  std::optional<double> relative_recall;
  std::optional<double> relative_f1;

  Json to_json() const {
    auto opt = [](const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); };
    return Json{{"system_id", system_id},     {"total", total},
                {"ec_count", ec_count},       {"nc_count", nc_count},
                {"wrong_count", wrong_count}, {"ec_length", opt(ec_length)},
                {"nc_length", opt(nc_length)}, {"oc_ratio", oc_ratio},
                {"precision", opt(precision)}, {"relative_recall", opt(relative_recall)},
                {"relative_f1", opt(relative_f1)}};
  }
};

/// Full comparison: one report per system, recall pooled across them.
inline std::vector<EvalReport> evaluate_systems(const std::vector<SystemOutput>& outputs,
                                                const ConceptIndex& kg,
                                                const JudgmentStore& judgments) {
  if (outputs.empty()) throw Error(ErrorKind::kInvalidArgument, "no systems to evaluate");
  const LanguageMode mode = kg.mode();
  std::vector<EvalReport> reports;
  std::vector<std::set<NcPair>> ncs;
  for (const auto& out : outputs) {
    const auto classified = classify_concepts(out, kg, judgments);
    EvalReport r;
    r.system_id = out.system_id;
    r.total = classified.size();
    double ec_len = 0.0, nc_len = 0.0;
    for (const auto& c : classified) {
      switch (c.cls) {
        case ConceptClass::kExisting:
          ++r.ec_count;
          ec_len += static_cast<double>(concept_length(c.concept_text, mode));
          break;
        case ConceptClass::kNew:
          ++r.nc_count;
          nc_len += static_cast<double>(concept_length(c.concept_text, mode));
          break;
        case ConceptClass::kWrong: ++r.wrong_count; break;
      }
    }
    if (r.ec_count > 0) r.ec_length = ec_len / static_cast<double>(r.ec_count);
    if (r.nc_count > 0) r.nc_length = nc_len / static_cast<double>(r.nc_count);
    r.oc_ratio = oc_ratio(unique_concepts(out, mode), mode);
    r.precision = precision(classified);
    reports.push_back(std::move(r));
    ncs.push_back(nc_pairs(classified, mode));
  }
  const auto recalls = relative_recall(ncs);
  for (std::size_t k = 0; k < reports.size(); ++k) {
    reports[k].relative_recall = recalls[k];
    reports[k].relative_f1 = relative_f1(reports[k].precision, recalls[k]);
  }
  return reports;
}

/// Recall against a known gold set (synthetic corpora only), counted over
/// the entities present in `gold`.
inline std::optional<double> gold_recall(const SystemOutput& output,
                                         const std::map<std::string, std::vector<std::string>>& gold,
                                         LanguageMode mode) {
  std::size_t total = 0, hit = 0;
  for (const auto& [entity, concepts] : gold) {
    std::set<std::string> found;
    if (auto it = output.concepts.find(entity); it != output.concepts.end()) {
      for (const auto& c : it->second) found.insert(surface_key(c, mode));
    }
    std::set<std::string> keys;
    for (const auto& c : concepts) keys.insert(surface_key(c, mode));
    for (const auto& k : keys) {
      ++total;
      hit += found.count(k);
    }
  }
  return precision_from_counts(hit, total);
}

// SystemOutput JSONL: {"entity_id", "concepts": [...], "system_id"}.

inline std::vector<SystemOutput> read_system_outputs(std::istream& in) {
  std::map<std::string, SystemOutput> by_id;
  std::vector<std::string> order;
  for_each_jsonl(in, [&](const Json& obj) {
    const auto sid = obj.at("system_id").get<std::string>();
    if (!by_id.count(sid)) {
      order.push_back(sid);
      by_id[sid].system_id = sid;
    }
    auto& dst = by_id[sid].concepts[obj.at("entity_id").get<std::string>()];
    for (const auto& c : obj.at("concepts")) {
      dst.push_back(c.is_string() ? c.get<std::string>() : c.at("surface").get<std::string>());
    }
  });
  std::vector<SystemOutput> out;
  for (const auto& sid : order) out.push_back(std::move(by_id[sid]));
  return out;
}

inline void write_system_output(std::ostream& out, const SystemOutput& so) {
  for (const auto& [entity, concepts] : so.concepts) {
    out << Json{{"entity_id", entity}, {"concepts", concepts}, {"system_id", so.system_id}}.dump()
        << '\n';
  }
}

}  // namespace conex
