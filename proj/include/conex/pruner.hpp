#pragma once

// Rule-based pruning of selected concepts for one entity. Rules run in a
// fixed order: function-word stripping, modifier-fragment removal, then
// semantic exclusivity. Every action is recorded.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "conex/corpus.hpp"
#include "conex/error.hpp"
#include "conex/text.hpp"

namespace conex {

struct ScoredConcept {
  std::string surface;
  double vote_fraction = 1.0;

  friend bool operator==(const ScoredConcept&, const ScoredConcept&) = default;
};

struct RuleSet {
  std::vector<std::vector<std::string>> exclusive_groups;
  std::map<LanguageMode, std::vector<std::string>> function_words;
  bool modifier_rule_enabled = true;
  bool strip_enabled = true;

  static RuleSet defaults() {
    RuleSet r;
    r.function_words[LanguageMode::kWord] = {
        "is",   "was",  "are", "were", "be",   "been", "being", "am",
        "in",   "on",   "at",  "of",   "for",  "to",   "from",  "by",
        "with", "as",   "into", "within", "about", "and", "or"};
    r.function_words[LanguageMode::kCharacter] = {"是", "在", "于", "为", "和", "与", "及", "的"};
    return r;
  }

  void validate() const {
    for (const auto& g : exclusive_groups) {
      if (g.size() < 2) {
        throw Error(ErrorKind::kSchema, "exclusive group needs at least 2 members");
      }
    }
    if (strip_enabled) {
      for (const auto& [mode, words] : function_words) {
        if (words.empty()) {
          throw Error(ErrorKind::kSchema,
                      std::string("empty function word list for ") + std::string(mode_name(mode)));
        }
      }
    }
  }
};

inline RuleSet rules_from_json(const Json& j) {
  RuleSet r;
  try {
    if (j.contains("exclusive_groups")) {
      r.exclusive_groups = j.at("exclusive_groups").get<std::vector<std::vector<std::string>>>();
    }
    if (j.contains("function_words")) {
      for (const auto& [mode, words] : j.at("function_words").items()) {
        r.function_words[parse_mode(mode)] = words.get<std::vector<std::string>>();
      }
    }
    r.modifier_rule_enabled = j.value("modifier_rule_enabled", true);
    r.strip_enabled = j.value("strip_enabled", true);
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::kSchema, std::string("malformed rule set: ") + e.what());
  }
  r.validate();
  return r;
}

enum class PruneAction { kKept, kDropped, kRewritten };

inline std::string_view action_name(PruneAction a) {
  switch (a) {
    case PruneAction::kKept: return "kept";
    case PruneAction::kDropped: return "dropped";
    case PruneAction::kRewritten: return "rewritten";
  }
  return "";
}

struct PruneDecision {
  std::string concept_text;
  PruneAction action = PruneAction::kKept;
  std::optional<std::string> rewritten_to;
  std::string rule_id;
  std::string reason;

  Json to_json() const {
    Json j{{"concept", concept_text},
           {"action", action_name(action)},
           {"rule_id", rule_id},
           {"reason", reason}};
    j["rewritten_to"] = rewritten_to ? Json(*rewritten_to) : Json(nullptr);
    return j;
  }
};

struct PruneResult {
  std::vector<ScoredConcept> kept;
  std::vector<PruneDecision> decisions;
};

inline constexpr const char* kRuleDuplicate = "duplicate";
inline constexpr const char* kRuleExclusive = "rule1_exclusive";
inline constexpr const char* kRuleModifier = "rule2_modifier";
inline constexpr const char* kRuleFunctionWord = "rule3_function_word";

namespace detail {

struct PruneItem {
  std::string surface;
  std::string key;
  Tokens key_tokens;
  double vote = 0.0;
  bool alive = true;
};

inline bool is_strict_prefix(const Tokens& a, const Tokens& b) {
  return a.size() < b.size() && std::equal(a.begin(), a.end(), b.begin());
}

inline bool is_strict_suffix(const Tokens& a, const Tokens& b) {
  return a.size() < b.size() && std::equal(a.rbegin(), a.rend(), b.rbegin());
}

}  // namespace detail

/// Prunes one entity's concepts. Output is sorted by surface key and does
/// not depend on input order.
inline PruneResult prune(const std::vector<ScoredConcept>& concepts, const RuleSet& rules,
                         const ConceptIndex& kg) {
  const LanguageMode mode = kg.mode();
  PruneResult result;
  std::vector<detail::PruneItem> items;
  for (const auto& c : concepts) {
    std::string key = surface_key(c.surface, mode);
    if (key.empty()) {
      result.decisions.push_back({c.surface, PruneAction::kDropped, std::nullopt, kRuleDuplicate,
                                  "empty surface"});
      continue;
    }
    items.push_back({normalize_whitespace(c.surface), key, tokenize(key, mode), c.vote_fraction});
  }
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    return std::tie(a.key, a.surface, a.vote) < std::tie(b.key, b.surface, b.vote);
  });

  auto find_alive = [&](const std::string& key, std::size_t except) -> detail::PruneItem* {
    for (std::size_t k = 0; k < items.size(); ++k) {
      if (k != except && items[k].alive && items[k].key == key) return &items[k];
    }
    return nullptr;
  };

  // Exact duplicates merge into the first occurrence.
  for (std::size_t k = 0; k < items.size(); ++k) {
    if (auto* first = find_alive(items[k].key, k); first && first < &items[k]) {
      first->vote = std::max(first->vote, items[k].vote);
      items[k].alive = false;
      result.decisions.push_back({items[k].surface, PruneAction::kDropped, first->surface,
                                  kRuleDuplicate, "duplicate of '" + first->surface + "'"});
    }
  }

  // Rule 3: strip leading function words.
  const auto fw_it = rules.function_words.find(mode);
  if (rules.strip_enabled && fw_it != rules.function_words.end()) {
    std::set<std::string> fw;
    for (const auto& w : fw_it->second) {
      fw.insert(mode == LanguageMode::kWord ? ascii_lower(w) : w);
    }
    for (std::size_t k = 0; k < items.size(); ++k) {
      auto& it = items[k];
      if (!it.alive || fw.count(it.key_tokens.front()) == 0) continue;
      std::size_t lead = 0;
      while (lead < it.key_tokens.size() && fw.count(it.key_tokens[lead]) > 0) ++lead;
      if (lead == it.key_tokens.size()) {
        it.alive = false;
        result.decisions.push_back({it.surface, PruneAction::kDropped, std::nullopt,
                                    kRuleFunctionWord, "consists only of function words"});
        continue;
      }
      const Tokens surface_tokens = tokenize(it.surface, mode);
      const std::string rewritten = detokenize(
          std::span<const std::string>(surface_tokens).subspan(lead), mode);
      const std::string new_key = surface_key(rewritten, mode);
      if (auto* existing = find_alive(new_key, k)) {
        existing->vote = std::max(existing->vote, it.vote);
        it.alive = false;
        result.decisions.push_back({it.surface, PruneAction::kDropped, existing->surface,
                                    kRuleFunctionWord,
                                    "stripped form duplicates '" + existing->surface + "'"});
        continue;
      }
      result.decisions.push_back({it.surface, PruneAction::kRewritten, rewritten,
                                  kRuleFunctionWord, "leading function word removed"});
      it.surface = rewritten;
      it.key = new_key;
      it.key_tokens = tokenize(new_key, mode);
    }
  }

  // Rule 2: modifier fragments. Judged against one snapshot of survivors.
  if (rules.modifier_rule_enabled) {
    std::vector<std::size_t> doomed;
    for (std::size_t k = 0; k < items.size(); ++k) {
      if (!items[k].alive || kg.in_vocabulary(items[k].key)) continue;
      for (std::size_t o = 0; o < items.size(); ++o) {
        if (o == k || !items[o].alive) continue;
        if (detail::is_strict_prefix(items[k].key_tokens, items[o].key_tokens) &&
            !detail::is_strict_suffix(items[k].key_tokens, items[o].key_tokens)) {
          doomed.push_back(k);
          result.decisions.push_back({items[k].surface, PruneAction::kDropped, std::nullopt,
                                      kRuleModifier,
                                      "modifier of '" + items[o].surface + "', not a KG concept"});
          break;
        }
      }
    }
    for (std::size_t k : doomed) items[k].alive = false;
  }

  // Rule 1: semantic exclusivity, survivor by vote then length then key.
  for (const auto& group : rules.exclusive_groups) {
    std::set<std::string> keys;
    for (const auto& m : group) keys.insert(surface_key(m, mode));
    std::vector<detail::PruneItem*> members;
    for (auto& it : items) {
      if (it.alive && keys.count(it.key) > 0) members.push_back(&it);
    }
    if (members.size() < 2) continue;
    auto better = [](const detail::PruneItem* a, const detail::PruneItem* b) {
      if (a->vote != b->vote) return a->vote > b->vote;
      if (a->key_tokens.size() != b->key_tokens.size()) {
        return a->key_tokens.size() > b->key_tokens.size();
      }
      if (a->key.size() != b->key.size()) return a->key.size() > b->key.size();
      return a->key < b->key;
    };
    const auto* winner = *std::min_element(members.begin(), members.end(), better);
    for (auto* m : members) {
      if (m == winner) continue;
      m->alive = false;
      result.decisions.push_back({m->surface, PruneAction::kDropped, std::nullopt, kRuleExclusive,
                                  "exclusive with '" + winner->surface + "'"});
    }
  }

  std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    return std::tie(a.key, a.surface) < std::tie(b.key, b.surface);
  });
  for (const auto& it : items) {
    if (!it.alive) continue;
    result.kept.push_back({it.surface, it.vote});
    result.decisions.push_back({it.surface, PruneAction::kKept, std::nullopt, "", "survived"});
  }
  return result;
}

}  // namespace conex
