#pragma once

// Hearst-pattern concept extraction. A template is a space-separated list
// of elements:
//   X         the entity surface (or an alias)
//   Y         the concept noun phrase
//   ...       a gap of up to max_gap tokens
//   a|an|     literal alternatives; an empty alternative makes it optional
//
// Y is approximated without a tagger: a head token plus up to
// max_leading_modifiers preceding content tokens (not function words, not
// punctuation). A Y followed by a literal ends right before that literal.
// An open-ended Y takes, in word mode, the first content run after any
// leading function words; in character mode, the last content run before
// punctuation. Both scans stop after max_trailing_tokens tokens.

#include <algorithm>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "conex/corpus.hpp"
#include "conex/error.hpp"
#include "conex/text.hpp"

namespace conex {

struct HearstPattern {
  std::string id;
  std::string template_text;
  LanguageMode mode = LanguageMode::kWord;
  std::size_t max_leading_modifiers = 3;
  std::size_t max_trailing_tokens = 8;
  std::size_t max_gap = 8;
};

inline const std::set<std::string>& hearst_function_words(LanguageMode mode) {
  static const std::set<std::string> kWord = {
      "a",    "an",   "the",   "this",  "that",  "these", "those", "his",  "her",   "its",
      "their", "our", "my",    "your",  "who",   "which", "whom",  "whose", "is",   "was",
      "are",  "were", "be",    "been",  "being", "of",    "in",    "on",   "at",    "for",
      "to",   "from", "by",    "with",  "as",    "and",   "or",    "but",  "one",   "also",
      "he",   "she",  "it",    "they",  "not",   "has",   "have",  "had",  "such", "into"};
  static const std::set<std::string> kCharacter = {"的", "是", "在", "和", "与", "及",
                                                   "为", "之", "于", "了", "也", "或"};
  return mode == LanguageMode::kWord ? kWord : kCharacter;
}

class HearstMatcher {
 public:
  enum class Kind { kEntity, kConcept, kGap, kLiteral };

  struct Element {
    Kind kind = Kind::kLiteral;
    std::vector<Tokens> alternatives;  // literals only
  };

  explicit HearstMatcher(HearstPattern pattern) : pattern_(std::move(pattern)) {
    auto fail = [&](const std::string& why) {
      throw Error(ErrorKind::kSchema, "pattern '" + pattern_.id + "': " + why);
    };
    const std::string norm = normalize_whitespace(pattern_.template_text);
    if (norm.empty()) fail("empty template");
    std::size_t xs = 0, ys = 0;
    bool anchored = false;
    std::size_t start = 0;
    while (start <= norm.size()) {
      std::size_t end = norm.find(' ', start);
      if (end == std::string::npos) end = norm.size();
      const std::string piece = norm.substr(start, end - start);
      start = end + 1;
      Element el;
      if (piece == "X") {
        el.kind = Kind::kEntity;
        ++xs;
      } else if (piece == "Y") {
        el.kind = Kind::kConcept;
        ++ys;
      } else if (piece == "...") {
        el.kind = Kind::kGap;
      } else {
        std::size_t a = 0;
        while (a <= piece.size()) {
          std::size_t b = piece.find('|', a);
          if (b == std::string::npos) b = piece.size();
          const std::string alt = piece.substr(a, b - a);
          if (alt.empty()) {
            el.alternatives.emplace_back();
          } else {
            Tokens toks = tokenize(alt, pattern_.mode);
            if (pattern_.mode == LanguageMode::kWord) {
              for (auto& t : toks) t = ascii_lower(t);
            }
            el.alternatives.push_back(std::move(toks));
            anchored = true;
          }
          a = b + 1;
        }
      }
      elements_.push_back(std::move(el));
    }
    if (xs != 1) fail("expected exactly one X slot");
    if (ys != 1) fail("expected exactly one Y slot");
    if (!anchored) fail("no literal anchor");
    for (std::size_t k = 0; k + 1 < elements_.size(); ++k) {
      const Kind a = elements_[k].kind, b = elements_[k + 1].kind;
      if (a != Kind::kLiteral && b != Kind::kLiteral) {
        fail("slots and gaps must be separated by a literal");
      }
    }
  }

  const HearstPattern& pattern() const { return pattern_; }
  const std::vector<Element>& elements() const { return elements_; }

  struct Capture {
    std::size_t first = 0;
    std::size_t last = 0;
    friend auto operator<=>(const Capture&, const Capture&) = default;
  };

  /// All Y captures over every start position, in order of discovery.
  std::vector<Capture> captures(const Tokens& tokens, const std::vector<Tokens>& entity_forms) const {
    Tokens lowered = tokens;
    if (pattern_.mode == LanguageMode::kWord) {
      for (auto& t : lowered) t = ascii_lower(t);
    }
    std::vector<Capture> out;
    for (std::size_t pos = 0; pos < lowered.size(); ++pos) {
      step(lowered, entity_forms, 0, pos, std::nullopt, out);
    }
    return out;
  }

 private:
  bool is_content(const std::string& tok) const {
    if (hearst_function_words(pattern_.mode).count(tok) > 0) return false;
    return !std::all_of(tok.begin(), tok.end(), [](char c) {
      return std::ispunct(static_cast<unsigned char>(c)) != 0;
    }) && !is_wide_punct(tok);
  }

  static bool is_wide_punct(const std::string& tok) {
    static const std::set<std::string> kPunct = {"，", "。", "、", "；", "：", "！", "？",
                                                 "（", "）", "《", "》", "“", "”"};
    return kPunct.count(tok) > 0;
  }

  static bool is_punct(const std::string& tok) {
    return is_wide_punct(tok) || std::all_of(tok.begin(), tok.end(), [](char c) {
             return std::ispunct(static_cast<unsigned char>(c)) != 0;
           });
  }

  Capture bound(std::size_t run_first, std::size_t head) const {
    const std::size_t w = pattern_.max_leading_modifiers;
    return {std::max(run_first, head >= w ? head - w : 0), head};
  }

  static bool match_seq(const Tokens& toks, std::size_t pos, const Tokens& seq) {
    if (pos + seq.size() > toks.size()) return false;
    return std::equal(seq.begin(), seq.end(), toks.begin() + static_cast<std::ptrdiff_t>(pos));
  }

  // Right-anchored Y over [pos, end): the content run ending at end - 1.
  std::optional<Capture> anchored_concept(const Tokens& toks, std::size_t pos,
                                          std::size_t end) const {
    if (end <= pos || !is_content(toks[end - 1])) return std::nullopt;
    std::size_t first = end - 1;
    while (first > pos && is_content(toks[first - 1])) --first;
    if (pattern_.mode == LanguageMode::kWord) {
      for (std::size_t k = pos; k < first; ++k) {
        if (is_content(toks[k]) || is_punct(toks[k])) return std::nullopt;
      }
    }
    return bound(first, end - 1);
  }

  std::optional<Capture> open_concept(const Tokens& toks, std::size_t pos) const {
    const std::size_t limit = std::min(toks.size(), pos + pattern_.max_trailing_tokens);
    if (pattern_.mode == LanguageMode::kWord) {
      std::size_t k = pos;
      while (k < limit && !is_content(toks[k]) && !is_punct(toks[k])) ++k;
      if (k >= limit || !is_content(toks[k])) return std::nullopt;
      const std::size_t first = k;
      while (k + 1 < limit && is_content(toks[k + 1])) ++k;
      return bound(first, k);
    }
    std::size_t stop = pos;
    while (stop < limit && !is_punct(toks[stop])) ++stop;
    return anchored_concept(toks, pos, stop);
  }

  void step(const Tokens& toks, const std::vector<Tokens>& entity_forms, std::size_t k,
            std::size_t pos, std::optional<Capture> y, std::vector<Capture>& out) const {
    if (k == elements_.size()) {
      if (y && std::find(out.begin(), out.end(), *y) == out.end()) out.push_back(*y);
      return;
    }
    const Element& el = elements_[k];
    switch (el.kind) {
      case Kind::kLiteral:
        for (const auto& alt : el.alternatives) {
          if (match_seq(toks, pos, alt)) step(toks, entity_forms, k + 1, pos + alt.size(), y, out);
        }
        break;
      case Kind::kEntity:
        for (const auto& form : entity_forms) {
          if (!form.empty() && match_seq(toks, pos, form)) {
            step(toks, entity_forms, k + 1, pos + form.size(), y, out);
          }
        }
        break;
      case Kind::kGap:
        for (std::size_t g = 0; g <= pattern_.max_gap && pos + g <= toks.size(); ++g) {
          step(toks, entity_forms, k + 1, pos + g, y, out);
        }
        break;
      case Kind::kConcept:
        if (k + 1 == elements_.size()) {
          if (auto cap = open_concept(toks, pos)) step(toks, entity_forms, k + 1, toks.size(), cap, out);
        } else {
          const std::size_t limit = std::min(toks.size(), pos + pattern_.max_trailing_tokens);
          for (std::size_t end = pos + 1; end <= limit; ++end) {
            if (auto cap = anchored_concept(toks, pos, end)) {
              step(toks, entity_forms, k + 1, end, cap, out);
            }
          }
        }
        break;
    }
  }

  HearstPattern pattern_;
  std::vector<Element> elements_;
};

inline HearstPattern pattern_from_json(const Json& j) {
  HearstPattern p;
  p.id = j.value("id", std::string("?"));
  try {
    p.template_text = j.at("template").get<std::string>();
    p.mode = parse_mode(j.value("language_mode", std::string("word")));
    auto bound = [&](const char* key, std::size_t fallback) {
      if (!j.contains(key)) return fallback;
      const auto v = j.at(key).get<long long>();
      if (v < 0) throw Error(ErrorKind::kSchema, "pattern '" + p.id + "': negative " + key);
      return static_cast<std::size_t>(v);
    };
    p.max_leading_modifiers = bound("max_leading_modifiers", p.max_leading_modifiers);
    p.max_trailing_tokens = bound("max_trailing_tokens", p.max_trailing_tokens);
    p.max_gap = bound("max_gap", p.max_gap);
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::kSchema, "pattern '" + p.id + "': " + e.what());
  }
  return p;
}

/// Compiles a JSON list of pattern records.
inline std::vector<HearstMatcher> compile_patterns(const Json& list) {
  if (!list.is_array()) throw Error(ErrorKind::kSchema, "pattern file must be a JSON list");
  std::vector<HearstMatcher> out;
  for (const auto& j : list) out.emplace_back(pattern_from_json(j));
  return out;
}

/// Concepts captured by any matcher whose mode matches the record's,
/// deduplicated by surface key, in discovery order.
inline std::vector<std::string> hearst_match(const EntityRecord& record,
                                             const std::vector<HearstMatcher>& matchers,
                                             const std::vector<std::string>& aliases = {}) {
  std::vector<Tokens> forms;
  for (const auto& name : aliases) {
    if (!normalize_whitespace(name).empty()) forms.push_back(match_tokens(name, record.mode));
  }
  if (!normalize_whitespace(record.surface_name).empty()) {
    forms.insert(forms.begin(), match_tokens(record.surface_name, record.mode));
  }
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& m : matchers) {
    if (m.pattern().mode != record.mode) continue;
    for (const auto& cap : m.captures(record.tokens, forms)) {
      std::string surface = detokenize(record.tokens, cap.first, cap.last, record.mode);
      if (seen.insert(surface_key(surface, record.mode)).second) out.push_back(std::move(surface));
    }
  }
  return out;
}

}  // namespace conex
