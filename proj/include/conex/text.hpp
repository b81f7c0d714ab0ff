#pragma once

// Text primitives shared by every stage: UTF-8 grapheme splitting,
// tokenization in character or word mode, and the canonical surface form
// used whenever two concept strings are compared.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "conex/error.hpp"

namespace conex {

enum class LanguageMode { kCharacter, kWord };

inline std::string_view mode_name(LanguageMode mode) {
  return mode == LanguageMode::kCharacter ? "character" : "word";
}

inline LanguageMode parse_mode(std::string_view name) {
  if (name == "character") return LanguageMode::kCharacter;
  if (name == "word") return LanguageMode::kWord;
  throw Error(ErrorKind::kSchema,
              "unknown language_mode '" + std::string(name) + "'");
}

using Tokens = std::vector<std::string>;

namespace utf8 {

struct CodePoint {
  char32_t value;
  std::size_t length;  // bytes consumed
};

// Invalid sequences decode as U+FFFD consuming one byte.
inline CodePoint decode(std::string_view s, std::size_t pos) {
  const auto b0 = static_cast<unsigned char>(s[pos]);
  auto cont = [&](std::size_t k) -> int {
    if (pos + k >= s.size()) return -1;
    const auto b = static_cast<unsigned char>(s[pos + k]);
    return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
  };
  if (b0 < 0x80) return {b0, 1};
  if ((b0 & 0xE0) == 0xC0) {
    const int c1 = cont(1);
    if (c1 >= 0) return {static_cast<char32_t>(((b0 & 0x1F) << 6) | c1), 2};
  } else if ((b0 & 0xF0) == 0xE0) {
    const int c1 = cont(1), c2 = cont(2);
    if (c1 >= 0 && c2 >= 0)
      return {static_cast<char32_t>(((b0 & 0x0F) << 12) | (c1 << 6) | c2), 3};
  } else if ((b0 & 0xF8) == 0xF0) {
    const int c1 = cont(1), c2 = cont(2), c3 = cont(3);
    if (c1 >= 0 && c2 >= 0 && c3 >= 0)
      return {static_cast<char32_t>(((b0 & 0x07) << 18) | (c1 << 12) |
                                    (c2 << 6) | c3),
              4};
  }
  return {0xFFFD, 1};
}

inline bool is_space(char32_t c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v' || c == 0x00A0 || c == 0x3000 || (c >= 0x2000 && c <= 0x200A);
}

// Code points that attach to the preceding cluster: combining marks,
// variation selectors, emoji skin-tone modifiers.
inline bool is_extender(char32_t c) {
  return (c >= 0x0300 && c <= 0x036F) || (c >= 0x1AB0 && c <= 0x1AFF) ||
         (c >= 0x1DC0 && c <= 0x1DFF) || (c >= 0x20D0 && c <= 0x20FF) ||
         (c >= 0xFE20 && c <= 0xFE2F) || (c >= 0xFE00 && c <= 0xFE0F) ||
         (c >= 0x1F3FB && c <= 0x1F3FF) || c == 0x200D;
}

/// Splits into extended grapheme clusters (simplified: base + extenders,
/// ZWJ joins the next code point).
inline std::vector<std::string> graphemes(std::string_view s) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  bool join_next = false;
  while (pos < s.size()) {
    const CodePoint cp = decode(s, pos);
    const std::string_view piece = s.substr(pos, cp.length);
    if (!out.empty() && (join_next || is_extender(cp.value))) {
      out.back().append(piece);
    } else {
      out.emplace_back(piece);
    }
    join_next = cp.value == 0x200D;
    pos += cp.length;
  }
  return out;
}

inline bool is_space_grapheme(std::string_view g) {
  return !g.empty() && is_space(decode(g, 0).value);
}

}  // namespace utf8

inline std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

/// Trims and collapses every whitespace run to one ASCII space.
inline std::string normalize_whitespace(std::string_view s) {
  std::string out;
  bool pending_space = false;
  std::size_t pos = 0;
  while (pos < s.size()) {
    const auto cp = utf8::decode(s, pos);
    if (utf8::is_space(cp.value)) {
      pending_space = !out.empty();
    } else {
      if (pending_space) out.push_back(' ');
      pending_space = false;
      out.append(s.substr(pos, cp.length));
    }
    pos += cp.length;
  }
  return out;
}

namespace detail {

inline bool is_ascii_punct(char c) {
  return std::ispunct(static_cast<unsigned char>(c)) != 0;
}

inline void split_word_chunk(std::string_view chunk, Tokens& out) {
  std::size_t lo = 0;
  std::size_t hi = chunk.size();
  while (lo < hi && is_ascii_punct(chunk[lo])) ++lo;
  if (lo == hi) {
    for (char c : chunk) out.emplace_back(1, c);
    return;
  }
  while (hi > lo && is_ascii_punct(chunk[hi - 1])) --hi;
  for (std::size_t k = 0; k < lo; ++k) out.emplace_back(1, chunk[k]);
  out.emplace_back(chunk.substr(lo, hi - lo));
  for (std::size_t k = hi; k < chunk.size(); ++k) out.emplace_back(1, chunk[k]);
}

}  // namespace detail

/// Character mode: one token per non-whitespace grapheme. Word mode:
/// whitespace split with leading/trailing ASCII punctuation detached one
/// character per token. Throws on empty or whitespace-only text.
inline Tokens tokenize(std::string_view text, LanguageMode mode) {
  Tokens out;
  if (mode == LanguageMode::kCharacter) {
    for (auto& g : utf8::graphemes(text)) {
      if (!utf8::is_space_grapheme(g)) out.push_back(std::move(g));
    }
  } else {
    const std::string norm = normalize_whitespace(text);
    std::size_t start = 0;
    while (start < norm.size()) {
      std::size_t end = norm.find(' ', start);
      if (end == std::string::npos) end = norm.size();
      detail::split_word_chunk(std::string_view(norm).substr(start, end - start),
                               out);
      start = end + 1;
    }
  }
  if (out.empty()) throw Error(ErrorKind::kInvalidArgument, "empty abstract");
  return out;
}

inline std::string detokenize(std::span<const std::string> tokens,
                              LanguageMode mode) {
  std::string out;
  for (std::size_t k = 0; k < tokens.size(); ++k) {
    if (k > 0 && mode == LanguageMode::kWord) out.push_back(' ');
    out += tokens[k];
  }
  return out;
}

/// Detokenized tokens[first..last] (inclusive).
inline std::string detokenize(const Tokens& tokens, std::size_t first,
                              std::size_t last, LanguageMode mode) {
  return detokenize(std::span<const std::string>(tokens).subspan(
                        first, last - first + 1),
                    mode);
}

/// Comparison key for concept strings: re-tokenized, detokenized, and
/// lowercased in word mode. Empty strings map to "".
inline std::string surface_key(std::string_view concept_text, LanguageMode mode) {
  const std::string norm = normalize_whitespace(concept_text);
  if (norm.empty()) return {};
  std::string joined = detokenize(tokenize(norm, mode), mode);
  return mode == LanguageMode::kWord ? ascii_lower(joined) : joined;
}

/// Tokens of a concept prepared for matching against an abstract.
inline Tokens match_tokens(std::string_view concept_text, LanguageMode mode) {
  Tokens toks = tokenize(concept_text, mode);
  if (mode == LanguageMode::kWord) {
    for (auto& t : toks) t = ascii_lower(t);
  }
  return toks;
}

/// True when needle occurs as a contiguous run inside hay.
inline bool contains_run(std::span<const std::string> hay,
                         std::span<const std::string> needle) {
  if (needle.empty() || needle.size() > hay.size()) return false;
  return std::search(hay.begin(), hay.end(), needle.begin(), needle.end()) !=
         hay.end();
}

/// Number of length units: graphemes in character mode, words otherwise.
inline std::size_t unit_length(std::string_view concept_text, LanguageMode mode) {
  const std::string norm = normalize_whitespace(concept_text);
  if (norm.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "empty concept");
  }
  if (mode == LanguageMode::kWord) {
    return static_cast<std::size_t>(std::count(norm.begin(), norm.end(), ' ')) + 1;
  }
  std::size_t n = 0;
  for (const auto& g : utf8::graphemes(norm)) {
    if (!utf8::is_space_grapheme(g)) ++n;
  }
  return n;
}

/// Code point offsets [begin, end) of each token within `text`. Tokens must
/// appear in order as verbatim substrings.
inline std::vector<std::pair<std::size_t, std::size_t>> token_offsets(std::string_view text,
                                                                      const Tokens& tokens) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t byte = 0, cp = 0;
  auto advance_to = [&](std::size_t target) {
    while (byte < target) {
      byte += utf8::decode(text, byte).length;
      ++cp;
    }
  };
  for (const auto& t : tokens) {
    const auto at = text.find(t, byte);
    if (at == std::string_view::npos) {
      throw Error(ErrorKind::kInvalidArgument, "token '" + t + "' not found in text");
    }
    advance_to(at);
    const std::size_t begin = cp;
    advance_to(at + t.size());
    out.emplace_back(begin, cp);
  }
  return out;
}

}  // namespace conex
