#pragma once

// Candidate span enumeration and fixed-threshold truncation. Overlapping
// and nested spans are never suppressed here.

#include <algorithm>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "conex/corpus.hpp"
#include "conex/error.hpp"
#include "conex/profile.hpp"

namespace conex {

struct CandidateSpan {
  std::size_t start = 0;  // inclusive token index
  std::size_t end = 0;    // inclusive token index
  double confidence = 0.0;
  std::string surface;
  double p_start = 0.0;
  double p_end = 0.0;

  std::size_t length() const { return end - start + 1; }

  friend bool operator==(const CandidateSpan&, const CandidateSpan&) = default;
};

struct DecodeConfig {
  double threshold = 0.85;
  std::size_t max_span_length = 16;
  std::optional<std::size_t> top_k;

  void validate() const {
    if (max_span_length < 1) {
      throw Error(ErrorKind::kInvalidArgument, "max_span_length must be >= 1");
    }
    if (threshold < 0.0 || threshold > 2.0) {
      throw Error(ErrorKind::kInvalidArgument, "threshold must lie in [0, 2]");
    }
  }
};

/// Ranking order: confidence descending, then shorter span, then leftmost.
inline bool ranks_before(const CandidateSpan& a, const CandidateSpan& b) {
  if (a.confidence != b.confidence) return a.confidence > b.confidence;
  if (a.length() != b.length()) return a.length() < b.length();
  return a.start < b.start;
}

inline std::vector<CandidateSpan> enumerate_spans(const ProbabilityProfile& profile,
                                                  const EntityRecord& record,
                                                  const DecodeConfig& config) {
  config.validate();
  std::vector<CandidateSpan> out;
  if (profile.empty()) return out;
  if (profile.size() != record.tokens.size() || profile.p_end.size() != profile.size()) {
    throw Error(ErrorKind::kInvalidArgument,
                "profile length " + std::to_string(profile.size()) +
                    " does not match token count " + std::to_string(record.tokens.size()));
  }
  const std::size_t n = profile.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n && j - i < config.max_span_length; ++j) {
      out.push_back({i, j, span_confidence(profile, i, j),
                     detokenize(record.tokens, i, j, record.mode), profile.p_start[i],
                     profile.p_end[j]});
    }
  }
  std::sort(out.begin(), out.end(), ranks_before);
  if (config.top_k && out.size() > *config.top_k) out.resize(*config.top_k);
  return out;
}

/// Keeps candidates with confidence strictly above `threshold`, in order.
inline std::vector<CandidateSpan> fixed_threshold_truncate(
    const std::vector<CandidateSpan>& ranked, double threshold) {
  std::vector<CandidateSpan> out;
  for (const auto& c : ranked) {
    if (c.confidence > threshold) out.push_back(c);
  }
  return out;
}

/// enumerate_spans followed by truncation at config.threshold; top_k is
/// applied after truncation.
inline std::vector<CandidateSpan> decode(const ProbabilityProfile& profile,
                                         const EntityRecord& record,
                                         const DecodeConfig& config) {
  DecodeConfig all = config;
  all.top_k.reset();
  auto out = fixed_threshold_truncate(enumerate_spans(profile, record, all), config.threshold);
  if (config.top_k && out.size() > *config.top_k) out.resize(*config.top_k);
  return out;
}

// Candidate dump: one JSON object per record.

struct RecordCandidates {
  std::string entity_id;
  std::vector<CandidateSpan> spans;
};

inline Json candidates_to_json(const RecordCandidates& rc) {
  Json spans = Json::array();
  for (const auto& s : rc.spans) {
    spans.push_back({{"i", s.start},
                     {"j", s.end},
                     {"surface", s.surface},
                     {"cs", s.confidence},
                     {"p_start", s.p_start},
                     {"p_end", s.p_end}});
  }
  return Json{{"entity_id", rc.entity_id}, {"spans", std::move(spans)}};
}

inline RecordCandidates candidates_from_json(const Json& obj) {
  RecordCandidates rc;
  rc.entity_id = obj.at("entity_id").get<std::string>();
  for (const auto& s : obj.at("spans")) {
    CandidateSpan c;
    c.start = s.at("i").get<std::size_t>();
    c.end = s.at("j").get<std::size_t>();
    if (c.end < c.start) throw Error(ErrorKind::kSchema, "span with j < i");
    c.surface = s.at("surface").get<std::string>();
    c.confidence = s.at("cs").get<double>();
    c.p_start = s.at("p_start").get<double>();
    c.p_end = s.at("p_end").get<double>();
    rc.spans.push_back(std::move(c));
  }
  return rc;
}

inline std::vector<RecordCandidates> read_candidates(std::istream& in) {
  std::vector<RecordCandidates> out;
  for_each_jsonl(in, [&](const Json& obj) { out.push_back(candidates_from_json(obj)); });
  return out;
}

}  // namespace conex
