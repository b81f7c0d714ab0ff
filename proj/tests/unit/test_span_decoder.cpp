#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "conex/span_decoder.hpp"
#include "support/helpers.hpp"
#include "support/oracles.hpp"

using namespace conex;
using testing_support::flat_profile;
using testing_support::numbered_record;

TEST(Enumerate, MatchesBruteForceInSetAndOrder) {
  std::mt19937_64 gen(11);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + gen() % 10;
    const std::size_t max_len = 1 + gen() % 12;
    auto prof = testing_support::random_profile(gen, n);
    if (trial % 4 == 0) {  // force ties
      for (auto& v : prof.p_start) v = std::round(v * 4) / 4;
      for (auto& v : prof.p_end) v = std::round(v * 4) / 4;
    }
    DecodeConfig c;
    c.max_span_length = max_len;
    const auto got = enumerate_spans(prof, numbered_record(n), c);
    const auto want = oracle::all_spans(prof.p_start, prof.p_end, max_len);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t k = 0; k < got.size(); ++k) {
      EXPECT_EQ(got[k].start, want[k].i);
      EXPECT_EQ(got[k].end, want[k].j);
      EXPECT_EQ(got[k].confidence, want[k].cs);
    }
  }
}

TEST(Enumerate, SurfacesAndBoundaryProbabilities) {
  const auto r = testing_support::word_record("e", "G", "G is a technology company");
  ProbabilityProfile p = flat_profile(5, 0.1);
  p.p_start[3] = 0.7;
  p.p_end[4] = 0.8;
  const auto spans = enumerate_spans(p, r, DecodeConfig{});
  EXPECT_EQ(spans.front().surface, "technology company");
  EXPECT_DOUBLE_EQ(spans.front().p_start, 0.7);
  EXPECT_DOUBLE_EQ(spans.front().p_end, 0.8);
}

TEST(Enumerate, EmptyProfileAndMismatch) {
  EXPECT_TRUE(enumerate_spans(ProbabilityProfile{}, numbered_record(2), DecodeConfig{}).empty());
  EXPECT_THROW(enumerate_spans(flat_profile(3, 0.5), numbered_record(2), DecodeConfig{}), Error);
  DecodeConfig bad;
  bad.max_span_length = 0;
  EXPECT_THROW(enumerate_spans(flat_profile(2, 0.5), numbered_record(2), bad), Error);
}

TEST(Enumerate, TieBreakShorterThenLeftmost) {
  const auto spans = enumerate_spans(flat_profile(3, 0.5), numbered_record(3), DecodeConfig{});
  // All cs = 1.0: singles left to right, then pairs, then the triple.
  std::vector<std::pair<std::size_t, std::size_t>> order;
  for (const auto& s : spans) order.emplace_back(s.start, s.end);
  const std::vector<std::pair<std::size_t, std::size_t>> expected = {{0, 0}, {1, 1}, {2, 2}, {0, 1}, {1, 2}, {0, 2}};
  EXPECT_EQ(order, expected);
}

TEST(Truncate, StrictlyAboveThreshold) {
  ProbabilityProfile p{{0.5, 0.125}, {0.25, 0.125}};
  DecodeConfig c;
  c.threshold = 0.75;
  const auto out = decode(p, numbered_record(2), c);
  ASSERT_EQ(out.size(), 0u);  // 0.5 + 0.25 == 0.75 is not above
  c.threshold = 0.7;
  EXPECT_EQ(decode(p, numbered_record(2), c).size(), 1u);
}

TEST(Truncate, ThresholdTwoYieldsNothing) {
  DecodeConfig c;
  c.threshold = 2.0;
  EXPECT_TRUE(decode(flat_profile(4, 1.0), numbered_record(4), c).empty());
}

// Properties: raising the threshold never adds spans and the result is
// always a prefix of the ranking.
TEST(TruncateProperty, MonotoneAndPrefix) {
  std::mt19937_64 gen(12);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + gen() % 8;
    const auto prof = testing_support::random_profile(gen, n);
    const auto ranked = enumerate_spans(prof, numbered_record(n), DecodeConfig{});
    std::size_t prev = ranked.size() + 1;
    for (double t = 0.0; t <= 2.0; t += 0.1) {
      const auto kept = fixed_threshold_truncate(ranked, t);
      EXPECT_LE(kept.size(), prev);
      prev = kept.size();
      for (std::size_t k = 0; k < kept.size(); ++k) EXPECT_EQ(kept[k], ranked[k]);
    }
  }
}

TEST(Decode, TopKAppliesAfterTruncation) {
  DecodeConfig c;
  c.threshold = 0.5;
  c.top_k = 2;
  EXPECT_EQ(decode(flat_profile(4, 0.4), numbered_record(4), c).size(), 2u);
  c.top_k = 0;
  EXPECT_TRUE(decode(flat_profile(4, 0.4), numbered_record(4), c).empty());
}

TEST(Decode, NestedSpansEndingAtOneTokenSurvive) {
  // "Google is a multinational technology company": three nested concepts.
  const auto r = testing_support::word_record("e", "Google", "Google is a multinational technology company");
  ProbabilityProfile p = flat_profile(6, 0.02);
  p.p_start[3] = 0.45;
  p.p_start[4] = 0.42;
  p.p_start[5] = 0.40;
  p.p_end[5] = 0.5;
  const auto out = decode(p, r, DecodeConfig{});
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out[0].surface, "multinational technology company");
  EXPECT_EQ(out[1].surface, "technology company");
  EXPECT_EQ(out[2].surface, "company");
}

TEST(CandidateDump, RoundTrip) {
  const auto spans = decode(flat_profile(3, 0.45), numbered_record(3), DecodeConfig{});
  const RecordCandidates rc{"e", spans};
  std::stringstream ss;
  ss << candidates_to_json(rc).dump() << '\n';
  const auto back = read_candidates(ss);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].spans, spans);
  EXPECT_THROW(candidates_from_json(Json::parse(R"({"entity_id":"e","spans":[{"i":2,"j":1,"surface":"x","cs":1,"p_start":0.5,"p_end":0.5}]})")),
               Error);
}
