#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "conex/embedding.hpp"
#include "conex/pointer_head.hpp"
#include "support/gradcheck.hpp"
#include "support/helpers.hpp"
#include "support/oracles.hpp"

using namespace conex;
using testing_support::word_record;

TEST(Softmax, MatchesDirectFormula) {
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> u(-8.0, 8.0);
  for (int k = 0; k < 500; ++k) {
    const double a = u(gen), b = u(gen);
    EXPECT_NEAR(detail::two_way_softmax(a, b), oracle::softmax_pos(a, b), 1e-14);
  }
  EXPECT_NEAR(detail::two_way_softmax(1000.0, 0.0), 1.0, 1e-15);
  EXPECT_TRUE(std::isfinite(detail::two_way_softmax(-1000.0, 1000.0)));
}

TEST(Forward, ProbabilitiesStayInUnitIntervalAndMatchOracle) {
  std::mt19937_64 gen(2);
  const auto g = testing_support::random_grad_point(gen, 6, 5);
  const auto p = forward(g.embedding, g.params);
  const auto flat = g.params.flat();
  for (std::size_t i = 0; i < 6; ++i) {
    double pos = flat[10], neg = flat[11];
    for (std::size_t k = 0; k < 5; ++k) {
      pos += flat[k] * g.embedding(i, k);
      neg += flat[5 + k] * g.embedding(i, k);
    }
    EXPECT_NEAR(p.p_start[i], oracle::softmax_pos(pos, neg), 1e-12);
    EXPECT_GT(p.p_end[i], 0.0);
    EXPECT_LT(p.p_end[i], 1.0);
  }
}

TEST(Forward, DimensionMismatchNamesBothSizes) {
  EmbeddingMatrix e(3, 4);
  try {
    forward(e, HeadParams::zeros(5));
    FAIL();
  } catch (const Error& err) {
    const std::string msg = err.what();
    EXPECT_NE(msg.find('4'), std::string::npos);
    EXPECT_NE(msg.find('5'), std::string::npos);
  }
}

TEST(Loss, MatchesLoopOracle) {
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 1 + gen() % 20;
    const auto prof = testing_support::random_profile(gen, n);
    auto labels = empty_labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i; j < n; ++j) {
        if (gen() % 7 == 0) {
          labels.span_flags.emplace(i, j);
          labels.start_flags[i] = labels.end_flags[j] = 1;
        }
      }
    }
    const LossOptions opts;
    const auto got = compute_loss(prof, labels, opts);
    std::vector<int> ys(labels.start_flags.begin(), labels.start_flags.end());
    std::vector<int> ye(labels.end_flags.begin(), labels.end_flags.end());
    const auto want = oracle::loss(prof.p_start, prof.p_end, ys, ye, labels.span_flags, 0.3, 0.25, 16);
    EXPECT_NEAR(got.loss_start, want.start, 1e-12);
    EXPECT_NEAR(got.loss_end, want.end, 1e-12);
    EXPECT_NEAR(got.loss_span, want.span, 1e-12);
    EXPECT_NEAR(got.total, want.total, 1e-12);
  }
}

TEST(Loss, RecompositionIdentity) {
  std::mt19937_64 gen(6);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + gen() % 10;
    const auto l = compute_loss(testing_support::random_profile(gen, n), empty_labels(n));
    EXPECT_NEAR(l.total, 0.3 * l.loss_start + 0.25 * l.loss_end + 0.45 * l.loss_span, 1e-12);
  }
}

TEST(Loss, ClipKeepsExtremeProbabilitiesFinite) {
  ProbabilityProfile p{{0.0, 1.0}, {1.0, 0.0}};
  auto labels = empty_labels(2);
  labels.start_flags[0] = 1;
  labels.span_flags.emplace(0, 1);
  const auto l = compute_loss(p, labels);
  EXPECT_TRUE(std::isfinite(l.total));
  EXPECT_NEAR(l.loss_start, -std::log(1e-7) * 2.0 / 2.0, 1e-6);
}

TEST(Loss, RejectsMismatchedLengthsAndNaN) {
  EXPECT_THROW(compute_loss(testing_support::flat_profile(3, 0.5), empty_labels(2)), Error);
  ProbabilityProfile p{{std::nan("")}, {0.5}};
  EXPECT_THROW(compute_loss(p, empty_labels(1)), Error);
}

TEST(Loss, SpanCountRespectsMaximumLength) {
  EXPECT_EQ(loss_span_count(5, 16), 15u);
  EXPECT_EQ(loss_span_count(5, 2), 9u);
  EXPECT_EQ(loss_span_count(0, 16), 0u);
}

TEST(Gradients, MatchCentralDifferences) {
  std::mt19937_64 gen(7);
  for (int k = 0; k < 8; ++k) {
    const auto g = testing_support::random_grad_point(gen, 2 + gen() % 6, 3 + gen() % 4);
    EXPECT_LT(testing_support::gradient_relative_error(g, LossOptions{}), 1e-4);
  }
}

TEST(Gradients, ShortMaximumSpanLength) {
  std::mt19937_64 gen(8);
  LossOptions opts;
  opts.max_span_length = 2;
  const auto g = testing_support::random_grad_point(gen, 7, 4);
  EXPECT_LT(testing_support::gradient_relative_error(g, opts), 1e-4);
}

TEST(Gradients, ComponentsSumToTotal) {
  std::mt19937_64 gen(9);
  const auto g = testing_support::random_grad_point(gen, 5, 3);
  const LossOptions opts;
  const auto grads = gradients(g.embedding, g.params, g.labels, opts);
  const auto s = grads.start_term.flat(), e = grads.end_term.flat(), sp = grads.span_term.flat(),
             t = grads.total.flat();
  for (std::size_t k = 0; k < t.size(); ++k) {
    EXPECT_NEAR(t[k], 0.3 * s[k] + 0.25 * e[k] + 0.45 * sp[k], 1e-12);
  }
}

namespace {

std::vector<EntityRecord> toy_records() {
  std::vector<EntityRecord> rs;
  const std::vector<std::pair<std::string, std::string>> rows = {
      {"Alpha", "river"}, {"Bravo", "company"}, {"Charlie", "river"}, {"Delta", "station"},
      {"Echo", "company"}, {"Foxtrot", "station"}, {"Golf", "river"}, {"Hotel", "company"}};
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto& [name, c] = rows[k];
    rs.push_back(testing_support::word_record("e" + std::to_string(k), name,
                                              name + " is a " + c + " that serves the region .", {c}));
  }
  return rs;
}

}  // namespace

TEST(Training, LossDecreasesAndBestEpochIsKept) {
  DatasetSplit split;
  auto rs = toy_records();
  split.train.assign(rs.begin(), rs.begin() + 6);
  split.validation.assign(rs.begin() + 6, rs.end());
  TrainConfig c;
  c.epochs = 6;
  const HashedEmbedder emb(EmbedderConfig{64, 2});
  const auto result = train_head(split, c, emb);
  ASSERT_EQ(result.log.size(), 6u);
  EXPECT_LT(result.log.back().train.total, result.log.front().train.total);
  double best = 1e9;
  std::size_t best_epoch = 0;
  for (const auto& e : result.log) {
    if (e.validation.total < best) {
      best = e.validation.total;
      best_epoch = e.epoch;
    }
  }
  EXPECT_EQ(result.best_epoch, best_epoch);
}

TEST(Training, DeterministicUnderSeed) {
  DatasetSplit split;
  split.train = toy_records();
  TrainConfig c;
  c.epochs = 2;
  const HashedEmbedder emb(EmbedderConfig{32, 1});
  EXPECT_EQ(train_head(split, c, emb).params, train_head(split, c, emb).params);
}

TEST(Training, NoLabeledRecordsIsAnError) {
  DatasetSplit split;
  split.train = {word_record("e", "X", "X is here .", {"absent"})};
  EXPECT_THROW(train_head(split, TrainConfig{}, HashedEmbedder(EmbedderConfig{8, 1})), Error);
}

TEST(Training, DivergenceIsReported) {
  std::vector<TrainingExample> ex(1);
  ex[0].embedding = EmbeddingMatrix(1, 1);
  ex[0].embedding(0, 0) = std::nan("");
  ex[0].labels = empty_labels(1);
  ex[0].labels.start_flags[0] = ex[0].labels.end_flags[0] = 1;
  ex[0].labels.span_flags.emplace(0, 0);
  try {
    train_head(ex, {}, TrainConfig{}, HeadParams::zeros(1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_TRUE(e.kind() == ErrorKind::kDivergence || e.kind() == ErrorKind::kInvalidArgument);
  }
}

TEST(Checkpoint, RoundTripReproducesProbabilities) {
  DatasetSplit split;
  split.train = toy_records();
  TrainConfig c;
  c.epochs = 1;
  const EmbedderConfig ec{32, 2};
  const auto result = train_head(split, c, HashedEmbedder(ec));
  const HeadModel m{result.params, ec, QuestionTemplate{}, c};
  const HeadModel back = head_from_json(Json::parse(head_to_json(m).dump()));
  const auto& r = split.train.front();
  const auto a = m.predict(r), b = back.predict(r);
  EXPECT_EQ(a.p_start, b.p_start);
  EXPECT_EQ(a.p_end, b.p_end);
}

TEST(Checkpoint, RejectsForeignFiles) {
  EXPECT_THROW(head_from_json(Json{{"format", "other"}}), Error);
  Json j = head_to_json({HeadParams::zeros(4), EmbedderConfig{5, 1}, QuestionTemplate{}, TrainConfig{}});
  EXPECT_THROW(head_from_json(j), Error);  // weights shorter than the embedder
}

TEST(Embedding, DeterministicAndQuestionConditioned) {
  const auto r = word_record("e", "Google", "Google is a company .");
  const HashedEmbedder emb(EmbedderConfig{64, 2});
  EXPECT_EQ(emb.embed(r, QuestionTemplate{}), emb.embed(r, QuestionTemplate{}));
  EXPECT_NE(emb.embed(r, QuestionTemplate{}), emb.embed(r, QuestionTemplate("Which type is [entity]?")));
  EXPECT_THROW(QuestionTemplate("no placeholder"), Error);
  EXPECT_THROW(QuestionTemplate("[entity] and [entity]"), Error);
  EXPECT_THROW(HashedEmbedder(EmbedderConfig{0, 2}), Error);
}
