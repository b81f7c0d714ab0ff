#pragma once

// Trainable start/end pointer head over token embeddings.
//
// Each token gets two independent two-way softmaxes (start vs not-start,
// end vs not-end). The loss mixes binary cross-entropy on start flags, end
// flags, and span membership, where a span's probability is its pointer
// confidence halved and clipped to [eps, 1 - eps].

#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "conex/corpus.hpp"
#include "conex/embedding.hpp"
#include "conex/error.hpp"
#include "conex/profile.hpp"
#include "conex/rng.hpp"

namespace conex {

/// One two-way softmax scorer: a positive and a complementary negative
/// linear logit over the embedding.
struct Scorer {
  std::vector<double> pos_weights;
  std::vector<double> neg_weights;
  double pos_bias = 0.0;
  double neg_bias = 0.0;

  friend bool operator==(const Scorer&, const Scorer&) = default;
};

struct HeadParams {
  Scorer start;
  Scorer end;

  static HeadParams zeros(std::size_t dim) {
    HeadParams p;
    for (Scorer* s : {&p.start, &p.end}) {
      s->pos_weights.assign(dim, 0.0);
      s->neg_weights.assign(dim, 0.0);
    }
    return p;
  }

  std::size_t dim() const { return start.pos_weights.size(); }
  std::size_t size() const { return 4 * dim() + 4; }

  /// Layout: start{pos_w, neg_w, pos_b, neg_b}, end{...}.
  std::vector<double> flat() const {
    std::vector<double> out;
    out.reserve(size());
    for (const Scorer* s : {&start, &end}) {
      out.insert(out.end(), s->pos_weights.begin(), s->pos_weights.end());
      out.insert(out.end(), s->neg_weights.begin(), s->neg_weights.end());
      out.push_back(s->pos_bias);
      out.push_back(s->neg_bias);
    }
    return out;
  }

  void assign_flat(std::span<const double> values) {
    const std::size_t d = dim();
    if (values.size() != size()) {
      throw Error(ErrorKind::kInvalidArgument, "flat parameter size mismatch");
    }
    std::size_t k = 0;
    for (Scorer* s : {&start, &end}) {
      for (std::size_t c = 0; c < d; ++c) s->pos_weights[c] = values[k++];
      for (std::size_t c = 0; c < d; ++c) s->neg_weights[c] = values[k++];
      s->pos_bias = values[k++];
      s->neg_bias = values[k++];
    }
  }

  bool finite() const {
    for (double v : flat()) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  friend bool operator==(const HeadParams&, const HeadParams&) = default;
};

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

inline double two_way_softmax(double pos_logit, double neg_logit) {
  const double m = std::max(pos_logit, neg_logit);
  const double ep = std::exp(pos_logit - m);
  const double en = std::exp(neg_logit - m);
  return ep / (ep + en);
}

inline void check_dims(const EmbeddingMatrix& e, const HeadParams& params) {
  const Scorer* scorers[] = {&params.start, &params.end};
  for (const Scorer* s : scorers) {
    if (s->pos_weights.size() != e.cols() || s->neg_weights.size() != e.cols()) {
      throw Error(ErrorKind::kInvalidArgument,
                  "dimension mismatch: embedding has " + std::to_string(e.cols()) +
                      " columns, head weights have " +
                      std::to_string(s->pos_weights.size()));
    }
  }
}

}  // namespace detail

inline ProbabilityProfile forward(const EmbeddingMatrix& e, const HeadParams& params) {
  detail::check_dims(e, params);
  ProbabilityProfile out;
  out.p_start.resize(e.rows());
  out.p_end.resize(e.rows());
  for (std::size_t i = 0; i < e.rows(); ++i) {
    const auto x = e.row(i);
    out.p_start[i] = detail::two_way_softmax(
        detail::dot(params.start.pos_weights, x) + params.start.pos_bias,
        detail::dot(params.start.neg_weights, x) + params.start.neg_bias);
    out.p_end[i] = detail::two_way_softmax(
        detail::dot(params.end.pos_weights, x) + params.end.pos_bias,
        detail::dot(params.end.neg_weights, x) + params.end.neg_bias);
  }
  return out;
}

struct LossOptions {
  double alpha = 0.3;
  double beta = 0.25;
  std::size_t max_span_length = 16;
  double epsilon = 1e-7;

  void validate() const {
    if (!(alpha > 0.0 && beta > 0.0 && alpha + beta < 1.0)) {
      throw Error(ErrorKind::kInvalidArgument,
                  "loss weights need alpha, beta > 0 and alpha + beta < 1");
    }
    if (max_span_length < 1) {
      throw Error(ErrorKind::kInvalidArgument, "max_span_length must be >= 1");
    }
  }
};

struct LossBreakdown {
  double loss_start = 0.0;
  double loss_end = 0.0;
  double loss_span = 0.0;
  double total = 0.0;
  double alpha = 0.3;
  double beta = 0.25;
};

inline double mix_loss(double l_start, double l_end, double l_span, double alpha,
                       double beta) {
  return alpha * l_start + beta * l_end + (1.0 - alpha - beta) * l_span;
}

namespace detail {

inline double clip(double p, double eps) { return std::min(std::max(p, eps), 1.0 - eps); }

inline double bce(double p, bool label) {
  return label ? -std::log(p) : -std::log1p(-p);
}

// d bce / d p for an unclipped p; zero when the clip is active.
inline double bce_slope(double raw, double eps, bool label) {
  if (raw < eps || raw > 1.0 - eps) return 0.0;
  return label ? -1.0 / raw : 1.0 / (1.0 - raw);
}

inline void check_loss_inputs(const ProbabilityProfile& profile, const WeakLabels& labels) {
  if (profile.p_start.size() != labels.size() || profile.p_end.size() != labels.size() ||
      labels.end_flags.size() != labels.size()) {
    throw Error(ErrorKind::kInvalidArgument,
                "length mismatch: profile has " + std::to_string(profile.size()) +
                    " tokens, labels have " + std::to_string(labels.size()));
  }
  for (std::size_t i = 0; i < profile.size(); ++i) {
    if (std::isnan(profile.p_start[i]) || std::isnan(profile.p_end[i])) {
      throw Error(ErrorKind::kInvalidArgument, "NaN probability at token " + std::to_string(i));
    }
  }
}

template <class Fn>
void for_each_loss_span(std::size_t n, std::size_t max_len, Fn&& fn) {
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n && j - i < max_len; ++j) fn(i, j);
  }
}

}  // namespace detail

/// Number of (i, j) pairs the span term averages over.
inline std::size_t loss_span_count(std::size_t n, std::size_t max_len) {
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i) count += std::min(max_len, n - i);
  return count;
}

inline LossBreakdown compute_loss(const ProbabilityProfile& profile,
                                  const WeakLabels& labels,
                                  const LossOptions& opts = {}) {
  opts.validate();
  detail::check_loss_inputs(profile, labels);
  LossBreakdown out;
  out.alpha = opts.alpha;
  out.beta = opts.beta;
  const std::size_t n = profile.size();
  if (n == 0) return out;
  const double eps = opts.epsilon;
  for (std::size_t i = 0; i < n; ++i) {
    out.loss_start += detail::bce(detail::clip(profile.p_start[i], eps), labels.start_flags[i] != 0);
    out.loss_end += detail::bce(detail::clip(profile.p_end[i], eps), labels.end_flags[i] != 0);
  }
  out.loss_start /= static_cast<double>(n);
  out.loss_end /= static_cast<double>(n);
  detail::for_each_loss_span(n, opts.max_span_length, [&](std::size_t i, std::size_t j) {
    const double q = detail::clip(span_confidence(profile, i, j) / 2.0, eps);
    out.loss_span += detail::bce(q, labels.span_flags.count({i, j}) > 0);
  });
  out.loss_span /= static_cast<double>(loss_span_count(n, opts.max_span_length));
  out.total = mix_loss(out.loss_start, out.loss_end, out.loss_span, opts.alpha, opts.beta);
  return out;
}

/// Gradients of each loss component and of the mixed total.
struct HeadGradients {
  HeadParams start_term;
  HeadParams end_term;
  HeadParams span_term;
  HeadParams total;
  LossBreakdown loss;
};

namespace detail {

// Accumulates dL/dlogit-difference of one scorer into its parameters.
inline void accumulate(Scorer& grad, std::span<const double> x, double g) {
  for (std::size_t k = 0; k < x.size(); ++k) {
    grad.pos_weights[k] += g * x[k];
    grad.neg_weights[k] -= g * x[k];
  }
  grad.pos_bias += g;
  grad.neg_bias -= g;
}

}  // namespace detail

inline HeadGradients gradients(const EmbeddingMatrix& e, const HeadParams& params,
                               const WeakLabels& labels, const LossOptions& opts = {}) {
  const ProbabilityProfile profile = forward(e, params);
  HeadGradients g;
  g.loss = compute_loss(profile, labels, opts);
  const std::size_t d = e.cols();
  g.start_term = g.end_term = g.span_term = g.total = HeadParams::zeros(d);
  const std::size_t n = profile.size();
  if (n == 0) return g;
  const double eps = opts.epsilon;
  const double inv_n = 1.0 / static_cast<double>(n);

  // dL_span / dp for every start and end position.
  std::vector<double> span_dstart(n, 0.0), span_dend(n, 0.0);
  const double inv_m = 1.0 / static_cast<double>(loss_span_count(n, opts.max_span_length));
  detail::for_each_loss_span(n, opts.max_span_length, [&](std::size_t i, std::size_t j) {
    const double raw = span_confidence(profile, i, j) / 2.0;
    const double slope =
        detail::bce_slope(raw, eps, labels.span_flags.count({i, j}) > 0) * 0.5 * inv_m;
    span_dstart[i] += slope;
    span_dend[j] += slope;
  });

  const double w_span = 1.0 - opts.alpha - opts.beta;
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = e.row(i);
    const double ps = profile.p_start[i];
    const double pe = profile.p_end[i];
    const double ds = ps * (1.0 - ps);  // dp / d(logit difference)
    const double de = pe * (1.0 - pe);

    // BCE through a two-way softmax collapses to (p - y) when unclipped.
    const double gs = (ps < eps || ps > 1.0 - eps)
                          ? 0.0
                          : (ps - static_cast<double>(labels.start_flags[i])) * inv_n;
    const double ge = (pe < eps || pe > 1.0 - eps)
                          ? 0.0
                          : (pe - static_cast<double>(labels.end_flags[i])) * inv_n;
    const double gss = span_dstart[i] * ds;
    const double gse = span_dend[i] * de;

    detail::accumulate(g.start_term.start, x, gs);
    detail::accumulate(g.end_term.end, x, ge);
    detail::accumulate(g.span_term.start, x, gss);
    detail::accumulate(g.span_term.end, x, gse);
    detail::accumulate(g.total.start, x, opts.alpha * gs + w_span * gss);
    detail::accumulate(g.total.end, x, opts.beta * ge + w_span * gse);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
  double alpha = 0.3;
  double beta = 0.25;
  double learning_rate = 1e-2;
  std::size_t batch_size = 4;
  std::size_t epochs = 2;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::size_t max_span_length = 16;
  std::uint64_t seed = 13;

  LossOptions loss_options() const {
    LossOptions o;
    o.alpha = alpha;
    o.beta = beta;
    o.max_span_length = max_span_length;
    return o;
  }

  void validate() const {
    loss_options().validate();
    if (batch_size == 0) throw Error(ErrorKind::kInvalidArgument, "batch_size must be >= 1");
    if (!(learning_rate > 0.0)) {
      throw Error(ErrorKind::kInvalidArgument, "learning_rate must be positive");
    }
  }
};

class AdamOptimizer {
 public:
  AdamOptimizer(std::size_t size, const TrainConfig& config)
      : m_(size, 0.0), v_(size, 0.0), config_(config) {}

  void step(std::vector<double>& params, const std::vector<double>& grad) {
    ++t_;
    const double b1 = config_.adam_beta1;
    const double b2 = config_.adam_beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params.size(); ++k) {
      m_[k] = b1 * m_[k] + (1.0 - b1) * grad[k];
      v_[k] = b2 * v_[k] + (1.0 - b2) * grad[k] * grad[k];
      params[k] -= config_.learning_rate * (m_[k] / c1) /
                   (std::sqrt(v_[k] / c2) + config_.adam_epsilon);
    }
  }

 private:
  std::vector<double> m_;
  std::vector<double> v_;
  std::uint64_t t_ = 0;
  TrainConfig config_;
};

/// A record prepared for the head: embedding plus weak labels.
struct TrainingExample {
  std::string entity_id;
  EmbeddingMatrix embedding;
  WeakLabels labels;
};

inline std::vector<TrainingExample> prepare_examples(const std::vector<EntityRecord>& records,
                                                     const HashedEmbedder& embedder,
                                                     const QuestionTemplate& question) {
  std::vector<TrainingExample> out;
  for (const auto& r : records) {
    WeakLabels labels = build_weak_labels(r);
    if (labels.empty()) continue;  // no span supervision
    out.push_back({r.entity_id, embedder.embed(r, question), std::move(labels)});
  }
  return out;
}

struct EpochLog {
  std::size_t epoch = 0;
  LossBreakdown train;
  LossBreakdown validation;
  bool has_validation = false;

  Json to_json() const {
    auto comp = [](const LossBreakdown& l) {
      return Json{{"start", l.loss_start}, {"end", l.loss_end}, {"span", l.loss_span},
                  {"total", l.total}};
    };
    Json j{{"epoch", epoch}, {"train_loss", comp(train)}};
    j["val_loss"] = has_validation ? comp(validation) : Json(nullptr);
    return j;
  }
};

inline LossBreakdown mean_loss(const std::vector<TrainingExample>& examples,
                               const HeadParams& params, const LossOptions& opts) {
  LossBreakdown sum;
  sum.alpha = opts.alpha;
  sum.beta = opts.beta;
  for (const auto& ex : examples) {
    const LossBreakdown l = compute_loss(forward(ex.embedding, params), ex.labels, opts);
    sum.loss_start += l.loss_start;
    sum.loss_end += l.loss_end;
    sum.loss_span += l.loss_span;
  }
  if (!examples.empty()) {
    const double k = static_cast<double>(examples.size());
    sum.loss_start /= k;
    sum.loss_end /= k;
    sum.loss_span /= k;
  }
  sum.total = mix_loss(sum.loss_start, sum.loss_end, sum.loss_span, opts.alpha, opts.beta);
  return sum;
}

struct TrainResult {
  HeadParams params;
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
};

/// Mini-batch Adam over precomputed examples. Keeps the epoch checkpoint
/// with the lowest validation total (training total when validation is
/// empty). epochs == 0 returns `init` unchanged.
inline TrainResult train_head(const std::vector<TrainingExample>& train,
                              const std::vector<TrainingExample>& validation,
                              const TrainConfig& config, const HeadParams& init) {
  config.validate();
  if (train.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "training split has no labeled records");
  }
  const LossOptions opts = config.loss_options();
  TrainResult result;
  result.params = init;
  if (config.epochs == 0) return result;

  HeadParams current = init;
  std::vector<double> flat = current.flat();
  AdamOptimizer adam(flat.size(), config);
  double best = std::numeric_limits<double>::infinity();
  double last_finite = std::numeric_limits<double>::quiet_NaN();

  std::vector<std::size_t> order(train.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    Rng rng(derive_seed(config.seed, epoch));
    rng.shuffle(order);
    for (std::size_t b = 0; b < order.size(); b += config.batch_size) {
      const std::size_t b_end = std::min(order.size(), b + config.batch_size);
      std::vector<double> grad(flat.size(), 0.0);
      for (std::size_t k = b; k < b_end; ++k) {
        const auto& ex = train[order[k]];
        const HeadGradients g = gradients(ex.embedding, current, ex.labels, opts);
        if (!std::isfinite(g.loss.total)) {
          throw Error(ErrorKind::kDivergence,
                      "training diverged; last finite loss " + std::to_string(last_finite));
        }
        last_finite = g.loss.total;
        const std::vector<double> gf = g.total.flat();
        for (std::size_t c = 0; c < grad.size(); ++c) grad[c] += gf[c];
      }
      const double scale = 1.0 / static_cast<double>(b_end - b);
      for (double& v : grad) v *= scale;
      adam.step(flat, grad);
      current.assign_flat(flat);
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.train = mean_loss(train, current, opts);
    entry.has_validation = !validation.empty();
    if (entry.has_validation) entry.validation = mean_loss(validation, current, opts);
    const double score = entry.has_validation ? entry.validation.total : entry.train.total;
    if (!std::isfinite(score)) {
      throw Error(ErrorKind::kDivergence,
                  "training diverged; last finite loss " + std::to_string(last_finite));
    }
    if (score < best) {
      best = score;
      result.params = current;
      result.best_epoch = epoch;
    }
    result.log.push_back(entry);
  }
  return result;
}

/// Embeds the split, drops records without weak labels, and trains from
/// zero-initialized parameters.
inline TrainResult train_head(const DatasetSplit& split, const TrainConfig& config,
                              const HashedEmbedder& embedder = HashedEmbedder{},
                              const QuestionTemplate& question = QuestionTemplate{}) {
  const auto train = prepare_examples(split.train, embedder, question);
  const auto val = prepare_examples(split.validation, embedder, question);
  return train_head(train, val, config, HeadParams::zeros(embedder.dim()));
}

// ---------------------------------------------------------------------------
// Checkpoints

/// Everything needed to reproduce probabilities for new records.
struct HeadModel {
  HeadParams params;
  EmbedderConfig embedder;
  QuestionTemplate question;
  TrainConfig train_config;

  ProbabilityProfile predict(const EntityRecord& record) const {
    return forward(HashedEmbedder(embedder).embed(record, question), params);
  }
};

inline constexpr int kHeadCheckpointVersion = 1;

inline Json head_to_json(const HeadModel& model) {
  auto scorer = [](const Scorer& s) {
    return Json{{"pos_weights", s.pos_weights},
                {"neg_weights", s.neg_weights},
                {"pos_bias", s.pos_bias},
                {"neg_bias", s.neg_bias}};
  };
  const TrainConfig& c = model.train_config;
  return Json{
      {"format", "conex-head"},
      {"version", kHeadCheckpointVersion},
      {"dim", model.params.dim()},
      {"embedder", {{"dim", model.embedder.dim}, {"window", model.embedder.window}}},
      {"question", model.question.text()},
      {"train_config",
       {{"alpha", c.alpha},
        {"beta", c.beta},
        {"learning_rate", c.learning_rate},
        {"batch_size", c.batch_size},
        {"epochs", c.epochs},
        {"adam_beta1", c.adam_beta1},
        {"adam_beta2", c.adam_beta2},
        {"adam_epsilon", c.adam_epsilon},
        {"max_span_length", c.max_span_length},
        {"seed", c.seed}}},
      {"start", scorer(model.params.start)},
      {"end", scorer(model.params.end)}};
}

inline HeadModel head_from_json(const Json& j) {
  if (j.value("format", "") != "conex-head") {
    throw Error(ErrorKind::kSchema, "not a head checkpoint");
  }
  if (j.value("version", 0) != kHeadCheckpointVersion) {
    throw Error(ErrorKind::kSchema, "unsupported head checkpoint version");
  }
  try {
    HeadModel m;
    m.embedder.dim = j.at("embedder").at("dim").get<int>();
    m.embedder.window = j.at("embedder").at("window").get<int>();
    m.question = QuestionTemplate(j.at("question").get<std::string>());
    const Json& c = j.at("train_config");
    m.train_config.alpha = c.at("alpha").get<double>();
    m.train_config.beta = c.at("beta").get<double>();
    m.train_config.learning_rate = c.at("learning_rate").get<double>();
    m.train_config.batch_size = c.at("batch_size").get<std::size_t>();
    m.train_config.epochs = c.at("epochs").get<std::size_t>();
    m.train_config.adam_beta1 = c.at("adam_beta1").get<double>();
    m.train_config.adam_beta2 = c.at("adam_beta2").get<double>();
    m.train_config.adam_epsilon = c.at("adam_epsilon").get<double>();
    m.train_config.max_span_length = c.at("max_span_length").get<std::size_t>();
    m.train_config.seed = c.at("seed").get<std::uint64_t>();
    auto scorer = [](const Json& s) {
      Scorer out;
      out.pos_weights = s.at("pos_weights").get<std::vector<double>>();
      out.neg_weights = s.at("neg_weights").get<std::vector<double>>();
      out.pos_bias = s.at("pos_bias").get<double>();
      out.neg_bias = s.at("neg_bias").get<double>();
      return out;
    };
    m.params.start = scorer(j.at("start"));
    m.params.end = scorer(j.at("end"));
    const auto d = static_cast<std::size_t>(m.embedder.dim);
    for (const Scorer* s : {&m.params.start, &m.params.end}) {
      if (s->pos_weights.size() != d || s->neg_weights.size() != d) {
        throw Error(ErrorKind::kSchema, "head weights do not match embedder dim");
      }
    }
    if (!m.params.finite()) throw Error(ErrorKind::kSchema, "non-finite head parameters");
    return m;
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::kSchema, std::string("malformed head checkpoint: ") + e.what());
  }
}

}  // namespace conex
