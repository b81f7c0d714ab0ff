#pragma once

// Token embeddings for the pointer head. The encoder is pluggable; the
// default is a deterministic hashed-feature embedder conditioned on the
// instantiated question.

#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "conex/corpus.hpp"
#include "conex/error.hpp"
#include "conex/text.hpp"

namespace conex {

/// Question text with a single entity placeholder.
class QuestionTemplate {
 public:
  static constexpr std::string_view kPlaceholder = "[entity]";
  static constexpr std::string_view kDefault = "What is the concept for [entity]?";

  QuestionTemplate() : QuestionTemplate(std::string(kDefault)) {}

  explicit QuestionTemplate(std::string text) : text_(std::move(text)) {
    const auto first = text_.find(kPlaceholder);
    if (first == std::string::npos ||
        text_.find(kPlaceholder, first + 1) != std::string::npos) {
      throw Error(ErrorKind::kInvalidArgument,
                  "question template must contain exactly one [entity]");
    }
  }

  const std::string& text() const { return text_; }

  std::string instantiate(std::string_view entity) const {
    std::string out = text_;
    out.replace(out.find(kPlaceholder), kPlaceholder.size(), entity);
    return out;
  }

 private:
  std::string text_;
};

/// Row-major n x d matrix, one row per abstract token.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  EmbeddingMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), values_(rows * cols, 0.0) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  std::span<const double> row(std::size_t i) const {
    return {values_.data() + i * cols_, cols_};
  }
  std::span<double> row(std::size_t i) { return {values_.data() + i * cols_, cols_}; }

  double& operator()(std::size_t i, std::size_t k) { return values_[i * cols_ + k]; }
  double operator()(std::size_t i, std::size_t k) const { return values_[i * cols_ + k]; }

  const std::vector<double>& values() const { return values_; }

  friend bool operator==(const EmbeddingMatrix&, const EmbeddingMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

struct EmbedderConfig {
  int dim = 256;
  int window = 2;
};

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Hashed-feature embedder. Each token row sums signed unit features for
/// its surface, its shape, the tokens within +-window, whether it occurs in
/// the question, and a question-salted copy of its surface.
class HashedEmbedder {
 public:
  explicit HashedEmbedder(EmbedderConfig config = {}) : config_(config) {
    if (config_.dim <= 0) {
      throw Error(ErrorKind::kInvalidArgument,
                  "embedding dimension must be positive, got " +
                      std::to_string(config_.dim));
    }
    if (config_.window < 0) {
      throw Error(ErrorKind::kInvalidArgument, "embedding window must be >= 0");
    }
  }

  const EmbedderConfig& config() const { return config_; }
  std::size_t dim() const { return static_cast<std::size_t>(config_.dim); }

  EmbeddingMatrix embed(const EntityRecord& record,
                        const QuestionTemplate& question) const {
    const std::string q = question.instantiate(record.surface_name);
    std::set<std::string> question_tokens;
    for (auto& t : tokenize(q, record.mode)) question_tokens.insert(ascii_lower(t));

    const std::size_t n = record.tokens.size();
    std::vector<std::string> lowered(n);
    for (std::size_t i = 0; i < n; ++i) lowered[i] = ascii_lower(record.tokens[i]);

    EmbeddingMatrix m(n, dim());
    for (std::size_t i = 0; i < n; ++i) {
      auto row = m.row(i);
      add(row, "w:" + lowered[i], 1.0);
      add(row, "shape:" + shape(record.tokens[i]), 0.5);
      for (int k = -config_.window; k <= config_.window; ++k) {
        if (k == 0) continue;
        const auto pos = static_cast<std::ptrdiff_t>(i) + k;
        const std::string& ctx =
            pos < 0 ? kBos
                    : (pos >= static_cast<std::ptrdiff_t>(n) ? kEos
                                                             : lowered[static_cast<std::size_t>(pos)]);
        add(row, "c" + std::to_string(k) + ":" + ctx, 0.5);
      }
      if (question_tokens.count(lowered[i]) > 0) add(row, "in-question", 1.0);
      add(row, "q:" + q + "|" + lowered[i], 0.25);
    }
    return m;
  }

 private:
  inline static const std::string kBos = "<s>";
  inline static const std::string kEos = "</s>";

  void add(std::span<double> row, const std::string& feature, double weight) const {
    const std::uint64_t h = fnv1a(feature);
    const double sign = (h >> 63) != 0 ? -1.0 : 1.0;
    row[static_cast<std::size_t>(h % row.size())] += sign * weight;
  }

  static std::string shape(std::string_view token) {
    bool upper = false, digit = false, punct = false, other = false;
    for (unsigned char c : token) {
      if (c >= 'A' && c <= 'Z') upper = true;
      else if (c >= '0' && c <= '9') digit = true;
      else if (c < 0x80 && std::ispunct(c)) punct = true;
      else other = true;
    }
    std::string s;
    if (upper) s += 'X';
    if (digit) s += 'd';
    if (punct) s += 'p';
    if (other || s.empty()) s += 'x';
    return s;
  }

  EmbedderConfig config_;
};

inline EmbeddingMatrix embed_tokens(const EntityRecord& record,
                                    const QuestionTemplate& question,
                                    const EmbedderConfig& config) {
  return HashedEmbedder(config).embed(record, question);
}

}  // namespace conex
