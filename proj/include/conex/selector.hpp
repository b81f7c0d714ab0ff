#pragma once

// Candidate selector: five per-span features and a from-scratch random
// forest of CART trees grown by Gini impurity decrease.

#include <algorithm>
#include <array>
#include <cstdint>
#include <istream>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "conex/corpus.hpp"
#include "conex/csv.hpp"
#include "conex/error.hpp"
#include "conex/rng.hpp"
#include "conex/span_decoder.hpp"

namespace conex {

inline constexpr std::size_t kFeatureCount = 5;
inline constexpr std::array<const char*, kFeatureCount> kFeatureNames = {"A", "B", "C", "D", "E"};

/// A: span confidence, B: start probability, C: end probability,
/// D: surface is a KG concept, E: span strictly contains another candidate.
struct FeatureVector {
  double confidence = 0.0;
  double start_prob = 0.0;
  double end_prob = 0.0;
  double in_kg = 0.0;
  double contains_other = 0.0;

  double operator[](std::size_t k) const {
    switch (k) {
      case 0: return confidence;
      case 1: return start_prob;
      case 2: return end_prob;
      case 3: return in_kg;
      default: return contains_other;
    }
  }

  static FeatureVector from_array(const std::array<double, kFeatureCount>& v) {
    return {v[0], v[1], v[2], v[3], v[4]};
  }

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

inline bool strictly_contains(const CandidateSpan& outer, const CandidateSpan& inner) {
  return inner.start >= outer.start && inner.end <= outer.end &&
         (inner.start != outer.start || inner.end != outer.end);
}

inline FeatureVector extract_features(const CandidateSpan& candidate,
                                      const std::vector<CandidateSpan>& all,
                                      const ConceptIndex& kg) {
  bool present = false;
  bool contains = false;
  for (const auto& other : all) {
    if (other.start == candidate.start && other.end == candidate.end) present = true;
    if (strictly_contains(candidate, other)) contains = true;
  }
  if (!present) {
    throw Error(ErrorKind::kInvalidArgument,
                "candidate (" + std::to_string(candidate.start) + "," +
                    std::to_string(candidate.end) + ") is not in the candidate list");
  }
  return {candidate.confidence, candidate.p_start, candidate.p_end,
          kg.in_vocabulary(candidate.surface) ? 1.0 : 0.0, contains ? 1.0 : 0.0};
}

enum class Label : std::uint8_t { kDrop = 0, kKeep = 1 };

inline std::string_view label_name(Label l) { return l == Label::kKeep ? "keep" : "drop"; }

struct LabeledExample {
  FeatureVector features;
  Label label = Label::kDrop;
  std::string provenance;
};

// ---------------------------------------------------------------------------
// Decision trees

struct ForestConfig {
  std::size_t tree_count = 50;
  std::size_t max_depth = 12;
  std::size_t min_leaf = 2;
  std::size_t features_per_split = 2;
  bool bootstrap = true;
  std::uint64_t seed = 7;
};

inline double gini(std::size_t keep, std::size_t drop) {
  const double n = static_cast<double>(keep + drop);
  if (n == 0.0) return 0.0;
  const double pk = static_cast<double>(keep) / n;
  const double pd = static_cast<double>(drop) / n;
  return 1.0 - pk * pk - pd * pd;
}

/// Gini decrease of splitting a (keep, drop) node into left/right counts.
inline double gini_decrease(std::size_t lk, std::size_t ld, std::size_t rk, std::size_t rd) {
  const double nl = static_cast<double>(lk + ld);
  const double nr = static_cast<double>(rk + rd);
  const double n = nl + nr;
  return gini(lk + rk, ld + rd) - (nl / n) * gini(lk, ld) - (nr / n) * gini(rk, rd);
}

// Candidate splits must beat the incumbent by this much; earlier features
// and lower thresholds win ties.
inline constexpr double kSplitTieTolerance = 1e-12;

struct TreeNode {
  bool leaf = true;
  std::size_t feature = 0;
  double threshold = 0.0;
  std::size_t left = 0;   // child index, x[feature] <= threshold
  std::size_t right = 0;  // child index, x[feature] > threshold
  std::size_t keep = 0;
  std::size_t drop = 0;
  double impurity_decrease = 0.0;

  std::size_t samples() const { return keep + drop; }
  Label vote() const { return keep >= drop ? Label::kKeep : Label::kDrop; }

  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

class DecisionTree {
 public:
  DecisionTree() = default;

  /// Grows a tree on `indices` (repeats allowed) of `examples`.
  static DecisionTree grow(const std::vector<LabeledExample>& examples,
                           std::vector<std::size_t> indices, const ForestConfig& config,
                           Rng& rng) {
    DecisionTree tree;
    tree.sample_indices_ = indices;
    tree.build(examples, std::move(indices), 0, config, rng);
    return tree;
  }

  Label predict(const FeatureVector& fv) const { return nodes_[leaf_for(fv)].vote(); }

  std::size_t leaf_for(const FeatureVector& fv) const {
    std::size_t k = 0;
    while (!nodes_[k].leaf) {
      k = fv[nodes_[k].feature] <= nodes_[k].threshold ? nodes_[k].left : nodes_[k].right;
    }
    return k;
  }

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  const std::vector<std::size_t>& sample_indices() const { return sample_indices_; }

  std::size_t split_count() const {
    return static_cast<std::size_t>(
        std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return !n.leaf; }));
  }

  /// Per-feature sum of split decreases weighted by node sample fraction.
  std::array<double, kFeatureCount> importance() const {
    std::array<double, kFeatureCount> out{};
    if (nodes_.empty()) return out;
    const double root = static_cast<double>(nodes_[0].samples());
    for (const auto& n : nodes_) {
      if (!n.leaf) {
        out[n.feature] += static_cast<double>(n.samples()) / root * n.impurity_decrease;
      }
    }
    return out;
  }

  Json to_json() const { return node_json(0); }

  static DecisionTree from_json(const Json& root, std::vector<std::size_t> samples) {
    DecisionTree t;
    t.sample_indices_ = std::move(samples);
    t.parse_node(root);
    return t;
  }

  friend bool operator==(const DecisionTree&, const DecisionTree&) = default;

 private:
  std::size_t build(const std::vector<LabeledExample>& examples, std::vector<std::size_t> idx,
                    std::size_t depth, const ForestConfig& config, Rng& rng) {
    const std::size_t me = nodes_.size();
    nodes_.emplace_back();
    for (std::size_t k : idx) {
      (examples[k].label == Label::kKeep ? nodes_[me].keep : nodes_[me].drop)++;
    }
    const std::size_t keep = nodes_[me].keep;
    const std::size_t drop = nodes_[me].drop;
    if (keep == 0 || drop == 0 || depth >= config.max_depth ||
        idx.size() < 2 * std::max<std::size_t>(config.min_leaf, 1)) {
      return me;
    }

    std::vector<std::size_t> features(kFeatureCount);
    std::iota(features.begin(), features.end(), 0);
    const std::size_t take = std::min(std::max<std::size_t>(config.features_per_split, 1),
                                      kFeatureCount);
    if (take < kFeatureCount) {
      for (std::size_t k = 0; k < take; ++k) {
        const std::size_t r = k + static_cast<std::size_t>(rng.below(kFeatureCount - k));
        std::swap(features[k], features[r]);
      }
      features.resize(take);
      std::sort(features.begin(), features.end());
    }

    bool found = false;
    double best = -1.0;
    std::size_t best_feature = 0;
    double best_threshold = 0.0;
    const std::size_t min_leaf = std::max<std::size_t>(config.min_leaf, 1);
    for (std::size_t f : features) {
      std::vector<std::size_t> order = idx;
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return examples[a].features[f] < examples[b].features[f];
      });
      std::size_t lk = 0, ld = 0;
      for (std::size_t p = 0; p + 1 < order.size(); ++p) {
        (examples[order[p]].label == Label::kKeep ? lk : ld)++;
        const double here = examples[order[p]].features[f];
        const double next = examples[order[p + 1]].features[f];
        if (!(here < next)) continue;
        const std::size_t nl = p + 1;
        if (nl < min_leaf || order.size() - nl < min_leaf) continue;
        const double dec = gini_decrease(lk, ld, keep - lk, drop - ld);
        if (!found || dec > best + kSplitTieTolerance) {
          found = true;
          best = dec;
          best_feature = f;
          best_threshold = here + (next - here) / 2.0;
        }
      }
    }
    if (!found) return me;

    std::vector<std::size_t> left, right;
    for (std::size_t k : idx) {
      (examples[k].features[best_feature] <= best_threshold ? left : right).push_back(k);
    }
    nodes_[me].leaf = false;
    nodes_[me].feature = best_feature;
    nodes_[me].threshold = best_threshold;
    nodes_[me].impurity_decrease = std::max(best, 0.0);
    const std::size_t l = build(examples, std::move(left), depth + 1, config, rng);
    nodes_[me].left = l;
    const std::size_t r = build(examples, std::move(right), depth + 1, config, rng);
    nodes_[me].right = r;
    return me;
  }

  Json node_json(std::size_t k) const {
    const TreeNode& n = nodes_[k];
    Json j{{"keep", n.keep}, {"drop", n.drop}};
    if (!n.leaf) {
      j["feature"] = kFeatureNames[n.feature];
      j["threshold"] = n.threshold;
      j["impurity_decrease"] = n.impurity_decrease;
      j["left"] = node_json(n.left);
      j["right"] = node_json(n.right);
    }
    return j;
  }

  std::size_t parse_node(const Json& j) {
    const std::size_t me = nodes_.size();
    nodes_.emplace_back();
    nodes_[me].keep = j.at("keep").get<std::size_t>();
    nodes_[me].drop = j.at("drop").get<std::size_t>();
    if (j.contains("feature")) {
      const auto name = j.at("feature").get<std::string>();
      auto it = std::find_if(kFeatureNames.begin(), kFeatureNames.end(),
                             [&](const char* f) { return name == f; });
      if (it == kFeatureNames.end()) throw Error(ErrorKind::kSchema, "unknown feature " + name);
      nodes_[me].leaf = false;
      nodes_[me].feature = static_cast<std::size_t>(it - kFeatureNames.begin());
      nodes_[me].threshold = j.at("threshold").get<double>();
      nodes_[me].impurity_decrease = j.at("impurity_decrease").get<double>();
      const std::size_t l = parse_node(j.at("left"));
      nodes_[me].left = l;
      const std::size_t r = parse_node(j.at("right"));
      nodes_[me].right = r;
    }
    return me;
  }

  std::vector<TreeNode> nodes_;
  std::vector<std::size_t> sample_indices_;
};

// ---------------------------------------------------------------------------
// Forest

struct Prediction {
  Label label = Label::kDrop;
  double keep_fraction = 0.0;
};

struct ImportanceReport {
  std::array<double, kFeatureCount> importance{};

  Json to_json() const {
    Json j = Json::object();
    for (std::size_t k = 0; k < kFeatureCount; ++k) j[kFeatureNames[k]] = importance[k];
    return j;
  }
};

class RandomForest {
 public:
  RandomForest() = default;

  bool trained() const { return !trees_.empty(); }
  const std::vector<DecisionTree>& trees() const { return trees_; }
  const ForestConfig& config() const { return config_; }

  /// Majority vote; an exact tie keeps.
  Prediction predict(const FeatureVector& fv) const {
    if (!trained()) throw Error(ErrorKind::kInvalidArgument, "forest is not trained");
    std::size_t keep = 0;
    for (const auto& t : trees_) keep += t.predict(fv) == Label::kKeep ? 1 : 0;
    const std::size_t total = trees_.size();
    return {2 * keep >= total ? Label::kKeep : Label::kDrop,
            static_cast<double>(keep) / static_cast<double>(total)};
  }

  ImportanceReport feature_importance() const {
    if (!trained()) throw Error(ErrorKind::kInvalidArgument, "forest is not trained");
    std::size_t splits = 0;
    ImportanceReport report;
    for (const auto& t : trees_) {
      splits += t.split_count();
      const auto imp = t.importance();
      for (std::size_t k = 0; k < kFeatureCount; ++k) report.importance[k] += imp[k];
    }
    if (splits == 0) throw Error(ErrorKind::kDegenerate, "no splits");
    double sum = 0.0;
    for (double& v : report.importance) {
      v /= static_cast<double>(trees_.size());
      sum += v;
    }
    if (!(sum > 0.0)) throw Error(ErrorKind::kDegenerate, "no splits with impurity decrease");
    for (double& v : report.importance) v /= sum;
    return report;
  }

  Json to_json() const {
    Json trees = Json::array();
    for (const auto& t : trees_) {
      trees.push_back({{"bootstrap", t.sample_indices()}, {"root", t.to_json()}});
    }
    return Json{{"format", "conex-forest"},
                {"version", 1},
                {"config",
                 {{"tree_count", config_.tree_count},
                  {"max_depth", config_.max_depth},
                  {"min_leaf", config_.min_leaf},
                  {"features_per_split", config_.features_per_split},
                  {"bootstrap", config_.bootstrap},
                  {"seed", config_.seed}}},
                {"features", kFeatureNames},
                {"trees", std::move(trees)}};
  }

  static RandomForest from_json(const Json& j) {
    if (j.value("format", "") != "conex-forest" || j.value("version", 0) != 1) {
      throw Error(ErrorKind::kSchema, "not a version-1 forest checkpoint");
    }
    try {
      RandomForest f;
      const Json& c = j.at("config");
      f.config_.tree_count = c.at("tree_count").get<std::size_t>();
      f.config_.max_depth = c.at("max_depth").get<std::size_t>();
      f.config_.min_leaf = c.at("min_leaf").get<std::size_t>();
      f.config_.features_per_split = c.at("features_per_split").get<std::size_t>();
      f.config_.bootstrap = c.at("bootstrap").get<bool>();
      f.config_.seed = c.at("seed").get<std::uint64_t>();
      for (const auto& t : j.at("trees")) {
        f.trees_.push_back(DecisionTree::from_json(
            t.at("root"), t.at("bootstrap").get<std::vector<std::size_t>>()));
      }
      return f;
    } catch (const Json::exception& e) {
      throw Error(ErrorKind::kSchema, std::string("malformed forest checkpoint: ") + e.what());
    }
  }

  friend RandomForest train_forest(const std::vector<LabeledExample>&, const ForestConfig&);
  friend bool operator==(const RandomForest& a, const RandomForest& b) {
    return a.trees_ == b.trees_;
  }

 private:
  ForestConfig config_;
  std::vector<DecisionTree> trees_;
};

inline RandomForest train_forest(const std::vector<LabeledExample>& examples,
                                 const ForestConfig& config) {
  if (config.tree_count == 0) throw Error(ErrorKind::kInvalidArgument, "tree_count must be >= 1");
  const auto keeps = std::count_if(examples.begin(), examples.end(),
                                   [](const LabeledExample& e) { return e.label == Label::kKeep; });
  if (keeps == 0 || static_cast<std::size_t>(keeps) == examples.size()) {
    throw Error(ErrorKind::kDegenerate, "degenerate labels");
  }
  RandomForest forest;
  forest.config_ = config;
  const std::size_t n = examples.size();
  for (std::size_t t = 0; t < config.tree_count; ++t) {
    Rng rng(derive_seed(config.seed, t));
    std::vector<std::size_t> idx(n);
    if (config.bootstrap) {
      for (auto& k : idx) k = static_cast<std::size_t>(rng.below(n));
    } else {
      std::iota(idx.begin(), idx.end(), 0);
    }
    forest.trees_.push_back(DecisionTree::grow(examples, std::move(idx), config, rng));
  }
  return forest;
}

// ---------------------------------------------------------------------------
// Labeled example CSV: A,B,C,D,E,label,provenance

inline void write_labeled_csv(std::ostream& out, const std::vector<LabeledExample>& examples) {
  out << "A,B,C,D,E,label,provenance\n";
  for (const auto& ex : examples) {
    std::vector<std::string> fields;
    for (std::size_t k = 0; k < kFeatureCount; ++k) {
      fields.push_back(csv::format_double(ex.features[k]));
    }
    fields.emplace_back(label_name(ex.label));
    fields.push_back(ex.provenance);
    out << csv::join(fields) << '\n';
  }
}

inline std::vector<LabeledExample> read_labeled_csv(std::istream& in) {
  std::vector<LabeledExample> out;
  bool header = true;
  for (const auto& row : csv::read(in)) {
    if (header) {
      header = false;
      if (!row.fields.empty() && row.fields[0] == "A") continue;
    }
    if (row.fields.size() != 7) throw ParseError(row.line, "expected 7 fields");
    std::array<double, kFeatureCount> v{};
    for (std::size_t k = 0; k < kFeatureCount; ++k) {
      v[k] = csv::parse_double(row.fields[k], row.line);
    }
    LabeledExample ex;
    ex.features = FeatureVector::from_array(v);
    if (ex.features.in_kg != 0.0 && ex.features.in_kg != 1.0) {
      throw ParseError(row.line, "feature D must be 0 or 1");
    }
    if (ex.features.contains_other != 0.0 && ex.features.contains_other != 1.0) {
      throw ParseError(row.line, "feature E must be 0 or 1");
    }
    if (row.fields[5] == "keep") {
      ex.label = Label::kKeep;
    } else if (row.fields[5] == "drop") {
      ex.label = Label::kDrop;
    } else {
      throw ParseError(row.line, "label must be keep or drop");
    }
    ex.provenance = row.fields[6];
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace conex
