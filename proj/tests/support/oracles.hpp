#pragma once

// Independent reference implementations used to check the library. They
// favour directness over speed and share no code paths with include/.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace oracle {

// ---------------------------------------------------------------------------
// Span scoring

struct Span {
  std::size_t i, j;
  double cs;
};

/// Every (i, j) with j - i < max_len, ordered by (-cs, length, i).
inline std::vector<Span> all_spans(const std::vector<double>& ps, const std::vector<double>& pe,
                                   std::size_t max_len) {
  std::vector<Span> out;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    for (std::size_t j = i; j < pe.size(); ++j) {
      if (j - i + 1 > max_len) break;
      out.push_back({i, j, ps[i] + pe[j]});
    }
  }
  std::sort(out.begin(), out.end(), [](const Span& a, const Span& b) {
    return std::make_tuple(-a.cs, a.j - a.i, a.i) < std::make_tuple(-b.cs, b.j - b.i, b.i);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Loss

/// p = exp(a) / (exp(a) + exp(b)) written directly, for moderate logits.
inline double softmax_pos(double a, double b) { return std::exp(a) / (std::exp(a) + std::exp(b)); }

inline double clipped_bce(double p, int y, double eps) {
  p = std::clamp(p, eps, 1.0 - eps);
  return -(y * std::log(p) + (1 - y) * std::log(1.0 - p));
}

struct Loss {
  double start, end, span, total;
};

inline Loss loss(const std::vector<double>& ps, const std::vector<double>& pe,
                 const std::vector<int>& ys, const std::vector<int>& ye,
                 const std::set<std::pair<std::size_t, std::size_t>>& yspan, double alpha, double beta,
                 std::size_t max_len, double eps = 1e-7) {
  const std::size_t n = ps.size();
  Loss l{0, 0, 0, 0};
  for (std::size_t i = 0; i < n; ++i) {
    l.start += clipped_bce(ps[i], ys[i], eps) / static_cast<double>(n);
    l.end += clipped_bce(pe[i], ye[i], eps) / static_cast<double>(n);
  }
  double sum = 0.0;
  std::size_t m = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n && j - i < max_len; ++j) {
      sum += clipped_bce((ps[i] + pe[j]) / 2.0, yspan.count({i, j}) ? 1 : 0, eps);
      ++m;
    }
  }
  l.span = m == 0 ? 0.0 : sum / static_cast<double>(m);
  l.total = alpha * l.start + beta * l.end + (1.0 - alpha - beta) * l.span;
  return l;
}

// ---------------------------------------------------------------------------
// Trees

struct Row {
  std::array<double, 5> x;
  int y;  // 1 keep, 0 drop
};

inline double gini_of(const std::vector<Row>& rows) {
  if (rows.empty()) return 0.0;
  double k = 0;
  for (const auto& r : rows) k += r.y;
  const double p = k / static_cast<double>(rows.size());
  return 2.0 * p * (1.0 - p);
}

struct Node {
  bool leaf = true;
  std::size_t feature = 0;
  std::vector<std::size_t> left_ids;  // row positions routed left
  double decrease = 0.0;
  std::optional<std::size_t> left, right;
};

/// Greedy tree where each node tries every feature and every threshold
/// "x <= v" for each observed value v (except the maximum), keeping the
/// first strictly better split under `tol`.
inline void exhaustive_grow(const std::vector<Row>& rows, const std::vector<std::size_t>& ids,
                            std::size_t depth, std::size_t max_depth, std::vector<Node>& out,
                            double tol = 1e-12) {
  const std::size_t me = out.size();
  out.emplace_back();
  std::vector<Row> here;
  for (auto k : ids) here.push_back(rows[k]);
  std::size_t keeps = 0;
  for (const auto& r : here) keeps += static_cast<std::size_t>(r.y);
  if (depth >= max_depth || keeps == 0 || keeps == here.size() || here.size() < 2) return;

  const double parent = gini_of(here);
  bool found = false;
  double best = 0.0;
  std::size_t best_f = 0;
  double best_v = 0.0;
  for (std::size_t f = 0; f < 5; ++f) {
    std::set<double> values;
    for (const auto& r : here) values.insert(r.x[f]);
    for (double v : values) {
      std::vector<Row> l, r;
      for (const auto& row : here) (row.x[f] <= v ? l : r).push_back(row);
      if (l.empty() || r.empty()) continue;
      const double n = static_cast<double>(here.size());
      const double dec = parent - static_cast<double>(l.size()) / n * gini_of(l) -
                         static_cast<double>(r.size()) / n * gini_of(r);
      if (!found || dec > best + tol) {
        found = true;
        best = dec;
        best_f = f;
        best_v = v;
      }
    }
  }
  if (!found) return;
  std::vector<std::size_t> l, r;
  for (auto k : ids) (rows[k].x[best_f] <= best_v ? l : r).push_back(k);
  out[me].leaf = false;
  out[me].feature = best_f;
  out[me].left_ids = l;
  out[me].decrease = best;
  const std::size_t li = out.size();
  exhaustive_grow(rows, l, depth + 1, max_depth, out, tol);
  const std::size_t ri = out.size();
  exhaustive_grow(rows, r, depth + 1, max_depth, out, tol);
  out[me].left = li;
  out[me].right = ri;
}

// ---------------------------------------------------------------------------
// Evaluation

inline double f1(double p, double r) { return 2.0 * p * r / (p + r); }

/// Pairwise overlap fraction over whitespace tokens (word mode, lowercase input).
inline double overlap_ratio(const std::map<std::string, std::vector<std::string>>& per_entity) {
  std::size_t total = 0, hit = 0;
  for (const auto& [e, list] : per_entity) {
    for (std::size_t a = 0; a < list.size(); ++a) {
      ++total;
      bool any = false;
      for (std::size_t b = 0; b < list.size() && !any; ++b) {
        if (a == b) continue;
        const std::string pa = " " + list[a] + " ", pb = " " + list[b] + " ";
        any = pb.find(pa) != std::string::npos || pa.find(pb) != std::string::npos;
      }
      hit += any ? 1 : 0;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(hit) / static_cast<double>(total);
}

}  // namespace oracle
