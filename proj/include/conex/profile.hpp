#pragma once

#include <cstddef>
#include <vector>

namespace conex {

/// Per-token start/end probabilities for one record.
struct ProbabilityProfile {
  std::vector<double> p_start;
  std::vector<double> p_end;

  std::size_t size() const { return p_start.size(); }
  bool empty() const { return p_start.empty(); }
};

/// Pointer-style span score: start probability of the first token plus
/// end probability of the last. Lies in [0, 2].
inline double span_confidence(const ProbabilityProfile& profile, std::size_t i,
                              std::size_t j) {
  return profile.p_start[i] + profile.p_end[j];
}

}  // namespace conex
