#include "llmvs/types.hpp"

#include "llmvs/error.hpp"

#include <algorithm>

namespace llmvs {

void EmbeddingPair::validate() const {
  if (q.rows() < 1) throw ShapeError("query embedding needs at least one row");
  if (a.rows() < 1) throw ShapeError("answer embedding needs at least one row");
  if (q.cols() < 1) throw ShapeError("embedding width must be >= 1");
  if (q.cols() != a.cols())
    throw ShapeError("query width " + std::to_string(q.cols()) + " != answer width " +
                     std::to_string(a.cols()));
  if (!q.allFinite() || !a.allFinite()) throw ShapeError("non-finite embedding entry");
}

ScoreSeries normalize_min_max(const ScoreSeries& s) {
  ScoreSeries out{s.scores, true};
  if (s.scores.empty()) return out;
  const auto [mn, mx] = std::minmax_element(s.scores.begin(), s.scores.end());
  const double lo = *mn;
  const double span = *mx - *mn;
  for (auto& v : out.scores) v = span > 0.0 ? (v - lo) / span : 0.0;
  return out;
}

}  // namespace llmvs
