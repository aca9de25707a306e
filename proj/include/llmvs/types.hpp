#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace llmvs {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

/// Inclusive frame range [start, end].
struct Shot {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t length() const { return end - start + 1; }
  friend bool operator==(const Shot&, const Shot&) = default;
};

enum class CaptionSource { generated, loaded };

struct CaptionSequence {
  std::vector<std::string> captions;
  CaptionSource source = CaptionSource::loaded;

  std::size_t size() const { return captions.size(); }
};

/// Output embeddings for one window: query-section rows and answer rows,
/// each D wide.
struct EmbeddingPair {
  Matrix q;
  Matrix a;

  Eigen::Index query_length() const { return q.rows(); }
  Eigen::Index answer_length() const { return a.rows(); }
  Eigen::Index width() const { return q.cols(); }

  /// Throws ShapeError unless both blocks have at least one row, equal
  /// widths, and finite entries.
  void validate() const;
};

/// Frame-level importance scores.
struct ScoreSeries {
  std::vector<double> scores;
  bool normalized = false;

  std::size_t size() const { return scores.size(); }
};

/// Min-max normalize into [0, 1]. A constant series maps to all zeros.
ScoreSeries normalize_min_max(const ScoreSeries& s);

}  // namespace llmvs
