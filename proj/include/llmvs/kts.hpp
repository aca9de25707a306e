#pragma once

#include "llmvs/types.hpp"

#include <string>
#include <vector>

namespace llmvs {

struct ShotSegmentation {
  std::vector<Shot> boundaries;

  std::size_t size() const { return boundaries.size(); }
  /// Throws InvariantError unless the shots partition [0, T-1].
  void validate(std::size_t T) const;
};

enum class KtsKernel { linear, rbf };
std::string to_string(KtsKernel k);
KtsKernel kts_kernel_from_string(const std::string& s);

struct KtsOptions {
  std::size_t max_segments = 100;
  double penalty = 1.0;
  KtsKernel kernel = KtsKernel::linear;
  /// RBF bandwidth sigma: k(x, y) = exp(-|x - y|^2 / (2 sigma^2)).
  double rbf_sigma = 1.0;
};

/// Kernel temporal segmentation. Minimizes the total within-segment kernel
/// scatter for each segment count m <= max_segments by dynamic programming,
/// then picks m by
///   scatter_m / T + penalty * (c / (2T)) * (log(T / c) + 1),   c = m - 1
/// (no penalty term for a single segment). Ties go to fewer segments.
/// Throws PreconditionError for an empty input or max_segments outside [1, T].
ShotSegmentation kts_segment(const Matrix& features, std::size_t max_segments, double penalty,
                             KtsKernel kernel = KtsKernel::linear, double rbf_sigma = 1.0);
ShotSegmentation kts_segment(const Matrix& features, const KtsOptions& options);

}  // namespace llmvs
