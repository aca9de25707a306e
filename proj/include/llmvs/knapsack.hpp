#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace llmvs {

struct SummarySelection {
  /// Ascending shot indices.
  std::vector<std::size_t> selected;
  /// One entry per frame when the lengths describe consecutive shots.
  std::vector<std::uint8_t> mask;
  std::size_t budget_frames = 0;
  double total_value = 0.0;
  std::size_t total_frames = 0;
};

/// Exact 0/1 knapsack over shots. Among optimal sets the lexicographically
/// smallest ascending index list wins (so the empty set when the optimum is 0).
/// The mask lays the shots out back to back in index order.
/// Throws PreconditionError for mismatched sizes or a zero length.
SummarySelection knapsack_select(std::span<const double> values, std::span<const std::size_t> lengths,
                                 std::size_t budget_frames);

/// floor(0.15 * T), computed in integers.
std::size_t summary_budget(std::size_t T);

}  // namespace llmvs
