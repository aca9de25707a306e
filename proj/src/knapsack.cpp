#include "llmvs/knapsack.hpp"

#include "llmvs/error.hpp"

#include <cmath>

namespace llmvs {

std::size_t summary_budget(std::size_t T) { return (15 * T) / 100; }

SummarySelection knapsack_select(std::span<const double> values, std::span<const std::size_t> lengths,
                                 std::size_t budget) {
  if (values.size() != lengths.size())
    throw PreconditionError("knapsack values and lengths differ in size");
  std::size_t total_length = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (lengths[i] == 0) throw PreconditionError("knapsack item with zero length");
    if (!std::isfinite(values[i])) throw PreconditionError("knapsack value is not finite");
    total_length += lengths[i];
  }
  const std::size_t n = values.size();
  const std::size_t cap = std::min(budget, total_length);

  // best[i][c]: optimum over items i..n-1 with capacity c.
  std::vector<std::vector<double>> best(n + 1, std::vector<double>(cap + 1, 0.0));
  for (std::size_t i = n; i-- > 0;)
    for (std::size_t c = 0; c <= cap; ++c) {
      double v = best[i + 1][c];
      if (lengths[i] <= c) v = std::max(v, values[i] + best[i + 1][c - lengths[i]]);
      best[i][c] = v;
    }

  SummarySelection out;
  out.budget_frames = budget;
  out.total_value = n > 0 ? best[0][cap] : 0.0;
  std::size_t c = cap;
  for (std::size_t i = 0; i < n && best[i][c] != 0.0; ++i) {
    if (lengths[i] <= c && values[i] + best[i + 1][c - lengths[i]] == best[i][c]) {
      out.selected.push_back(i);
      c -= lengths[i];
    }
  }
  if (out.selected.empty()) out.total_value = 0.0;
  out.mask.reserve(total_length);
  std::size_t next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const bool chosen = next < out.selected.size() && out.selected[next] == i;
    if (chosen) {
      ++next;
      out.total_frames += lengths[i];
    }
    out.mask.insert(out.mask.end(), lengths[i], chosen ? 1 : 0);
  }
  return out;
}

}  // namespace llmvs
