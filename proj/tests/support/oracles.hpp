// Independent reference implementations used by the unit and acceptance
// tests. They favour obviousness over speed and share no code with the
// library beyond its public types.
#pragma once

#include "llmvs/aggregator.hpp"
#include "llmvs/types.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

namespace oracle {

// ---------------------------------------------------------------------------
// 0/1 knapsack by exhaustive search.

struct KnapsackBest {
  double value = 0.0;
  std::vector<std::size_t> selected;  // lexicographically smallest optimal set
};

// True when ascending index list a precedes b lexicographically (a proper
// prefix precedes).
inline bool lex_less(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  for (std::size_t i = 0; i < a.size() && i < b.size(); ++i)
    if (a[i] != b[i]) return a[i] < b[i];
  return a.size() < b.size();
}

// Subset values are summed from the highest selected index downwards, the
// association order a suffix dynamic program produces, so equal sets give
// bit-equal sums.
inline KnapsackBest knapsack(const std::vector<double>& values, const std::vector<std::size_t>& lengths,
                             std::size_t budget) {
  const std::size_t n = values.size();
  KnapsackBest best;
  std::vector<std::size_t> chosen;
  std::function<void(std::size_t, std::size_t, double)> rec = [&](std::size_t i, std::size_t used, double) {
    if (i == n) {
      double v = 0.0;
      for (std::size_t k = chosen.size(); k-- > 0;) v = values[chosen[k]] + v;
      if (v > best.value || (v == best.value && lex_less(chosen, best.selected))) {
        best.value = v;
        best.selected = chosen;
      }
      return;
    }
    rec(i + 1, used, 0.0);
    if (used + lengths[i] <= budget) {
      chosen.push_back(i);
      rec(i + 1, used + lengths[i], 0.0);
      chosen.pop_back();
    }
  };
  rec(0, 0, 0.0);
  return best;
}

// ---------------------------------------------------------------------------
// Rank statistics.

inline std::optional<double> kendall_tau_b(const std::vector<double>& x, const std::vector<double>& y) {
  std::int64_t concordant = 0, discordant = 0, tied_x_only = 0, tied_y_only = 0;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      const bool tx = x[i] == x[j], ty = y[i] == y[j];
      if (tx && ty) continue;
      if (tx) {
        ++tied_x_only;
      } else if (ty) {
        ++tied_y_only;
      } else if ((x[i] < x[j]) == (y[i] < y[j])) {
        ++concordant;
      } else {
        ++discordant;
      }
    }
  const std::int64_t a = concordant + discordant + tied_y_only;  // pairs untied in x
  const std::int64_t b = concordant + discordant + tied_x_only;  // pairs untied in y
  if (a == 0 || b == 0) return std::nullopt;
  return static_cast<double>(concordant - discordant) / std::sqrt(static_cast<double>(a) * static_cast<double>(b));
}

inline std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    double less = 0, equal = 0;
    for (double u : v) {
      less += u < v[i];
      equal += u == v[i];
    }
    r[i] = 1.0 + less + (equal - 1.0) / 2.0;
  }
  return r;
}

inline std::optional<double> pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i] / n;
    my += y[i] / n;
  }
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0 || syy == 0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

inline std::optional<double> spearman(const std::vector<double>& x, const std::vector<double>& y) {
  return pearson(average_ranks(x), average_ranks(y));
}

// ---------------------------------------------------------------------------
// Kernel temporal segmentation by enumeration (linear kernel).

// Sum over segments of squared distances to the segment mean.
inline double scatter(const llmvs::Matrix& x, const std::vector<llmvs::Shot>& shots) {
  double total = 0.0;
  for (const auto& s : shots) {
    const auto rows = x.middleRows(static_cast<Eigen::Index>(s.start), static_cast<Eigen::Index>(s.length()));
    const llmvs::RowVector mean = rows.colwise().mean();
    for (Eigen::Index r = 0; r < rows.rows(); ++r) total += (rows.row(r) - mean).squaredNorm();
  }
  return total;
}

inline double penalized_objective(const llmvs::Matrix& x, const std::vector<llmvs::Shot>& shots, double penalty) {
  const double T = static_cast<double>(x.rows());
  const double c = static_cast<double>(shots.size() - 1);
  const double pen = c == 0 ? 0.0 : c / (2.0 * T) * (std::log(T / c) + 1.0);
  return scatter(x, shots) / T + penalty * pen;
}

struct SegmentationBest {
  double objective = std::numeric_limits<double>::infinity();
  std::vector<llmvs::Shot> shots;
};

inline SegmentationBest brute_force_kts(const llmvs::Matrix& x, std::size_t max_segments, double penalty) {
  const std::size_t T = static_cast<std::size_t>(x.rows());
  SegmentationBest best;
  std::vector<llmvs::Shot> shots;
  std::function<void(std::size_t)> rec = [&](std::size_t start) {
    if (start == T) {
      const double obj = penalized_objective(x, shots, penalty);
      if (obj < best.objective) {
        best.objective = obj;
        best.shots = shots;
      }
      return;
    }
    if (shots.size() == max_segments) return;
    for (std::size_t end = start; end < T; ++end) {
      shots.push_back({start, end});
      rec(end + 1);
      shots.pop_back();
    }
  };
  rec(0);
  return best;
}

// ---------------------------------------------------------------------------
// Central finite differences over every aggregator parameter.

struct GradientCheck {
  double max_relative_error = 0.0;
  std::size_t entries = 0;
  std::string worst;
};

// relative error = |analytic - numeric| / max(|analytic|, |numeric|, floor)
inline GradientCheck finite_difference_check(std::span<const llmvs::TrainingExample> batch,
                                             const llmvs::AggregatorParams& params,
                                             const llmvs::AggregatorConfig& cfg, double eps, double floor) {
  const auto analytic = llmvs::backward(batch, params, cfg);
  llmvs::AggregatorParams probe = params;
  auto p = probe.named_tensors();
  const auto g = analytic.grads.named_tensors();
  GradientCheck out;
  for (std::size_t k = 0; k < p.size(); ++k) {
    llmvs::Matrix& w = *p[k].second;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      const double orig = w.data()[i];
      w.data()[i] = orig + eps;
      const double up = llmvs::batch_loss(batch, probe, cfg);
      w.data()[i] = orig - eps;
      const double down = llmvs::batch_loss(batch, probe, cfg);
      w.data()[i] = orig;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = g[k].second->data()[i];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      ++out.entries;
      if (rel > out.max_relative_error) {
        out.max_relative_error = rel;
        out.worst = p[k].first + "[" + std::to_string(i) + "]";
      }
    }
  }
  return out;
}

}  // namespace oracle
