#pragma once

#include <optional>
#include <span>

namespace llmvs {

/// Kendall's tau-b. nullopt when either input is constant.
/// Throws PreconditionError for unequal lengths or fewer than 2 entries.
std::optional<double> kendall_tau(std::span<const double> x, std::span<const double> y);

/// Spearman's rho with average ranks for ties. nullopt when either input is constant.
std::optional<double> spearman_rho(std::span<const double> x, std::span<const double> y);

}  // namespace llmvs
