#pragma once

#include "llmvs/aggregator.hpp"
#include "llmvs/dataset.hpp"
#include "llmvs/knapsack.hpp"
#include "llmvs/kts.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace llmvs {

/// How averaged-summary videos are scored.
enum class SumMeProtocol {
  mask_vs_average,   // knapsack summary mask vs. the averaged user summary
  scores_vs_average  // raw frame scores vs. the averaged user summary
};
std::string to_string(SumMeProtocol p);
SumMeProtocol summe_protocol_from_string(const std::string& s);

struct EvalOptions {
  SumMeProtocol summe_protocol = SumMeProtocol::mask_vs_average;
  KtsOptions kts;
};

/// Mean frame score of every shot. Throws InvariantError when the shots do
/// not partition the series.
std::vector<double> shot_scores(const ScoreSeries& frame_scores, std::span<const Shot> shots);

/// The record's change points, or KTS over its frame features. Throws
/// PreconditionError when neither is present.
ShotSegmentation segmentation_for(const VideoRecord& record, const KtsOptions& kts = {});

/// Knapsack summary of `scores` over `shots` under the 15% budget.
SummarySelection summarize(const ScoreSeries& scores, std::span<const Shot> shots);

struct VideoMetrics {
  std::string video_id;
  std::size_t fold = 0;
  std::optional<double> tau;
  std::optional<double> rho;
};

/// Per-user scores: tau/rho against each user row, averaged over users with
/// a defined value. Averaged summary: see SumMeProtocol.
/// Throws PreconditionError for a length mismatch or inconsistent annotations.
VideoMetrics evaluate_video(const VideoRecord& record, const ScoreSeries& scores,
                            const EvalOptions& options = {});

struct EvalReport {
  std::vector<VideoMetrics> videos;
  std::optional<double> mean_tau;
  std::optional<double> mean_rho;
  FoldSplit folds;
  std::string config_fingerprint;
  std::vector<std::string> warnings;
};

/// Fill means (ignoring undefined entries) and warnings from `videos`.
void finalize_report(EvalReport& report);

struct CrossValidationResult {
  EvalReport report;
  std::map<std::string, ScoreSeries> predictions;
  /// Loss history per fold.
  std::vector<std::vector<double>> loss_histories;
};

/// For each fold, train on the other folds' videos and evaluate the fold's
/// videos. `pooled` maps video_id to its T x D max-pooled embeddings.
CrossValidationResult cross_validate(std::span<const VideoRecord> records, const FoldSplit& folds,
                                     const std::map<std::string, Matrix>& pooled,
                                     const AggregatorConfig& aggregator,
                                     const EvalOptions& options = {},
                                     const std::string& config_fingerprint = {});

/// `video_id,fold,tau,rho` rows then a `#`-prefixed summary block.
std::string format_eval_report(const EvalReport& report);
void save_eval_report(const EvalReport& report, const std::filesystem::path& path);

/// Ground-truth curve used for plots: the regression target.
std::string score_curve_csv(const ScoreSeries& predicted, std::span<const double> ground_truth);
/// Static SVG line chart; both curves min-max scaled to the plot height.
std::string score_curve_svg(const std::string& title, const ScoreSeries& predicted,
                            std::span<const double> ground_truth);

}  // namespace llmvs
