#include "llmvs/evaluation.hpp"

#include "llmvs/error.hpp"
#include "llmvs/rank_correlation.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace llmvs {

std::string to_string(SumMeProtocol p) {
  return p == SumMeProtocol::mask_vs_average ? "mask-vs-average" : "scores-vs-average";
}

SumMeProtocol summe_protocol_from_string(const std::string& s) {
  if (s == "mask-vs-average") return SumMeProtocol::mask_vs_average;
  if (s == "scores-vs-average") return SumMeProtocol::scores_vs_average;
  throw ConfigError("unknown averaged-summary protocol '" + s + "'");
}

std::vector<double> shot_scores(const ScoreSeries& frame_scores, std::span<const Shot> shots) {
  validate_partition(shots, frame_scores.size());
  std::vector<double> out;
  out.reserve(shots.size());
  for (const auto& shot : shots) {
    double sum = 0.0;
    for (std::size_t t = shot.start; t <= shot.end; ++t) sum += frame_scores.scores[t];
    out.push_back(sum / static_cast<double>(shot.length()));
  }
  return out;
}

ShotSegmentation segmentation_for(const VideoRecord& record, const KtsOptions& kts) {
  if (record.change_points) {
    ShotSegmentation seg{*record.change_points};
    seg.validate(record.frame_count);
    return seg;
  }
  if (record.frame_features) return kts_segment(*record.frame_features, kts);
  throw PreconditionError("video " + record.video_id +
                          " has neither change points nor frame features for segmentation");
}

SummarySelection summarize(const ScoreSeries& scores, std::span<const Shot> shots) {
  const auto values = shot_scores(scores, shots);
  std::vector<std::size_t> lengths;
  lengths.reserve(shots.size());
  for (const auto& s : shots) lengths.push_back(s.length());
  return knapsack_select(values, lengths, summary_budget(scores.size()));
}

VideoMetrics evaluate_video(const VideoRecord& record, const ScoreSeries& scores,
                            const EvalOptions& options) {
  const std::size_t T = record.frame_count;
  if (scores.size() != T)
    throw PreconditionError(fmt::format("{} scores for video {} with {} frames", scores.size(),
                                        record.video_id, T));
  const auto& ann = record.annotations;
  VideoMetrics m;
  m.video_id = record.video_id;
  if (ann.mode == AnnotationMode::per_user_scores) {
    if (ann.user_scores.rows() < 1 || static_cast<std::size_t>(ann.user_scores.cols()) != T)
      throw PreconditionError("video " + record.video_id + " lacks per-user score annotations");
    double tau_sum = 0.0, rho_sum = 0.0;
    int tau_n = 0, rho_n = 0;
    std::vector<double> row(T);
    for (Eigen::Index u = 0; u < ann.user_scores.rows(); ++u) {
      for (std::size_t t = 0; t < T; ++t) row[t] = ann.user_scores(u, static_cast<Eigen::Index>(t));
      if (auto tau = kendall_tau(scores.scores, row)) {
        tau_sum += *tau;
        ++tau_n;
      }
      if (auto rho = spearman_rho(scores.scores, row)) {
        rho_sum += *rho;
        ++rho_n;
      }
    }
    if (tau_n > 0) m.tau = tau_sum / tau_n;
    if (rho_n > 0) m.rho = rho_sum / rho_n;
    return m;
  }
  if (ann.averaged_summary.size() != T)
    throw PreconditionError("video " + record.video_id + " lacks an averaged user summary");
  if (options.summe_protocol == SumMeProtocol::scores_vs_average) {
    m.tau = kendall_tau(scores.scores, ann.averaged_summary);
    m.rho = spearman_rho(scores.scores, ann.averaged_summary);
    return m;
  }
  const auto seg = segmentation_for(record, options.kts);
  const auto selection = summarize(scores, seg.boundaries);
  const std::vector<double> mask(selection.mask.begin(), selection.mask.end());
  m.tau = kendall_tau(mask, ann.averaged_summary);
  m.rho = spearman_rho(mask, ann.averaged_summary);
  return m;
}

void finalize_report(EvalReport& report) {
  double tau_sum = 0.0, rho_sum = 0.0;
  int tau_n = 0, rho_n = 0;
  report.warnings.clear();
  for (const auto& v : report.videos) {
    if (v.tau) {
      tau_sum += *v.tau;
      ++tau_n;
    } else {
      report.warnings.push_back("tau undefined for " + v.video_id + " (constant input); excluded");
    }
    if (v.rho) {
      rho_sum += *v.rho;
      ++rho_n;
    } else {
      report.warnings.push_back("rho undefined for " + v.video_id + " (constant input); excluded");
    }
  }
  report.mean_tau = tau_n > 0 ? std::optional<double>(tau_sum / tau_n) : std::nullopt;
  report.mean_rho = rho_n > 0 ? std::optional<double>(rho_sum / rho_n) : std::nullopt;
}

CrossValidationResult cross_validate(std::span<const VideoRecord> records, const FoldSplit& folds,
                                     const std::map<std::string, Matrix>& pooled,
                                     const AggregatorConfig& aggregator, const EvalOptions& options,
                                     const std::string& config_fingerprint) {
  folds.validate(records);
  for (const auto& r : records)
    if (!pooled.count(r.video_id))
      throw PreconditionError("no embeddings for video " + r.video_id);

  CrossValidationResult out;
  out.report.folds = folds;
  out.report.config_fingerprint = config_fingerprint;
  for (std::size_t fold = 0; fold < folds.k; ++fold) {
    std::vector<TrainingExample> train_set;
    for (const auto& r : records)
      if (folds.assignments.at(r.video_id) != fold)
        train_set.push_back(TrainingExample{pooled.at(r.video_id), r.annotations.regression_target});
    if (train_set.empty()) throw PreconditionError(fmt::format("fold {} leaves no training videos", fold));
    auto trained = train(train_set, aggregator);
    out.loss_histories.push_back(trained.loss_history);
    for (const auto& r : records) {
      if (folds.assignments.at(r.video_id) != fold) continue;
      auto scores = predict_pooled(pooled.at(r.video_id), trained.params, aggregator);
      auto m = evaluate_video(r, scores, options);
      m.fold = fold;
      out.report.videos.push_back(std::move(m));
      out.predictions.emplace(r.video_id, std::move(scores));
    }
  }
  finalize_report(out.report);
  return out;
}

namespace {

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt::format("{}", *v) : "undefined"; }

}  // namespace

std::string format_eval_report(const EvalReport& report) {
  std::string out = "video_id,fold,tau,rho\n";
  for (const auto& v : report.videos)
    out += fmt::format("{},{},{},{}\n", v.video_id, v.fold, fmt_opt(v.tau), fmt_opt(v.rho));
  std::size_t tau_n = 0, rho_n = 0;
  for (const auto& v : report.videos) {
    tau_n += v.tau.has_value();
    rho_n += v.rho.has_value();
  }
  out += fmt::format("# summary videos={} tau_defined={} rho_defined={}\n", report.videos.size(), tau_n,
                     rho_n);
  out += fmt::format("# mean_tau={}\n# mean_rho={}\n", fmt_opt(report.mean_tau), fmt_opt(report.mean_rho));
  out += fmt::format("# folds k={}", report.folds.k);
  for (const auto& [vid, fold] : report.folds.assignments) out += fmt::format(" {}:{}", vid, fold);
  out += "\n";
  out += "# config_fingerprint=" + (report.config_fingerprint.empty() ? "none" : report.config_fingerprint) + "\n";
  for (const auto& w : report.warnings) out += "# warning: " + w + "\n";
  return out;
}

void save_eval_report(const EvalReport& report, const std::filesystem::path& path) {
  write_file_atomic(path, format_eval_report(report));
}

std::string score_curve_csv(const ScoreSeries& predicted, std::span<const double> ground_truth) {
  if (predicted.size() != ground_truth.size())
    throw PreconditionError("predicted and ground-truth curves differ in length");
  std::string out = "t,predicted,ground_truth\n";
  for (std::size_t t = 0; t < predicted.size(); ++t)
    out += fmt::format("{},{},{}\n", t, predicted.scores[t], ground_truth[t]);
  return out;
}

namespace {

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string polyline(std::span<const double> v, double x0, double y0, double w, double h,
                     const char* color) {
  const auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
  const double lo = *lo_it, span = *hi_it - *lo_it;
  const double n = static_cast<double>(std::max<std::size_t>(v.size() - 1, 1));
  std::string pts;
  for (std::size_t t = 0; t < v.size(); ++t) {
    const double y = span > 0.0 ? (v[t] - lo) / span : 0.0;
    if (t > 0) pts += ' ';
    pts += fmt::format("{:.2f},{:.2f}", x0 + w * static_cast<double>(t) / n, y0 + h * (1.0 - y));
  }
  return fmt::format("  <polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
                     color, pts);
}

}  // namespace

std::string score_curve_svg(const std::string& title, const ScoreSeries& predicted,
                            std::span<const double> ground_truth) {
  if (predicted.size() != ground_truth.size())
    throw PreconditionError("predicted and ground-truth curves differ in length");
  if (predicted.size() == 0) throw PreconditionError("cannot plot an empty series");
  constexpr double W = 800, H = 300, L = 50, R = 20, Top = 40, B = 40;
  const double pw = W - L - R, ph = H - Top - B;
  std::string out = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\">\n"
      "  <rect width=\"{0}\" height=\"{1}\" fill=\"white\"/>\n"
      "  <text x=\"{2}\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">{3}</text>\n"
      "  <line x1=\"{2}\" y1=\"{4}\" x2=\"{5}\" y2=\"{4}\" stroke=\"black\"/>\n"
      "  <line x1=\"{2}\" y1=\"{6}\" x2=\"{2}\" y2=\"{4}\" stroke=\"black\"/>\n"
      "  <text x=\"{5}\" y=\"{7}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">frame ({8})</text>\n",
      W, H, L, xml_escape(title), Top + ph, L + pw, Top, H - 10, predicted.size());
  out += polyline(ground_truth, L, Top, pw, ph, "#1f77b4");
  out += polyline(predicted.scores, L, Top, pw, ph, "#ff7f0e");
  out += fmt::format(
      "  <text x=\"{0}\" y=\"{1}\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#1f77b4\">ground truth</text>\n"
      "  <text x=\"{2}\" y=\"{1}\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#ff7f0e\">predicted</text>\n"
      "</svg>\n",
      W - 200, 24, W - 100);
  return out;
}

}  // namespace llmvs
