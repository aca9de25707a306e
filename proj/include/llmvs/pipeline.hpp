#pragma once

#include "llmvs/backend.hpp"
#include "llmvs/config.hpp"
#include "llmvs/dataset.hpp"
#include "llmvs/evaluation.hpp"
#include "llmvs/prompt.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

namespace llmvs {

/// Dataset, template and backends for one run. Stage functions write their
/// artifacts under config.output_dir:
///   captions/<id>.txt        zero_shot/<id>.scores     embeddings/<id>/<t>.emb
///   model.ckpt               loss_history.csv          folds.txt
///   eval_report.csv          predictions/<id>.scores   summaries/<id>.mask
///   plots/<id>.csv|.svg      MANIFEST
struct PipelineContext {
  RunConfig config;
  std::vector<VideoRecord> records;
  PromptTemplate prompt_template;
  std::unique_ptr<Backend> captioner;
  std::unique_ptr<Backend> scorer;
  std::ostream* log = nullptr;

  /// Validates the config, loads the dataset and builds the backends.
  static PipelineContext open(const RunConfig& config, std::ostream* log = nullptr);

  std::filesystem::path out(const std::filesystem::path& rel) const { return config.output_dir / rel; }
};

/// Mock backend when config.use_mock is set, HTTP client otherwise.
std::unique_ptr<Backend> make_backend(const BackendConfig& backend, const RunConfig& config);
MockFixture resolve_mock_fixture(const RunConfig& config);

/// Captions for every record lacking them: loaded from captions/ when
/// complete there, generated otherwise.
void run_caption(PipelineContext& ctx);
void run_zero_shot(PipelineContext& ctx);
/// Per-video T x D max-pooled embeddings (computing and caching as needed).
std::map<std::string, Matrix> run_embed(PipelineContext& ctx);
/// Train on every video; writes the checkpoint and loss history.
TrainResult run_train(PipelineContext& ctx);

enum class EvalMethod { llmvs, zero_shot };
EvalMethod eval_method_from_string(const std::string& s);

FoldSplit resolve_folds(PipelineContext& ctx);
EvalReport run_evaluate(PipelineContext& ctx, EvalMethod method);
/// Knapsack summaries of the best available prediction per video.
void run_summarize(PipelineContext& ctx);
void run_export_plots(PipelineContext& ctx);

/// Frame scores used by summarize/export-plots: predictions/, then
/// zero_shot/, then the trained checkpoint.
ScoreSeries available_scores(PipelineContext& ctx, const VideoRecord& record);

void save_mask(const SummarySelection& selection, const std::filesystem::path& path);
std::vector<std::uint8_t> load_mask(const std::filesystem::path& path);

/// Rewrite <dir>/MANIFEST: `<sha256>  <relative path>` for every other file.
void write_manifest(const std::filesystem::path& dir);

}  // namespace llmvs
