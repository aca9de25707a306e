#include "llmvs/pipeline.hpp"

#include "llmvs/aggregator.hpp"
#include "llmvs/captions.hpp"
#include "llmvs/error.hpp"
#include "llmvs/hash.hpp"
#include "llmvs/local_scorer.hpp"
#include "text_io.hpp"

#include <fmt/format.h>

#include <algorithm>

namespace llmvs {

namespace fs = std::filesystem;

namespace {

void note(const PipelineContext& ctx, const std::string& msg) {
  if (ctx.log) *ctx.log << msg << '\n';
}

}  // namespace

MockFixture resolve_mock_fixture(const RunConfig& config) {
  if (config.mock_fixture) return MockFixture::from_json_file(config.mock_fixture->string());
  const fs::path beside = fs::is_directory(config.dataset) ? config.dataset / "mock_fixture.json"
                                                           : config.dataset.parent_path() / "mock_fixture.json";
  if (!config.dataset.empty() && fs::exists(beside)) return MockFixture::from_json_file(beside.string());
  return default_mock_fixture();
}

std::unique_ptr<Backend> make_backend(const BackendConfig& backend, const RunConfig& config) {
  if (config.use_mock) return std::make_unique<MockBackend>(backend, resolve_mock_fixture(config));
  return std::make_unique<HttpBackend>(backend);
}

PipelineContext PipelineContext::open(const RunConfig& config, std::ostream* log) {
  config.validate(true);
  PipelineContext ctx;
  ctx.config = config;
  ctx.log = log;
  ctx.records = load_dataset(config.dataset);
  ctx.prompt_template = config.prompt_template ? load_template(*config.prompt_template) : default_template();
  ctx.captioner = make_backend(config.captioner, config);
  ctx.scorer = make_backend(config.scorer, config);
  return ctx;
}

void run_caption(PipelineContext& ctx) {
  for (auto& r : ctx.records) {
    if (r.captions) continue;
    const fs::path path = ctx.out("captions") / (r.video_id + ".txt");
    if (fs::exists(path)) {
      auto cf = load_captions(path);
      if (cf.complete() && cf.frame_count == r.frame_count) {
        r.captions = CaptionSequence{std::move(cf.captions), CaptionSource::generated};
        continue;
      }
    }
    note(ctx, "captioning " + r.video_id);
    CaptionOptions opts;
    opts.style = ctx.config.caption_style;
    opts.progress_path = ctx.out("captions") / (r.video_id + ".txt.partial");
    auto seq = generate_captions(r, *ctx.captioner, opts);
    save_captions(seq.captions, r.frame_count, path);
    r.captions = std::move(seq);
  }
}

void run_zero_shot(PipelineContext& ctx) {
  run_caption(ctx);
  for (const auto& r : ctx.records) {
    note(ctx, "zero-shot scoring " + r.video_id);
    ScoringOptions opts;
    opts.window = ctx.config.window;
    opts.prompt_template = &ctx.prompt_template;
    opts.progress_path = ctx.out("zero_shot") / (r.video_id + ".answers.partial");
    const auto result = score_video_zero_shot(r, *ctx.scorer, opts);
    save_scores(result.scores, ctx.out("zero_shot") / (r.video_id + ".scores"), result.filled);
    if (result.filled_count() > 0)
      note(ctx, fmt::format("warning: {} frames of {} filled from neighbors", result.filled_count(),
                            r.video_id));
  }
}

std::map<std::string, Matrix> run_embed(PipelineContext& ctx) {
  run_caption(ctx);
  std::map<std::string, Matrix> pooled;
  for (const auto& r : ctx.records) {
    note(ctx, "embedding " + r.video_id);
    EmbedOptions opts;
    opts.window = ctx.config.window;
    opts.prompt_template = &ctx.prompt_template;
    opts.cache_dir = ctx.out("embeddings");
    const auto pairs = embed_video(r, *ctx.scorer, opts);
    pooled.emplace(r.video_id, max_pool_video(pairs, ctx.config.aggregator));
  }
  return pooled;
}

TrainResult run_train(PipelineContext& ctx) {
  const auto pooled = run_embed(ctx);
  std::vector<TrainingExample> examples;
  for (const auto& r : ctx.records)
    examples.push_back(TrainingExample{pooled.at(r.video_id), r.annotations.regression_target});
  note(ctx, fmt::format("training on {} videos", examples.size()));
  auto result = train(examples, ctx.config.aggregator);
  save_checkpoint(result.params, ctx.config.aggregator, ctx.out("model.ckpt"));
  save_loss_history(result.loss_history, ctx.out("loss_history.csv"));
  return result;
}

EvalMethod eval_method_from_string(const std::string& s) {
  if (s == "llmvs") return EvalMethod::llmvs;
  if (s == "zero-shot") return EvalMethod::zero_shot;
  throw ConfigError("unknown evaluation method '" + s + "'");
}

FoldSplit resolve_folds(PipelineContext& ctx) {
  FoldSplit folds = ctx.config.fold_file ? load_folds(*ctx.config.fold_file)
                                         : make_folds(ctx.records, ctx.config.folds, ctx.config.seed);
  folds.validate(ctx.records);
  save_folds(folds, ctx.out("folds.txt"));
  return folds;
}

EvalReport run_evaluate(PipelineContext& ctx, EvalMethod method) {
  const FoldSplit folds = resolve_folds(ctx);
  const std::string fingerprint = config_fingerprint(ctx.config);
  EvalReport report;
  if (method == EvalMethod::llmvs) {
    const auto pooled = run_embed(ctx);
    auto cv = cross_validate(ctx.records, folds, pooled, ctx.config.aggregator, ctx.config.evaluation,
                             fingerprint);
    for (const auto& [vid, scores] : cv.predictions)
      save_scores(scores, ctx.out("predictions") / (vid + ".scores"));
    for (std::size_t k = 0; k < cv.loss_histories.size(); ++k)
      save_loss_history(cv.loss_histories[k], ctx.out(fmt::format("loss_history_fold{}.csv", k)));
    report = std::move(cv.report);
  } else {
    run_zero_shot(ctx);
    report.folds = folds;
    report.config_fingerprint = fingerprint;
    for (const auto& r : ctx.records) {
      const auto scores = load_scores(ctx.out("zero_shot") / (r.video_id + ".scores")).series;
      auto m = evaluate_video(r, scores, ctx.config.evaluation);
      m.fold = folds.assignments.at(r.video_id);
      report.videos.push_back(std::move(m));
    }
    finalize_report(report);
  }
  for (const auto& w : report.warnings) note(ctx, "warning: " + w);
  save_eval_report(report, ctx.out("eval_report.csv"));
  return report;
}

ScoreSeries available_scores(PipelineContext& ctx, const VideoRecord& r) {
  for (const char* dir : {"predictions", "zero_shot"}) {
    const fs::path p = ctx.out(dir) / (r.video_id + ".scores");
    if (fs::exists(p)) {
      auto s = load_scores(p).series;
      if (s.size() != r.frame_count)
        throw SchemaError("score file length does not match the video", "frames", r.video_id);
      return s;
    }
  }
  if (fs::exists(ctx.out("model.ckpt"))) {
    const auto ck = load_checkpoint(ctx.out("model.ckpt"));
    run_caption(ctx);
    EmbedOptions opts;
    opts.window = ctx.config.window;
    opts.prompt_template = &ctx.prompt_template;
    opts.cache_dir = ctx.out("embeddings");
    const auto& rec = *std::find_if(ctx.records.begin(), ctx.records.end(),
                                    [&](const VideoRecord& x) { return x.video_id == r.video_id; });
    return predict(embed_video(rec, *ctx.scorer, opts), ck.params, ck.config);
  }
  throw PreconditionError("no scores for " + r.video_id +
                          ": run evaluate, score-zero-shot or train first");
}

void save_mask(const SummarySelection& s, const fs::path& path) {
  std::string out = fmt::format("#llmvs-mask v1 frames={} budget={} selected_frames={} shots={}\n",
                                s.mask.size(), s.budget_frames, s.total_frames, s.selected.size());
  for (auto m : s.mask) out += m ? "1\n" : "0\n";
  write_file_atomic(path, out);
}

std::vector<std::uint8_t> load_mask(const fs::path& path) {
  const std::string text = read_file(path);
  std::vector<std::string> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    lines.push_back(text.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos));
    pos = nl == std::string::npos ? text.size() : nl + 1;
  }
  if (lines.empty()) throw SchemaError("empty mask file", "header");
  const auto header = detail::parse_header(lines[0], "mask");
  const std::size_t T = detail::parse_size(header.get("frames"), "frames");
  if (lines.size() - 1 != T) throw SchemaError("mask length does not match header", "frames");
  std::vector<std::uint8_t> mask;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i] != "0" && lines[i] != "1") throw SchemaError("mask entries must be 0 or 1", "mask");
    mask.push_back(lines[i] == "1");
  }
  return mask;
}

void run_summarize(PipelineContext& ctx) {
  for (const auto& r : ctx.records) {
    const auto scores = available_scores(ctx, r);
    const auto seg = segmentation_for(r, ctx.config.evaluation.kts);
    const auto selection = summarize(scores, seg.boundaries);
    save_mask(selection, ctx.out("summaries") / (r.video_id + ".mask"));
  }
}

void run_export_plots(PipelineContext& ctx) {
  for (const auto& r : ctx.records) {
    const auto scores = available_scores(ctx, r);
    const auto& gt = r.annotations.regression_target;
    write_file_atomic(ctx.out("plots") / (r.video_id + ".csv"), score_curve_csv(scores, gt));
    write_file_atomic(ctx.out("plots") / (r.video_id + ".svg"), score_curve_svg(r.video_id, scores, gt));
  }
}

void write_manifest(const fs::path& dir) {
  if (!fs::exists(dir)) return;
  std::vector<std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const std::string rel = fs::relative(e.path(), dir).generic_string();
    if (rel == "MANIFEST" || rel.ends_with(".tmp")) continue;
    files.push_back(rel);
  }
  std::sort(files.begin(), files.end());
  std::string out = "#llmvs-manifest v1 files=" + std::to_string(files.size()) + "\n";
  for (const auto& f : files) out += sha256_file(dir / f) + "  " + f + "\n";
  write_file_atomic(dir / "MANIFEST", out);
}

}  // namespace llmvs
