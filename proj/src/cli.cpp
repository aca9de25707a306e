#include "llmvs/cli.hpp"

#include "llmvs/config.hpp"
#include "llmvs/error.hpp"
#include "llmvs/pipeline.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include <cstdlib>
#include <optional>

namespace llmvs {

namespace {

void error_line(std::ostream& err, const std::string& kind, const std::string& message) {
  nlohmann::json j{{"error", {{"kind", kind}, {"message", message}}}};
  err << j.dump() << '\n';
}

struct Flags {
  std::string config, dataset, backend_url, out, fold_file, method = "llmvs";
  std::optional<std::size_t> window;
  std::optional<std::uint64_t> seed;
  bool mock = false;
};

RunConfig resolve_config(const Flags& f) {
  RunConfig c = f.config.empty() ? default_run_config() : load_run_config(f.config);
  if (!f.dataset.empty()) c.dataset = f.dataset;
  if (!f.backend_url.empty()) c.captioner.endpoint = c.scorer.endpoint = f.backend_url;
  if (!f.out.empty()) c.output_dir = f.out;
  if (!f.fold_file.empty()) c.fold_file = f.fold_file;
  if (f.window) c.window = *f.window;
  if (f.seed) c.seed = *f.seed;
  c.aggregator.seed = c.seed;
  if (f.mock) c.use_mock = true;
  if (const char* token = std::getenv(kAuthTokenEnv)) c.captioner.auth_token = c.scorer.auth_token = token;
  return c;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"LLM-based video summarization pipeline", "llmvs"};
  app.require_subcommand(1);
  app.fallthrough();
  Flags f;
  app.add_option("--config", f.config, "Run configuration (JSON)");
  app.add_option("--dataset", f.dataset, "Dataset manifest or directory");
  app.add_option("--backend-url", f.backend_url, "Endpoint for both captioner and scorer");
  app.add_option("--window", f.window, "Odd window size w");
  app.add_option("--seed", f.seed, "Seed for folds, initialization and shuffling");
  app.add_option("--out", f.out, "Output directory");
  app.add_option("--fold-file", f.fold_file, "Fixed fold assignment");
  app.add_flag("--mock", f.mock, "Use the in-process mock backend");

  const std::vector<std::pair<const char*, const char*>> commands = {
      {"caption", "Caption every frame"},
      {"score-zero-shot", "Score frames by parsing in-context answers"},
      {"embed", "Extract query/answer embeddings"},
      {"train", "Train the aggregator on all videos"},
      {"evaluate", "Cross-validate and write the evaluation report"},
      {"summarize", "Write knapsack summary masks"},
      {"export-plots", "Write score-curve CSV and SVG files"},
      {"validate-config", "Validate and print the resolved configuration"}};
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    if (std::string(name) == "evaluate")
      sub->add_option("--method", f.method, "llmvs or zero-shot")->check(CLI::IsMember({"llmvs", "zero-shot"}));
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();  // program name
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    error_line(err, "usage", e.what());
    return 2;
  }
  const std::string cmd = app.get_subcommands().front()->get_name();

  try {
    RunConfig config = resolve_config(f);
    if (cmd == "validate-config") {
      config.validate(!config.dataset.empty());
      out << dump_run_config(config);
      return 0;
    }
    auto ctx = PipelineContext::open(config, &err);
    std::filesystem::create_directories(config.output_dir);
    if (cmd == "caption") {
      run_caption(ctx);
    } else if (cmd == "score-zero-shot") {
      run_zero_shot(ctx);
    } else if (cmd == "embed") {
      run_embed(ctx);
    } else if (cmd == "train") {
      const auto result = run_train(ctx);
      if (!result.loss_history.empty()) out << fmt::format("final training loss {}\n", result.loss_history.back());
    } else if (cmd == "evaluate") {
      const auto report = run_evaluate(ctx, eval_method_from_string(f.method));
      auto show = [](const std::optional<double>& v) { return v ? fmt::format("{:.4f}", *v) : "undefined"; };
      out << fmt::format("mean tau {} mean rho {} over {} videos\n", show(report.mean_tau),
                         show(report.mean_rho), report.videos.size());
    } else if (cmd == "summarize") {
      run_summarize(ctx);
    } else if (cmd == "export-plots") {
      run_export_plots(ctx);
    }
    write_file_atomic(config.output_dir / "config.json", dump_run_config(config));
    write_manifest(config.output_dir);
    return 0;
  } catch (const Error& e) {
    error_line(err, e.kind(), e.what());
  } catch (const std::exception& e) {
    error_line(err, "internal", e.what());
  }
  return 1;
}

}  // namespace llmvs
