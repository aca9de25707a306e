#pragma once

#include "llmvs/aggregator.hpp"
#include "llmvs/backend.hpp"
#include "llmvs/captions.hpp"
#include "llmvs/evaluation.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace llmvs {

/// Environment variable holding the backend bearer token.
inline constexpr const char* kAuthTokenEnv = "LLMVS_BACKEND_TOKEN";

struct RunConfig {
  std::filesystem::path dataset;
  std::filesystem::path output_dir = "out";
  std::uint64_t seed = 0;
  std::size_t window = 7;
  std::size_t folds = 5;
  std::optional<std::filesystem::path> fold_file;

  BackendConfig captioner;
  BackendConfig scorer;
  CaptionPromptStyle caption_style = CaptionPromptStyle::generic;
  /// Scoring template file; the built-in template when unset.
  std::optional<std::filesystem::path> prompt_template;

  AggregatorConfig aggregator;
  EvalOptions evaluation;

  bool use_mock = false;
  /// Mock fixture JSON; falls back to <dataset>/mock_fixture.json, then the
  /// built-in fixture.
  std::optional<std::filesystem::path> mock_fixture;

  /// Throws ConfigError. With `check_paths`, referenced files must exist.
  void validate(bool check_paths) const;
};

RunConfig default_run_config();

/// JSON document; unknown keys are rejected. Relative paths resolve against
/// `base_dir`.
RunConfig parse_run_config(const std::string& json_text, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);
/// Canonical JSON (sorted keys, 2-space indent), auth tokens omitted.
std::string dump_run_config(const RunConfig& config);
/// SHA-256 of the canonical JSON.
std::string config_fingerprint(const RunConfig& config);

}  // namespace llmvs
