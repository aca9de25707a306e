#pragma once

#include "llmvs/backend.hpp"
#include "llmvs/dataset.hpp"
#include "llmvs/prompt.hpp"

#include <filesystem>
#include <optional>
#include <string_view>

namespace llmvs {

inline constexpr int kMinLocalScore = 0;
inline constexpr int kMaxLocalScore = 10;

struct LocalScore {
  std::size_t t = 0;
  int value = 0;
};

/// First integer after the token "score". Throws ParseError when there is
/// none and RangeError when it falls outside [0, 10].
int parse_score(std::string_view answer);

/// Canonical answer line for a score, e.g. "score: 7".
std::string format_score(int value);

struct ScoringOptions {
  std::size_t window = 7;
  const PromptTemplate* prompt_template = nullptr;  // default_template() when null
  /// Raw answers for the completed prefix; an existing file resumes.
  std::optional<std::filesystem::path> progress_path;
};

struct ZeroShotResult {
  /// value / 10 per frame.
  ScoreSeries scores;
  /// Frames whose answer never parsed and were filled from a neighbor.
  std::vector<bool> filled;
  std::vector<std::string> raw_answers;

  std::size_t filled_count() const;
};

/// Fill gaps with the nearest parsed neighbor; the left neighbor wins ties.
/// Throws PreconditionError when no value is present at all.
std::vector<double> fill_nearest(const std::vector<std::optional<double>>& values);

/// In-context zero-shot scoring: one prompt per frame, parsed integer
/// answers rescaled to [0, 1]. Unparsable answers are retried once, then
/// filled and flagged.
ZeroShotResult score_video_zero_shot(const VideoRecord& record, Backend& scorer,
                                     const ScoringOptions& options = {});

struct EmbedOptions {
  std::size_t window = 7;
  const PromptTemplate* prompt_template = nullptr;
  /// Per-frame cache root (see embedding_path). Cached frames skip the backend.
  std::optional<std::filesystem::path> cache_dir;
};

/// Query/answer output embeddings for every frame's window prompt.
std::vector<EmbeddingPair> embed_video(const VideoRecord& record, Backend& scorer,
                                       const EmbedOptions& options = {});

}  // namespace llmvs
