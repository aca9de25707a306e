#pragma once

#include "llmvs/backend.hpp"
#include "llmvs/dataset.hpp"

#include <filesystem>
#include <optional>

namespace llmvs {

enum class CaptionPromptStyle {
  generic,            // one generic description prompt
  central_background  // separate center and background prompts, joined
};

std::string to_string(CaptionPromptStyle s);
CaptionPromptStyle caption_prompt_style_from_string(const std::string& s);

struct CaptionOptions {
  CaptionPromptStyle style = CaptionPromptStyle::generic;
  /// Completed prefix is written here; an existing file resumes generation.
  std::optional<std::filesystem::path> progress_path;
};

/// Caption every frame of `record` independently, in frame order. On a
/// backend failure at frame i the prefix [0, i) is persisted to the progress
/// file and a ResumableError carrying i is thrown.
CaptionSequence generate_captions(const VideoRecord& record, Backend& captioner,
                                  const CaptionOptions& options = {});

}  // namespace llmvs
