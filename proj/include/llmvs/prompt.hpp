#pragma once

#include "llmvs/backend.hpp"
#include "llmvs/types.hpp"

#include <array>
#include <filesystem>
#include <span>
#include <string>

namespace llmvs {

/// Sliding window around a center frame, clamped at the sequence edges.
struct WindowSpec {
  std::size_t center = 0;
  std::size_t lo = 0;
  std::size_t hi = 0;
  /// 1-based position of the center inside [lo, hi].
  std::size_t center_position = 1;
  std::size_t window_size = 7;

  std::size_t length() const { return hi - lo + 1; }
  friend bool operator==(const WindowSpec&, const WindowSpec&) = default;
};

/// Window of nominal size `w` (odd, >= 3) around frame `t` of a length-T video.
WindowSpec build_window(std::size_t t, std::size_t w, std::size_t T);

struct PromptExample {
  std::string question;
  std::string answer;
};

/// Instruction, three fixed question/answer examples, and a query pattern
/// with `{n}`, `{c}` and `{captions}` placeholders.
struct PromptTemplate {
  std::string instruction;
  std::array<PromptExample, 3> examples;
  std::string query;

  /// Throws TemplateError when a placeholder is missing or a section is empty.
  void validate() const;
};

/// The shipped scoring prompt: instruction and three in-context examples
/// drawn from SumMe training captions.
const PromptTemplate& default_template();

/// Parse the `[[INSTRUCTION]]` / `[[EXAMPLE]]` / `[[ANSWER]]` / `[[QUERY]]`
/// marker format (docs/prompt_template.md).
PromptTemplate parse_template(const std::string& text);
PromptTemplate load_template(const std::filesystem::path& path);
std::string serialize_template(const PromptTemplate& t);

struct WindowPrompt {
  std::string text;
  CharSpan query_span;
  WindowSpec window;

  /// Instruction plus examples, identical for every window.
  std::string_view prefix() const { return std::string_view(text).substr(0, query_span.begin); }
  std::string_view query() const {
    return std::string_view(text).substr(query_span.begin, query_span.size());
  }
};

/// Query section alone: the query pattern with numbered captions substituted.
std::string render_query(std::span<const std::string> window_captions, std::size_t center_position,
                         const PromptTemplate& tmpl);

/// Fixed prefix shared by every window.
std::string render_prefix(const PromptTemplate& tmpl);

WindowPrompt render_prompt(const CaptionSequence& captions, const WindowSpec& spec,
                           const PromptTemplate& tmpl = default_template());

/// Captioning prompts.
inline constexpr const char* kGenericCaptionPrompt = "Provide a detailed one-sentence description.";
inline constexpr const char* kCenterCaptionPrompt =
    "Describe the center part of this image in one detailed sentence.";
inline constexpr const char* kBackgroundCaptionPrompt =
    "Describe the background part of this image in one detailed sentence.";

}  // namespace llmvs
