#include "llmvs/captions.hpp"

#include "llmvs/error.hpp"
#include "llmvs/prompt.hpp"
#include "ordered_map.hpp"

#include <exception>

namespace llmvs {

namespace fs = std::filesystem;

std::string to_string(CaptionPromptStyle s) {
  return s == CaptionPromptStyle::generic ? "generic" : "central-background";
}

CaptionPromptStyle caption_prompt_style_from_string(const std::string& s) {
  if (s == "generic") return CaptionPromptStyle::generic;
  if (s == "central-background") return CaptionPromptStyle::central_background;
  throw ConfigError("unknown caption prompt style '" + s + "'");
}

CaptionSequence generate_captions(const VideoRecord& record, Backend& captioner,
                                  const CaptionOptions& options) {
  const std::size_t T = record.frame_count;
  if (record.frame_refs.size() != T) throw PreconditionError("frame_refs do not cover the video");
  const int cap = captioner.config().caption_token_cap;

  std::vector<std::string> done;
  if (options.progress_path && fs::exists(*options.progress_path)) {
    auto cf = load_captions(*options.progress_path);
    if (cf.frame_count != T)
      throw SchemaError("caption progress file is for a video of length " +
                            std::to_string(cf.frame_count),
                        "frames", record.video_id);
    done = std::move(cf.captions);
  }

  auto caption_frame = [&](std::size_t t) {
    const std::string& ref = record.frame_refs[t];
    std::string caption;
    if (options.style == CaptionPromptStyle::generic) {
      caption = captioner.caption_image(ref, kGenericCaptionPrompt);
    } else {
      caption = captioner.caption_image(ref, kCenterCaptionPrompt) + " " +
                captioner.caption_image(ref, kBackgroundCaptionPrompt);
      caption = cap_caption(caption, cap);
    }
    if (caption.empty()) throw ProtocolError("empty caption for frame " + std::to_string(t));
    return caption;
  };

  const std::size_t start = done.size();
  std::function<void(const std::vector<std::string>&)> persist;
  if (options.progress_path) {
    persist = [&](const std::vector<std::string>& fresh) {
      std::vector<std::string> prefix = done;
      prefix.insert(prefix.end(), fresh.begin(), fresh.end());
      save_captions(prefix, T, *options.progress_path);
    };
  }
  auto result = detail::ordered_map<std::string>(start, T, captioner.config().max_in_flight,
                                                 caption_frame, persist);
  done.insert(done.end(), result.results.begin(), result.results.end());
  if (result.error) {
    std::string why = "captioning failed";
    try {
      std::rethrow_exception(result.error);
    } catch (const std::exception& e) {
      why = e.what();
    }
    throw ResumableError("caption generation for " + record.video_id + " failed at frame " +
                             std::to_string(result.failed_at) + ": " + why,
                         result.failed_at);
  }
  if (options.progress_path) fs::remove(*options.progress_path);
  return CaptionSequence{std::move(done), CaptionSource::generated};
}

}  // namespace llmvs
