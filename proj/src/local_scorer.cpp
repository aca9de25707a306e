#include "llmvs/local_scorer.hpp"

#include "llmvs/error.hpp"
#include "ordered_map.hpp"

#include <algorithm>
#include <cctype>
#include <exception>

namespace llmvs {

namespace fs = std::filesystem;

int parse_score(std::string_view answer) {
  std::string lower(answer);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  const auto at = lower.find("score");
  if (at == std::string::npos) throw ParseError("no 'score' in answer", std::string(answer));
  std::size_t i = at + 5;
  while (i < lower.size() && !std::isdigit(static_cast<unsigned char>(lower[i]))) ++i;
  if (i == lower.size()) throw ParseError("no integer after 'score'", std::string(answer));
  const bool negative = i > 0 && lower[i - 1] == '-';
  long value = 0;
  while (i < lower.size() && std::isdigit(static_cast<unsigned char>(lower[i]))) {
    value = value * 10 + (lower[i] - '0');
    if (value > 1000000) break;
    ++i;
  }
  if (negative) value = -value;
  if (value < kMinLocalScore || value > kMaxLocalScore)
    throw RangeError("score " + std::to_string(value) + " outside [0, 10]", std::string(answer));
  return static_cast<int>(value);
}

std::string format_score(int value) {
  if (value < kMinLocalScore || value > kMaxLocalScore)
    throw PreconditionError("score outside [0, 10]");
  return "score: " + std::to_string(value);
}

std::size_t ZeroShotResult::filled_count() const {
  return static_cast<std::size_t>(std::count(filled.begin(), filled.end(), true));
}

std::vector<double> fill_nearest(const std::vector<std::optional<double>>& values) {
  const std::size_t n = values.size();
  std::vector<double> out(n, 0.0);
  if (std::none_of(values.begin(), values.end(), [](const auto& v) { return v.has_value(); }))
    throw PreconditionError("no parsable score in the whole series");
  for (std::size_t t = 0; t < n; ++t) {
    if (values[t]) {
      out[t] = *values[t];
      continue;
    }
    std::optional<std::size_t> left, right;
    for (std::size_t d = 1; d <= n && !(left && right); ++d) {
      if (!left && t >= d && values[t - d]) left = t - d;
      if (!right && t + d < n && values[t + d]) right = t + d;
      if (left || right) break;
    }
    out[t] = left ? *values[*left] : *values[*right];
  }
  return out;
}

namespace {

std::string describe(const std::exception_ptr& e) {
  try {
    std::rethrow_exception(e);
  } catch (const std::exception& ex) {
    return ex.what();
  }
}

}  // namespace

ZeroShotResult score_video_zero_shot(const VideoRecord& record, Backend& scorer,
                                     const ScoringOptions& options) {
  if (!record.captions) throw PreconditionError("zero-shot scoring needs captions for " + record.video_id);
  const auto& tmpl = options.prompt_template ? *options.prompt_template : default_template();
  const std::size_t T = record.frame_count;

  std::vector<std::string> answers;
  if (options.progress_path && fs::exists(*options.progress_path)) {
    auto cf = load_captions(*options.progress_path);
    if (cf.frame_count != T) throw SchemaError("answer progress file length mismatch", "frames");
    answers = std::move(cf.captions);
  }

  auto score_frame = [&](std::size_t t) {
    const auto prompt = render_prompt(*record.captions, build_window(t, options.window, T), tmpl);
    return scorer.complete_text(prompt.text).text;
  };
  std::function<void(const std::vector<std::string>&)> persist;
  if (options.progress_path) {
    persist = [&](const std::vector<std::string>& fresh) {
      auto prefix = answers;
      prefix.insert(prefix.end(), fresh.begin(), fresh.end());
      save_captions(prefix, T, *options.progress_path);
    };
  }
  auto result = detail::ordered_map<std::string>(answers.size(), T, scorer.config().max_in_flight,
                                                 score_frame, persist);
  answers.insert(answers.end(), result.results.begin(), result.results.end());
  if (result.error)
    throw ResumableError("zero-shot scoring of " + record.video_id + " failed: " +
                             describe(result.error),
                         result.failed_at);

  ZeroShotResult out;
  out.raw_answers = answers;
  std::vector<std::optional<double>> values(T);
  for (std::size_t t = 0; t < T; ++t) {
    for (int attempt = 0; attempt < 2 && !values[t]; ++attempt) {
      // The persisted answer is the first attempt; one fresh retry follows.
      const std::string answer = attempt == 0 ? answers[t] : score_frame(t);
      try {
        values[t] = parse_score(answer) / 10.0;
      } catch (const ParseError&) {
      } catch (const RangeError&) {
      }
      if (attempt == 1) out.raw_answers[t] = answer;
    }
  }
  out.filled.resize(T);
  for (std::size_t t = 0; t < T; ++t) out.filled[t] = !values[t].has_value();
  out.scores.scores = fill_nearest(values);
  out.scores.normalized = false;
  if (options.progress_path) fs::remove(*options.progress_path);
  return out;
}

std::vector<EmbeddingPair> embed_video(const VideoRecord& record, Backend& scorer,
                                       const EmbedOptions& options) {
  if (!record.captions) throw PreconditionError("embedding needs captions for " + record.video_id);
  const auto& tmpl = options.prompt_template ? *options.prompt_template : default_template();
  const std::size_t T = record.frame_count;

  auto embed_frame = [&](std::size_t t) {
    if (options.cache_dir) {
      const auto path = embedding_path(*options.cache_dir, record.video_id, t);
      if (fs::exists(path)) return load_embedding(path);
    }
    const auto prompt = render_prompt(*record.captions, build_window(t, options.window, T), tmpl);
    auto pair = scorer.complete_with_embeddings(prompt.text, prompt.query_span).embeddings;
    pair.validate();
    if (options.cache_dir) save_embedding(pair, embedding_path(*options.cache_dir, record.video_id, t));
    return pair;
  };
  auto result = detail::ordered_map<EmbeddingPair>(0, T, scorer.config().max_in_flight, embed_frame);
  if (result.error) {
    try {
      std::rethrow_exception(result.error);
    } catch (const CapabilityError&) {
      throw;
    } catch (const ShapeError&) {
      throw;
    } catch (const std::exception& e) {
      throw ResumableError("embedding " + record.video_id + " failed: " + e.what(), result.failed_at);
    }
  }
  const auto width = result.results.front().width();
  for (std::size_t t = 0; t < T; ++t)
    if (result.results[t].width() != width)
      throw ShapeError("inconsistent hidden width: frame " + std::to_string(t) + " has " +
                       std::to_string(result.results[t].width()) + ", frame 0 has " +
                       std::to_string(width));
  return std::move(result.results);
}

}  // namespace llmvs
