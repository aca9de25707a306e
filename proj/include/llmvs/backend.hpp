#pragma once

#include "llmvs/types.hpp"

#include <atomic>
#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>

namespace llmvs {

/// Where hidden states are read from in the scorer model.
enum class ExtractionPosition {
  after_final_norm,        // output of the last normalization layer
  after_output_projection  // output of the vocabulary projection
};

std::string to_string(ExtractionPosition p);
ExtractionPosition extraction_position_from_string(const std::string& s);

struct BackendConfig {
  std::string endpoint = "http://127.0.0.1:8000";
  std::string model;
  double timeout_seconds = 120.0;
  int max_retries = 3;
  int max_answer_tokens = 8;
  double temperature = 0.0;
  ExtractionPosition extraction_position = ExtractionPosition::after_final_norm;
  /// Whitespace-token cap applied to captions.
  int caption_token_cap = 77;
  /// Upper bound on concurrent requests issued by the pipeline stages.
  int max_in_flight = 1;
  /// Sent as a bearer token when non-empty.
  std::string auth_token;

  void validate() const;
};

/// Half-open character range [begin, end) inside a prompt.
struct CharSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
  friend bool operator==(const CharSpan&, const CharSpan&) = default;
};

struct Answer {
  std::string text;
  /// Set when the raw answer ran past the first line or the token cap.
  bool truncated = false;
};

struct EmbeddedAnswer {
  Answer answer;
  EmbeddingPair embeddings;
};

/// Cut an answer at its first line break, then at `max_tokens` whitespace tokens.
Answer truncate_answer(std::string_view raw, int max_tokens);

/// First line only, whitespace collapsed, capped at `max_tokens` tokens. When
/// the cap bites, trailing ellipses are removed so the caption ends on a word.
std::string cap_caption(std::string_view raw, int max_tokens);

/// A service hosting the captioner or the scorer model.
class Backend {
 public:
  virtual ~Backend() = default;

  virtual const BackendConfig& config() const = 0;

  virtual Answer complete_text(std::string_view prompt) = 0;

  /// Answer plus hidden states of the tokens overlapping `query_span` and of
  /// the generated answer tokens. Throws CapabilityError when the backend
  /// cannot return hidden states.
  virtual EmbeddedAnswer complete_with_embeddings(std::string_view prompt, CharSpan query_span) = 0;

  virtual std::string caption_image(std::string_view image_ref, std::string_view prompt) = 0;
};

/// Client for a chat-completion style HTTP server (docs/wire_protocol.md).
class HttpBackend final : public Backend {
 public:
  explicit HttpBackend(BackendConfig config);

  const BackendConfig& config() const override { return config_; }
  Answer complete_text(std::string_view prompt) override;
  EmbeddedAnswer complete_with_embeddings(std::string_view prompt, CharSpan query_span) override;
  std::string caption_image(std::string_view image_ref, std::string_view prompt) override;

  /// Hidden width advertised by GET /v1/models, if any.
  std::optional<int> handshake_hidden_width();

 private:
  std::string post(const std::string& path, const std::string& body);

  BackendConfig config_;
  std::string scheme_host_port_;
  std::string base_path_;
};

/// Data driving the in-process mock.
struct MockFixture {
  /// frame ref -> caption for the generic captioning prompt.
  std::map<std::string, std::string> captions;
  /// captioning prompt -> prefix prepended to the fixture caption.
  std::map<std::string, std::string> prompt_prefixes;
  /// central caption of a scoring query -> answer text.
  std::map<std::string, std::string> answers;
  int hidden_width = 16;
  std::uint64_t seed = 0;
  bool supports_embeddings = true;
  /// Frame refs whose captioning fails with a TransportError.
  std::set<std::string> failing_refs;
  /// Central captions whose scoring fails with a TransportError.
  std::set<std::string> failing_queries;
  /// Per-query hidden width overrides keyed by central caption.
  std::map<std::string, int> width_overrides;

  /// Parse the JSON fixture format (docs/wire_protocol.md, "Mock fixtures").
  static MockFixture from_json_file(const std::string& path);
};

/// Default scoring fixture: central captions of the shipped
/// in-context examples mapped to their answers.
MockFixture default_mock_fixture();

/// Deterministic in-process backend. Every output is a pure function of the
/// request, the config and the fixture.
class MockBackend final : public Backend {
 public:
  MockBackend(BackendConfig config, MockFixture fixture);

  const BackendConfig& config() const override { return config_; }
  Answer complete_text(std::string_view prompt) override;
  EmbeddedAnswer complete_with_embeddings(std::string_view prompt, CharSpan query_span) override;
  std::string caption_image(std::string_view image_ref, std::string_view prompt) override;

  MockFixture& fixture() { return fixture_; }
  std::size_t call_count() const { return calls_.load(); }

  /// Bound on |entry| of every mock embedding row.
  static constexpr double kMaxAbsEntry = 1.0;

 private:
  std::string answer_for(std::string_view prompt) const;

  BackendConfig config_;
  MockFixture fixture_;
  std::atomic<std::size_t> calls_{0};
};

/// Central caption of a rendered scoring query, found via its
/// "central frame #c" marker. Empty when the prompt has no such marker.
std::string central_caption(std::string_view prompt);

}  // namespace llmvs
