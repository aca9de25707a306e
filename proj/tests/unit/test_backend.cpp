#include "llmvs/backend.hpp"
#include "llmvs/error.hpp"
#include "llmvs/prompt.hpp"

#include <gtest/gtest.h>
#include <httplib.h>
#include <json.hpp>

#include <atomic>
#include <mutex>
#include <thread>

using namespace llmvs;
using nlohmann::json;

namespace {

BackendConfig mock_config() {
  BackendConfig c;
  c.model = "mock";
  return c;
}

CaptionSequence captions_of(std::vector<std::string> c) { return CaptionSequence{std::move(c), CaptionSource::loaded}; }

// Query prompt whose center is `center`, surrounded by filler captions.
WindowPrompt window_prompt(const std::string& center) {
  std::vector<std::string> c = {"A hallway.", "A door.", "A window.", center, "A lamp.", "A chair.", "A rug."};
  return render_prompt(captions_of(c), build_window(3, 7, 7));
}

// In-process HTTP server on an ephemeral port.
class FakeServer {
 public:
  FakeServer() {
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeServer() {
    server_.stop();
    thread_.join();
  }
  httplib::Server& server() { return server_; }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

BackendConfig http_config(const std::string& url) {
  BackendConfig c;
  c.endpoint = url;
  c.model = "scorer";
  c.timeout_seconds = 5;
  c.max_retries = 2;
  return c;
}

json chat_response(const std::string& content) {
  return json{{"choices", json::array({json{{"message", json{{"role", "assistant"}, {"content", content}}}}})}};
}

}  // namespace

TEST(BackendConfig, Validation) {
  BackendConfig c;
  EXPECT_NO_THROW(c.validate());
  c.timeout_seconds = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = BackendConfig{};
  c.max_answer_tokens = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = BackendConfig{};
  c.temperature = -0.1;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_EQ(BackendConfig{}.max_answer_tokens, 8);
  EXPECT_EQ(BackendConfig{}.temperature, 0.0);
  EXPECT_EQ(BackendConfig{}.caption_token_cap, 77);
}

TEST(TruncateAnswer, FirstLineThenTokenCap) {
  EXPECT_EQ(truncate_answer("score: 7", 8).text, "score: 7");
  EXPECT_FALSE(truncate_answer("score: 7", 8).truncated);
  const auto a = truncate_answer("score: 7\nBecause the frame shows a crash.", 8);
  EXPECT_EQ(a.text, "score: 7");
  EXPECT_TRUE(a.truncated);
  const auto b = truncate_answer("one two three four five", 3);
  EXPECT_EQ(b.text, "one two three");
  EXPECT_TRUE(b.truncated);
  EXPECT_FALSE(truncate_answer("score: 7\n\n", 8).truncated);
}

TEST(CapCaption, TruncatesAtWordBoundaryWithoutEllipsis) {
  EXPECT_EQ(cap_caption("A dog runs on the beach.", 77), "A dog runs on the beach.");
  EXPECT_EQ(cap_caption("one two three four", 3), "one two three");
  EXPECT_EQ(cap_caption("one two... three four", 2), "one two");
  EXPECT_EQ(cap_caption("one two \xE2\x80\xA6 three", 3), "one two");
  EXPECT_EQ(cap_caption("First sentence.\nSecond line.", 77), "First sentence.");
  EXPECT_EQ(cap_caption("  spaced   out   words ", 77), "spaced out words");
}

TEST(CentralCaption, FindsNumberedLine) {
  const auto p = window_prompt("A car is driving through a red light.");
  EXPECT_EQ(central_caption(p.text), "A car is driving through a red light.");
  EXPECT_EQ(central_caption("no marker here"), "");
}

TEST(MockBackend, FixtureAnswer) {
  MockBackend mock(mock_config(), default_mock_fixture());
  EXPECT_EQ(mock.complete_text(window_prompt("A car is driving through a red light.").text).text, "score: 9");
}

TEST(MockBackend, EmptyPromptIsPrecondition) {
  MockBackend mock(mock_config(), default_mock_fixture());
  EXPECT_THROW(mock.complete_text(""), PreconditionError);
  EXPECT_THROW(mock.complete_with_embeddings("", {0, 0}), PreconditionError);
}

TEST(MockBackend, PureFunctionOfRequest) {
  MockBackend a(mock_config(), default_mock_fixture());
  MockBackend b(mock_config(), default_mock_fixture());
  const auto p = window_prompt("Something unlisted happens.");
  EXPECT_EQ(a.complete_text(p.text).text, b.complete_text(p.text).text);
  const auto ea = a.complete_with_embeddings(p.text, p.query_span);
  const auto eb = b.complete_with_embeddings(p.text, p.query_span);
  EXPECT_TRUE(ea.embeddings.q == eb.embeddings.q);
  EXPECT_TRUE(ea.embeddings.a == eb.embeddings.a);
}

TEST(MockBackend, EmbeddingShapeContract) {
  MockFixture f;
  f.hidden_width = 16;
  const std::string prompt = "p0 p1 Q1 Q2 Q3 Q4 Q5 Q6 Q7 Q8 Q9 Q10 Q11 Q12 tail";
  const std::size_t begin = prompt.find("Q1");
  const std::size_t end = prompt.find(" tail");
  f.answers[""] = "score is 7";
  MockBackend mock(mock_config(), f);
  const auto out = mock.complete_with_embeddings(prompt, {begin, end});
  EXPECT_EQ(out.embeddings.query_length(), 12);
  EXPECT_EQ(out.embeddings.answer_length(), 3);
  EXPECT_EQ(out.embeddings.width(), 16);
  EXPECT_LE(out.embeddings.q.cwiseAbs().maxCoeff(), MockBackend::kMaxAbsEntry);
  EXPECT_LE(out.embeddings.a.cwiseAbs().maxCoeff(), MockBackend::kMaxAbsEntry);
}

TEST(MockBackend, ExtractionPositionsUseDistinctTables) {
  const auto p = window_prompt("A crowd is cheering at a stadium.");
  auto c1 = mock_config();
  auto c2 = mock_config();
  c2.extraction_position = ExtractionPosition::after_output_projection;
  MockBackend norm(c1, default_mock_fixture());
  MockBackend proj(c2, default_mock_fixture());
  const auto a = norm.complete_with_embeddings(p.text, p.query_span).embeddings;
  const auto b = proj.complete_with_embeddings(p.text, p.query_span).embeddings;
  ASSERT_EQ(a.q.rows(), b.q.rows());
  EXPECT_FALSE(a.q == b.q);
}

TEST(MockBackend, CapabilityError) {
  MockFixture f = default_mock_fixture();
  f.supports_embeddings = false;
  MockBackend mock(mock_config(), f);
  const auto p = window_prompt("x");
  try {
    mock.complete_with_embeddings(p.text, p.query_span);
    FAIL();
  } catch (const CapabilityError& e) {
    EXPECT_NE(std::string(e.what()).find("embedding-capable backend required"), std::string::npos);
  }
}

TEST(MockBackend, CaptionLookupAndCap) {
  MockFixture f = default_mock_fixture();
  f.captions["frame_0003"] = "A man rides a bicycle along a river path.";
  f.captions["long"] = "one two three four five six...";
  auto cfg = mock_config();
  cfg.caption_token_cap = 4;
  MockBackend mock(cfg, f);
  EXPECT_EQ(mock.caption_image("frame_0003", kGenericCaptionPrompt), "A man rides a");
  MockBackend wide(mock_config(), f);
  EXPECT_EQ(wide.caption_image("frame_0003", kGenericCaptionPrompt), "A man rides a bicycle along a river path.");
  EXPECT_EQ(wide.caption_image("frame_0003", kCenterCaptionPrompt),
            "In the center, a man rides a bicycle along a river path.");
  EXPECT_THROW(wide.caption_image("frame_9999", kGenericCaptionPrompt), ProtocolError);
}

TEST(MockBackend, FixtureFromJson) {
  const auto path = std::string(LLMVS_SOURCE_DIR) + "/data/demo/mock_fixture.json";
  const auto f = MockFixture::from_json_file(path);
  EXPECT_FALSE(f.captions.empty());
  EXPECT_FALSE(f.answers.empty());
  EXPECT_THROW(MockFixture::from_json_file(std::string(LLMVS_SOURCE_DIR) + "/CMakeLists.txt"), SchemaError);
}

// ---------------------------------------------------------------------------
// HTTP client against a local server.

TEST(HttpBackend, RequestEnvelopeAndAuth) {
  FakeServer srv;
  json seen;
  std::string auth;
  std::mutex m;
  srv.server().Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    std::lock_guard lock(m);
    seen = json::parse(req.body);
    auth = req.get_header_value("Authorization");
    res.set_content(chat_response("score: 4\nextra reasoning").dump(), "application/json");
  });
  auto cfg = http_config(srv.url());
  cfg.auth_token = "secret-token";
  HttpBackend http(cfg);
  const auto ans = http.complete_text("rate this");
  EXPECT_EQ(ans.text, "score: 4");
  EXPECT_TRUE(ans.truncated);
  EXPECT_EQ(auth, "Bearer secret-token");
  EXPECT_EQ(seen["model"], "scorer");
  EXPECT_EQ(seen["temperature"], 0.0);
  EXPECT_EQ(seen["max_tokens"], 8);
  EXPECT_EQ(seen["messages"][0]["role"], "user");
  EXPECT_EQ(seen["messages"][0]["content"], "rate this");
  EXPECT_FALSE(seen.contains("return_hidden_states"));
}

TEST(HttpBackend, EndpointWithBasePath) {
  FakeServer srv;
  srv.server().Post("/api/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    res.set_content(chat_response("score: 2").dump(), "application/json");
  });
  HttpBackend http(http_config(srv.url() + "/api/"));
  EXPECT_EQ(http.complete_text("p").text, "score: 2");
}

TEST(HttpBackend, RetriesServerErrors) {
  FakeServer srv;
  std::atomic<int> calls{0};
  srv.server().Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    if (calls++ < 2) {
      res.status = 503;
      return;
    }
    res.set_content(chat_response("score: 6").dump(), "application/json");
  });
  HttpBackend http(http_config(srv.url()));
  EXPECT_EQ(http.complete_text("p").text, "score: 6");
  EXPECT_EQ(calls.load(), 3);
}

TEST(HttpBackend, GivesUpAfterMaxRetries) {
  FakeServer srv;
  std::atomic<int> calls{0};
  srv.server().Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    ++calls;
    res.status = 500;
  });
  auto cfg = http_config(srv.url());
  cfg.max_retries = 1;
  HttpBackend http(cfg);
  EXPECT_THROW(http.complete_text("p"), TransportError);
  EXPECT_EQ(calls.load(), 2);
}

TEST(HttpBackend, UnreachableEndpoint) {
  int port = 0;
  {
    httplib::Server s;
    port = s.bind_to_any_port("127.0.0.1");
  }
  auto cfg = http_config("http://127.0.0.1:" + std::to_string(port));
  cfg.max_retries = 1;
  cfg.timeout_seconds = 1;
  HttpBackend http(cfg);
  EXPECT_THROW(http.complete_text("p"), TransportError);
}

TEST(HttpBackend, ClientErrorsAndMalformedEnvelopes) {
  FakeServer srv;
  srv.server().Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    const auto body = json::parse(req.body);
    const std::string p = body["messages"][0]["content"];
    if (p == "401") {
      res.status = 401;
    } else if (p == "notjson") {
      res.set_content("<html>", "text/html");
    } else {
      res.set_content(R"({"choices": []})", "application/json");
    }
  });
  HttpBackend http(http_config(srv.url()));
  EXPECT_THROW(http.complete_text("401"), ProtocolError);
  EXPECT_THROW(http.complete_text("notjson"), ProtocolError);
  EXPECT_THROW(http.complete_text("empty"), ProtocolError);
  EXPECT_THROW(http.complete_text(""), PreconditionError);
}

TEST(HttpBackend, HiddenStatesSelectQuerySpanTokens) {
  FakeServer srv;
  const std::string prompt = "intro text QUERY A B answer?";
  json seen;
  srv.server().Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    seen = json::parse(req.body);
    // Tokens: "intro" "text" "QUERY" "A" "B" "answer?"
    json offsets = json::array({{0, 5}, {5, 10}, {10, 16}, {16, 18}, {18, 20}, {20, 28}});
    json vecs = json::array();
    for (int i = 0; i < 6; ++i) vecs.push_back({i * 1.0, i * 10.0});
    json resp = chat_response("score: 3");
    resp["hidden_states"] = {{"hidden_size", 2},
                             {"position", "after_final_norm"},
                             {"prompt", {{"vectors", vecs}, {"offsets", offsets}}},
                             {"completion", {{"vectors", json::array({{0.5, 0.25}, {0.75, 1.0}})}}}};
    res.set_content(resp.dump(), "application/json");
  });
  HttpBackend http(http_config(srv.url()));
  const CharSpan span{prompt.find("QUERY"), prompt.find(" answer?")};
  const auto out = http.complete_with_embeddings(prompt, span);
  EXPECT_EQ(seen["return_hidden_states"], true);
  EXPECT_EQ(seen["hidden_state_position"], "after_final_norm");
  EXPECT_EQ(out.answer.text, "score: 3");
  ASSERT_EQ(out.embeddings.q.rows(), 3);
  EXPECT_EQ(out.embeddings.q(0, 0), 2.0);
  EXPECT_EQ(out.embeddings.q(2, 1), 40.0);
  ASSERT_EQ(out.embeddings.a.rows(), 2);
  EXPECT_EQ(out.embeddings.a(1, 1), 1.0);
}

TEST(HttpBackend, MissingHiddenStatesIsCapabilityError) {
  FakeServer srv;
  srv.server().Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    res.set_content(chat_response("score: 3").dump(), "application/json");
  });
  HttpBackend http(http_config(srv.url()));
  EXPECT_THROW(http.complete_with_embeddings("abc def", {0, 3}), CapabilityError);
}

TEST(HttpBackend, MisalignedOffsets) {
  FakeServer srv;
  srv.server().Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    json resp = chat_response("score: 3");
    resp["hidden_states"] = {{"hidden_size", 1},
                             {"prompt", {{"vectors", json::array({{1.0}, {2.0}})}, {"offsets", json::array({{0, 3}})}}},
                             {"completion", {{"vectors", json::array({{1.0}})}}}};
    res.set_content(resp.dump(), "application/json");
  });
  HttpBackend http(http_config(srv.url()));
  EXPECT_THROW(http.complete_with_embeddings("abc def", {0, 3}), ProtocolError);
}

TEST(HttpBackend, CaptionRequestCarriesImageAndPrompt) {
  FakeServer srv;
  json seen;
  srv.server().Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    seen = json::parse(req.body);
    res.set_content(chat_response("A red bus waits at a stop.\nMore text.").dump(), "application/json");
  });
  HttpBackend http(http_config(srv.url()));
  EXPECT_EQ(http.caption_image("frames/0001.jpg", kGenericCaptionPrompt), "A red bus waits at a stop.");
  const auto& content = seen["messages"][0]["content"];
  EXPECT_EQ(content[0]["image_url"]["url"], "frames/0001.jpg");
  EXPECT_EQ(content[1]["text"], kGenericCaptionPrompt);
  EXPECT_EQ(seen["max_tokens"], 2 * 77);
}

TEST(HttpBackend, HandshakeReportsHiddenWidth) {
  FakeServer srv;
  srv.server().Get("/v1/models", [&](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"data": [{"id": "other"}, {"id": "scorer", "hidden_size": 5120}]})", "application/json");
  });
  HttpBackend http(http_config(srv.url()));
  EXPECT_EQ(http.handshake_hidden_width(), 5120);
}

TEST(HttpBackend, RejectsNonUrlEndpoint) {
  EXPECT_THROW(HttpBackend(http_config("localhost:8000")), ConfigError);
  EXPECT_THROW(HttpBackend(http_config("https://example.invalid")), ConfigError);
}
