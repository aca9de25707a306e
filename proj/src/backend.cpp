#include "llmvs/backend.hpp"

#include "llmvs/error.hpp"

#include <httplib.h>
#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <fstream>
#include <thread>
#include <vector>

namespace llmvs {

using json = nlohmann::json;

std::string to_string(ExtractionPosition p) {
  return p == ExtractionPosition::after_final_norm ? "after_final_norm" : "after_output_projection";
}

ExtractionPosition extraction_position_from_string(const std::string& s) {
  if (s == "after_final_norm") return ExtractionPosition::after_final_norm;
  if (s == "after_output_projection") return ExtractionPosition::after_output_projection;
  throw ConfigError("unknown extraction position '" + s + "'");
}

void BackendConfig::validate() const {
  if (!(timeout_seconds > 0.0)) throw ConfigError("backend timeout must be > 0");
  if (max_answer_tokens < 1) throw ConfigError("max answer tokens must be >= 1");
  if (!(temperature >= 0.0)) throw ConfigError("temperature must be >= 0");
  if (max_retries < 0) throw ConfigError("max retries must be >= 0");
  if (caption_token_cap < 1) throw ConfigError("caption token cap must be >= 1");
  if (max_in_flight < 1) throw ConfigError("max in-flight requests must be >= 1");
}

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

struct Token {
  std::size_t begin;
  std::size_t end;
};

std::vector<Token> whitespace_tokens(std::string_view s) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(s[i])) ++i;
    std::size_t j = i;
    while (j < s.size() && !is_space(s[j])) ++j;
    if (j > i) out.push_back({i, j});
    i = j;
  }
  return out;
}

std::string join_tokens(std::string_view s, const std::vector<Token>& toks, std::size_t n) {
  std::string out;
  for (std::size_t i = 0; i < n && i < toks.size(); ++i) {
    if (i) out += ' ';
    out += s.substr(toks[i].begin, toks[i].end - toks[i].begin);
  }
  return out;
}

std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

Answer truncate_answer(std::string_view raw, int max_tokens) {
  Answer out;
  std::string_view first = raw;
  // Leading blank lines are not an answer.
  while (!first.empty() && (first.front() == '\n' || first.front() == '\r' || first.front() == ' '))
    first.remove_prefix(1);
  const auto nl = first.find_first_of("\r\n");
  if (nl != std::string_view::npos) {
    out.truncated = first.find_first_not_of(" \t\r\n", nl) != std::string_view::npos;
    first = first.substr(0, nl);
  }
  const auto toks = whitespace_tokens(first);
  if (toks.size() > static_cast<std::size_t>(max_tokens)) out.truncated = true;
  out.text = join_tokens(first, toks, static_cast<std::size_t>(max_tokens));
  return out;
}

std::string cap_caption(std::string_view raw, int max_tokens) {
  std::string_view first = raw;
  while (!first.empty() && (first.front() == '\n' || first.front() == '\r')) first.remove_prefix(1);
  const auto nl = first.find_first_of("\r\n");
  if (nl != std::string_view::npos) first = first.substr(0, nl);
  const auto toks = whitespace_tokens(first);
  std::string out = join_tokens(first, toks, static_cast<std::size_t>(max_tokens));
  if (toks.size() > static_cast<std::size_t>(max_tokens)) {
    auto strip = [&out](std::string_view suffix) {
      if (out.size() >= suffix.size() && out.compare(out.size() - suffix.size(), suffix.size(),
                                                     suffix.data(), suffix.size()) == 0) {
        out.erase(out.size() - suffix.size());
        return true;
      }
      return false;
    };
    while (strip("...") || strip("\xE2\x80\xA6")) {
    }
    while (!out.empty() && is_space(out.back())) out.pop_back();
    // A token made only of ellipsis dots disappears entirely.
    if (out.empty() && !toks.empty()) out = join_tokens(first, toks, 1);
  }
  return out;
}

std::string central_caption(std::string_view prompt) {
  static constexpr std::string_view marker = "central frame #";
  const auto pos = prompt.rfind(marker);
  if (pos == std::string_view::npos) return {};
  std::size_t i = pos + marker.size();
  std::size_t c = 0;
  bool any = false;
  while (i < prompt.size() && std::isdigit(static_cast<unsigned char>(prompt[i]))) {
    c = c * 10 + static_cast<std::size_t>(prompt[i] - '0');
    ++i;
    any = true;
  }
  if (!any) return {};
  const std::string line_marker = "\n#" + std::to_string(c) + ": ";
  const auto lp = prompt.find(line_marker, i);
  if (lp == std::string_view::npos) return {};
  const auto start = lp + line_marker.size();
  const auto end = prompt.find('\n', start);
  return std::string(prompt.substr(start, end == std::string_view::npos ? end : end - start));
}

// ---------------------------------------------------------------------------
// HTTP

HttpBackend::HttpBackend(BackendConfig config) : config_(std::move(config)) {
  config_.validate();
  const std::string& url = config_.endpoint;
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("endpoint must be an http URL: " + url);
  if (url.substr(0, scheme_end) != "http")
    throw ConfigError("only plain http endpoints are supported (use a local TLS proxy): " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  scheme_host_port_ = url.substr(0, path_start);
  base_path_ = path_start == std::string::npos ? std::string{} : url.substr(path_start);
  while (!base_path_.empty() && base_path_.back() == '/') base_path_.pop_back();
}

std::string HttpBackend::post(const std::string& path, const std::string& body) {
  std::string last_error;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(50 * attempt));
    httplib::Client cli(scheme_host_port_);
    const auto secs = static_cast<time_t>(config_.timeout_seconds);
    const auto usecs = static_cast<time_t>((config_.timeout_seconds - secs) * 1e6);
    cli.set_connection_timeout(secs, usecs);
    cli.set_read_timeout(secs, usecs);
    cli.set_write_timeout(secs, usecs);
    httplib::Headers headers;
    if (!config_.auth_token.empty())
      headers.emplace("Authorization", "Bearer " + config_.auth_token);
    auto res = cli.Post(base_path_ + path, headers, body, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200)
      throw ProtocolError("backend returned HTTP " + std::to_string(res->status) + ": " +
                          res->body.substr(0, 200));
    return res->body;
  }
  throw TransportError("request to " + scheme_host_port_ + base_path_ + path + " failed after " +
                       std::to_string(config_.max_retries + 1) + " attempts: " + last_error);
}

namespace {

json chat_request(const BackendConfig& c, json content, int max_tokens) {
  return json{{"model", c.model},
              {"messages", json::array({json{{"role", "user"}, {"content", std::move(content)}}})},
              {"temperature", c.temperature},
              {"max_tokens", max_tokens}};
}

std::string answer_text(const json& resp) {
  try {
    return resp.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("malformed response envelope: ") + e.what());
  }
}

json parse_body(const std::string& body) {
  try {
    return json::parse(body);
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("response is not JSON: ") + e.what());
  }
}

Matrix vectors_to_matrix(const json& rows, Eigen::Index width) {
  Matrix m(static_cast<Eigen::Index>(rows.size()), width);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != width)
      throw ProtocolError("hidden-state row " + std::to_string(r) + " does not have width " +
                          std::to_string(width));
    for (std::size_t c = 0; c < row.size(); ++c) m(r, c) = row[c].get<double>();
  }
  return m;
}

}  // namespace

Answer HttpBackend::complete_text(std::string_view prompt) {
  if (prompt.empty()) throw PreconditionError("prompt must be non-empty");
  const json req = chat_request(config_, std::string(prompt), config_.max_answer_tokens);
  const json resp = parse_body(post("/v1/chat/completions", req.dump()));
  return truncate_answer(answer_text(resp), config_.max_answer_tokens);
}

EmbeddedAnswer HttpBackend::complete_with_embeddings(std::string_view prompt, CharSpan span) {
  if (prompt.empty()) throw PreconditionError("prompt must be non-empty");
  if (span.begin >= span.end || span.end > prompt.size())
    throw PreconditionError("query span outside prompt");
  json req = chat_request(config_, std::string(prompt), config_.max_answer_tokens);
  req["return_hidden_states"] = true;
  req["hidden_state_position"] = to_string(config_.extraction_position);
  const json resp = parse_body(post("/v1/chat/completions", req.dump()));
  EmbeddedAnswer out;
  out.answer = truncate_answer(answer_text(resp), config_.max_answer_tokens);
  if (!resp.contains("hidden_states") || resp["hidden_states"].is_null())
    throw CapabilityError("embedding-capable backend required: response carries no hidden_states");
  try {
    const json& hs = resp.at("hidden_states");
    const auto width = hs.at("hidden_size").get<Eigen::Index>();
    if (width < 1) throw ProtocolError("hidden_size must be >= 1");
    if (hs.contains("position") &&
        hs["position"].get<std::string>() != to_string(config_.extraction_position))
      throw ProtocolError("backend returned hidden states from a different position");
    const json& prompt_vecs = hs.at("prompt").at("vectors");
    const json& offsets = hs.at("prompt").at("offsets");
    if (prompt_vecs.size() != offsets.size())
      throw ProtocolError("span/token misalignment: " + std::to_string(prompt_vecs.size()) +
                          " vectors for " + std::to_string(offsets.size()) + " offsets");
    std::vector<std::size_t> keep;
    std::size_t prev_begin = 0;
    for (std::size_t i = 0; i < offsets.size(); ++i) {
      const auto b = offsets[i].at(0).get<std::size_t>();
      const auto e = offsets[i].at(1).get<std::size_t>();
      if (e < b || e > prompt.size() || b < prev_begin)
        throw ProtocolError("span/token misalignment: bad offsets for token " + std::to_string(i));
      prev_begin = b;
      if (b < span.end && e > span.begin) keep.push_back(i);
    }
    if (keep.empty()) throw ProtocolError("span/token misalignment: no token inside query span");
    json q_rows = json::array();
    for (auto i : keep) q_rows.push_back(prompt_vecs[i]);
    out.embeddings.q = vectors_to_matrix(q_rows, width);
    out.embeddings.a = vectors_to_matrix(hs.at("completion").at("vectors"), width);
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("malformed hidden_states: ") + e.what());
  }
  out.embeddings.validate();
  return out;
}

std::string HttpBackend::caption_image(std::string_view image_ref, std::string_view prompt) {
  if (image_ref.empty()) throw PreconditionError("empty image reference");
  json content = json::array(
      {json{{"type", "image_url"}, {"image_url", json{{"url", std::string(image_ref)}}}},
       json{{"type", "text"}, {"text", std::string(prompt)}}});
  // Subword tokens outnumber words; the word cap is applied afterwards.
  const json req = chat_request(config_, std::move(content), 2 * config_.caption_token_cap);
  const json resp = parse_body(post("/v1/chat/completions", req.dump()));
  auto caption = cap_caption(answer_text(resp), config_.caption_token_cap);
  if (caption.empty()) throw ProtocolError("empty caption for " + std::string(image_ref));
  return caption;
}

std::optional<int> HttpBackend::handshake_hidden_width() {
  httplib::Client cli(scheme_host_port_);
  cli.set_connection_timeout(static_cast<time_t>(config_.timeout_seconds), 0);
  httplib::Headers headers;
  if (!config_.auth_token.empty()) headers.emplace("Authorization", "Bearer " + config_.auth_token);
  auto res = cli.Get(base_path_ + "/v1/models", headers);
  if (!res || res->status != 200) return std::nullopt;
  try {
    const json j = json::parse(res->body);
    for (const auto& m : j.at("data")) {
      if (m.value("id", std::string{}) == config_.model && m.contains("hidden_size"))
        return m["hidden_size"].get<int>();
    }
  } catch (const json::exception&) {
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Mock

namespace {

constexpr const char* kCenterPrompt = "Describe the center part of this image in one detailed sentence.";
constexpr const char* kBackgroundPrompt =
    "Describe the background part of this image in one detailed sentence.";

}  // namespace

MockFixture default_mock_fixture() {
  MockFixture f;
  f.answers = {
      {"A close up of a piece of cloth.", "score: 1"},
      {"A group of people are standing on a road that is blocked off.", "score: 5"},
      {"A car is driving on a street with a red light.", "score: 9"},
      {"A car is driving through a red light.", "score: 9"},
  };
  f.prompt_prefixes = {{kCenterPrompt, "In the center, "}, {kBackgroundPrompt, "In the background, "}};
  return f;
}

MockFixture MockFixture::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open mock fixture " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("mock fixture is not JSON: ") + e.what(), "mock");
  }
  MockFixture f = default_mock_fixture();
  try {
    if (j.contains("captions")) f.captions = j["captions"].get<std::map<std::string, std::string>>();
    if (j.contains("answers"))
      for (auto& [k, v] : j["answers"].items()) f.answers[k] = v.get<std::string>();
    if (j.contains("prompt_prefixes"))
      for (auto& [k, v] : j["prompt_prefixes"].items()) f.prompt_prefixes[k] = v.get<std::string>();
    f.hidden_width = j.value("hidden_size", f.hidden_width);
    f.seed = j.value("seed", f.seed);
    f.supports_embeddings = j.value("supports_embeddings", f.supports_embeddings);
  } catch (const json::exception& e) {
    throw SchemaError(std::string("bad mock fixture: ") + e.what(), "mock");
  }
  if (f.hidden_width < 1) throw SchemaError("mock hidden_size must be >= 1", "hidden_size");
  return f;
}

MockBackend::MockBackend(BackendConfig config, MockFixture fixture)
    : config_(std::move(config)), fixture_(std::move(fixture)) {
  config_.validate();
}

std::string MockBackend::answer_for(std::string_view prompt) const {
  const std::string center = central_caption(prompt);
  if (fixture_.failing_queries.count(center))
    throw TransportError("mock: injected failure scoring '" + center + "'");
  if (auto it = fixture_.answers.find(center); it != fixture_.answers.end()) return it->second;
  const std::uint64_t h = mix(fnv1a(center.empty() ? prompt : center) ^ fixture_.seed);
  return "score: " + std::to_string(h % 11);
}

Answer MockBackend::complete_text(std::string_view prompt) {
  if (prompt.empty()) throw PreconditionError("prompt must be non-empty");
  ++calls_;
  return truncate_answer(answer_for(prompt), config_.max_answer_tokens);
}

EmbeddedAnswer MockBackend::complete_with_embeddings(std::string_view prompt, CharSpan span) {
  if (prompt.empty()) throw PreconditionError("prompt must be non-empty");
  if (!fixture_.supports_embeddings)
    throw CapabilityError("embedding-capable backend required: mock configured without hidden states");
  if (span.begin >= span.end || span.end > prompt.size())
    throw PreconditionError("query span outside prompt");
  ++calls_;
  EmbeddedAnswer out;
  out.answer = truncate_answer(answer_for(prompt), config_.max_answer_tokens);

  int width = fixture_.hidden_width;
  if (auto it = fixture_.width_overrides.find(central_caption(prompt));
      it != fixture_.width_overrides.end())
    width = it->second;
  const std::uint64_t table =
      config_.extraction_position == ExtractionPosition::after_final_norm ? 0x6e6f726dULL
                                                                          : 0x70726f6aULL;

  // Each row is a pure function of (token text, ordinal, table, seed).
  auto fill = [&](std::string_view text, const std::vector<Token>& toks, std::uint64_t salt) {
    Matrix m(static_cast<Eigen::Index>(toks.size()), width);
    for (std::size_t r = 0; r < toks.size(); ++r) {
      const auto tok = text.substr(toks[r].begin, toks[r].end - toks[r].begin);
      const std::uint64_t h = mix(fnv1a(tok) ^ mix(r + salt) ^ mix(table ^ fixture_.seed));
      for (int c = 0; c < width; ++c) {
        const std::uint64_t bits = mix(h + static_cast<std::uint64_t>(c));
        m(static_cast<Eigen::Index>(r), c) =
            kMaxAbsEntry * (2.0 * (static_cast<double>(bits >> 11) * 0x1.0p-53) - 1.0);
      }
      // Numeric answer tokens carry their value in the first coordinate.
      if (salt == 2 && !tok.empty() &&
          std::all_of(tok.begin(), tok.end(), [](char ch) { return std::isdigit(ch); }) &&
          tok.size() <= 2)
        m(static_cast<Eigen::Index>(r), 0) = std::min(1.0, std::stod(std::string(tok)) / 10.0);
    }
    return m;
  };

  const auto all = whitespace_tokens(prompt);
  std::vector<Token> query;
  for (const auto& t : all)
    if (t.begin < span.end && t.end > span.begin) query.push_back(t);
  if (query.empty()) throw ProtocolError("span/token misalignment: no token inside query span");
  out.embeddings.q = fill(prompt, query, 1);

  const std::string& ans = out.answer.text;
  auto ans_toks = whitespace_tokens(ans);
  if (ans_toks.empty()) ans_toks.push_back({0, 0});
  out.embeddings.a = fill(ans, ans_toks, 2);
  return out;
}

std::string MockBackend::caption_image(std::string_view image_ref, std::string_view prompt) {
  ++calls_;
  const std::string ref(image_ref);
  if (fixture_.failing_refs.count(ref)) throw TransportError("mock: injected failure on " + ref);
  auto it = fixture_.captions.find(ref);
  if (it == fixture_.captions.end()) throw ProtocolError("mock: unresolvable image ref '" + ref + "'");
  std::string caption = it->second;
  if (auto p = fixture_.prompt_prefixes.find(std::string(prompt)); p != fixture_.prompt_prefixes.end()) {
    if (!caption.empty())
      caption[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(caption[0])));
    caption = p->second + caption;
  }
  return cap_caption(caption, config_.caption_token_cap);
}

}  // namespace llmvs
