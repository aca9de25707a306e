#pragma once

// Helpers shared by the line-oriented file formats.

#include "llmvs/error.hpp"

#include <charconv>
#include <cstdlib>
#include <map>
#include <string>
#include <vector>

namespace llmvs::detail {

inline std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

struct Header {
  std::map<std::string, std::string> fields;

  bool has(const std::string& key) const { return fields.count(key) != 0; }
  const std::string& get(const std::string& key, const std::string& video_id = {}) const {
    auto it = fields.find(key);
    if (it == fields.end()) throw SchemaError("missing header field", key, video_id);
    return it->second;
  }
};

/// Parse whitespace-separated key=value tokens.
inline Header parse_fields(const std::string& line) {
  Header h;
  for (const auto& tok : split_ws(line)) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) throw SchemaError("expected key=value, got '" + tok + "'");
    h.fields[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  return h;
}

inline constexpr const char* kFormatVersion = "v1";

/// Validate a `#llmvs-<kind> v1 key=value...` header line.
inline Header parse_header(const std::string& line, const std::string& kind) {
  const auto tokens = split_ws(line);
  const std::string magic = "#llmvs-" + kind;
  if (tokens.empty() || tokens[0] != magic)
    throw SchemaError("expected '" + magic + "' header", "header");
  if (tokens.size() < 2 || tokens[1] != kFormatVersion)
    throw VersionError("unsupported " + kind + " file version '" +
                       (tokens.size() > 1 ? tokens[1] : std::string{}) + "' (expected " +
                       kFormatVersion + ")");
  std::string rest;
  for (std::size_t i = 2; i < tokens.size(); ++i) rest += tokens[i] + " ";
  return parse_fields(rest);
}

inline double parse_real(const std::string& s, const std::string& field,
                         const std::string& video_id = {}) {
  if (s.empty()) throw SchemaError("empty number", field, video_id);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) throw SchemaError("not a number: '" + s + "'", field, video_id);
  return v;
}

inline std::size_t parse_size(const std::string& s, const std::string& field,
                              const std::string& video_id = {}) {
  std::size_t v = 0;
  const auto* first = s.data();
  const auto* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last || s.empty())
    throw SchemaError("not a non-negative integer: '" + s + "'", field, video_id);
  return v;
}

inline std::string escape_line(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c == '\\') out += "\\\\";
    else if (c == '\n') out += "\\n";
    else if (c == '\r') out += "\\r";
    else out += c;
  }
  return out;
}

inline std::string unescape_line(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size()) {
      const char n = s[++i];
      out += n == 'n' ? '\n' : n == 'r' ? '\r' : n;
    } else {
      out += s[i];
    }
  }
  return out;
}

}  // namespace llmvs::detail
