#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace llmvs {

/// Base of every error raised by the library. `kind()` is a short stable
/// identifier used in machine-readable CLI error lines.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

class PreconditionError : public Error {
 public:
  explicit PreconditionError(const std::string& m) : Error("precondition", m) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& m) : Error("io", m) {}
};

/// Malformed file contents. Carries the offending field and video id when known.
class SchemaError : public Error {
 public:
  SchemaError(const std::string& m, std::string field = {}, std::string video_id = {})
      : Error("schema", decorate(m, field, video_id)),
        field_(std::move(field)),
        video_id_(std::move(video_id)) {}

  const std::string& field() const noexcept { return field_; }
  const std::string& video_id() const noexcept { return video_id_; }

 private:
  static std::string decorate(const std::string& m, const std::string& field,
                              const std::string& video_id) {
    std::string out = m;
    if (!field.empty()) out += " [field=" + field + "]";
    if (!video_id.empty()) out += " [video=" + video_id + "]";
    return out;
  }

  std::string field_;
  std::string video_id_;
};

class InvariantError : public Error {
 public:
  explicit InvariantError(const std::string& m) : Error("invariant", m) {}
};

class VersionError : public Error {
 public:
  explicit VersionError(const std::string& m) : Error("version", m) {}
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& m) : Error("shape", m) {}
};

class TransportError : public Error {
 public:
  explicit TransportError(const std::string& m) : Error("transport", m) {}
};

class ProtocolError : public Error {
 public:
  explicit ProtocolError(const std::string& m) : Error("protocol", m) {}
};

class CapabilityError : public Error {
 public:
  explicit CapabilityError(const std::string& m) : Error("capability", m) {}
};

class ParseError : public Error {
 public:
  ParseError(const std::string& m, std::string raw)
      : Error("parse", m), raw_(std::move(raw)) {}
  const std::string& raw_answer() const noexcept { return raw_; }

 private:
  std::string raw_;
};

class RangeError : public Error {
 public:
  RangeError(const std::string& m, std::string raw)
      : Error("range", m), raw_(std::move(raw)) {}
  const std::string& raw_answer() const noexcept { return raw_; }

 private:
  std::string raw_;
};

class TemplateError : public Error {
 public:
  explicit TemplateError(const std::string& m) : Error("template", m) {}
};

class DivergenceError : public Error {
 public:
  explicit DivergenceError(const std::string& m) : Error("divergence", m) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& m) : Error("config", m) {}
};

/// A per-frame stage failed part-way; frames [0, resume_index) were persisted.
class ResumableError : public Error {
 public:
  ResumableError(const std::string& m, std::size_t resume_index)
      : Error("resumable", m + " (resume at frame " + std::to_string(resume_index) + ")"),
        resume_index_(resume_index) {}
  std::size_t resume_index() const noexcept { return resume_index_; }

 private:
  std::size_t resume_index_;
};

}  // namespace llmvs
