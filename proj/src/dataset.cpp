#include "llmvs/dataset.hpp"

#include "llmvs/error.hpp"
#include "llmvs/rng.hpp"
#include "text_io.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace llmvs {

namespace fs = std::filesystem;
using detail::Header;
using detail::parse_header;
using detail::parse_real;
using detail::parse_size;
using detail::split_ws;

std::string to_string(AnnotationMode m) {
  return m == AnnotationMode::per_user_scores ? "per-user-scores" : "averaged-summary";
}

AnnotationMode annotation_mode_from_string(const std::string& s) {
  if (s == "per-user-scores") return AnnotationMode::per_user_scores;
  if (s == "averaged-summary") return AnnotationMode::averaged_summary;
  throw SchemaError("unknown annotation mode '" + s + "'", "mode");
}

void AnnotationSet::validate(std::size_t T, const std::string& video_id) const {
  auto in_unit = [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; };
  if (regression_target.size() != T)
    throw InvariantError("regression target length " + std::to_string(regression_target.size()) +
                         " != frame count " + std::to_string(T) + " for " + video_id);
  if (!std::all_of(regression_target.begin(), regression_target.end(), in_unit))
    throw InvariantError("regression target outside [0,1] for " + video_id);
  if (mode == AnnotationMode::per_user_scores) {
    if (user_scores.rows() < 1 || static_cast<std::size_t>(user_scores.cols()) != T)
      throw InvariantError("per-user-scores annotations need U>=1 rows of length T for " +
                           video_id);
    if (!averaged_summary.empty())
      throw InvariantError("per-user-scores annotations must not carry an averaged summary");
    for (Eigen::Index i = 0; i < user_scores.size(); ++i)
      if (!in_unit(user_scores.data()[i]))
        throw InvariantError("user score outside [0,1] for " + video_id);
  } else {
    if (averaged_summary.size() != T)
      throw InvariantError("averaged summary length mismatch for " + video_id);
    if (user_scores.size() != 0)
      throw InvariantError("averaged-summary annotations must not carry user rows");
    if (!std::all_of(averaged_summary.begin(), averaged_summary.end(), in_unit))
      throw InvariantError("averaged summary outside [0,1] for " + video_id);
  }
}

Matrix normalize_scale(const Matrix& raw, double lo, double hi) {
  if (!(hi > lo)) throw SchemaError("annotation scale needs hi > lo", "scale");
  Matrix out(raw.rows(), raw.cols());
  for (Eigen::Index i = 0; i < raw.size(); ++i) {
    const double v = raw.data()[i];
    if (!std::isfinite(v) || v < lo || v > hi)
      throw SchemaError(fmt::format("annotation value {} outside declared scale [{},{}]", v, lo, hi),
                        "scale");
    out.data()[i] = (v - lo) / (hi - lo);
  }
  return out;
}

AnnotationSet make_annotations(AnnotationMode mode, const Matrix& rows) {
  if (rows.rows() < 1 || rows.cols() < 1) throw SchemaError("annotations need at least one row");
  AnnotationSet a;
  a.mode = mode;
  const Eigen::RowVectorXd mean = rows.colwise().mean();
  std::vector<double> avg(mean.data(), mean.data() + mean.size());
  if (mode == AnnotationMode::per_user_scores) {
    a.user_scores = rows;
  } else {
    a.averaged_summary = avg;
  }
  a.regression_target = std::move(avg);
  return a;
}

void validate_partition(std::span<const Shot> shots, std::size_t T) {
  if (shots.empty()) throw InvariantError("empty shot partition");
  if (shots.front().start != 0) throw InvariantError("partition must start at frame 0");
  for (std::size_t i = 0; i < shots.size(); ++i) {
    if (shots[i].end < shots[i].start) throw InvariantError("shot with end < start");
    if (i > 0 && shots[i].start != shots[i - 1].end + 1)
      throw InvariantError("non-contiguous partition at shot " + std::to_string(i));
  }
  if (shots.back().end + 1 != T) throw InvariantError("partition must end at frame T-1");
}

void VideoRecord::validate() const {
  if (frame_count < 1) throw InvariantError("video " + video_id + " has no frames");
  if (frame_refs.size() != frame_count)
    throw InvariantError("frame_refs length mismatch for " + video_id);
  if (captions && captions->size() != frame_count)
    throw InvariantError("captions length " + std::to_string(captions->size()) +
                         " != frame count for " + video_id);
  if (change_points) validate_partition(*change_points, frame_count);
  if (frame_features && static_cast<std::size_t>(frame_features->rows()) != frame_count)
    throw InvariantError("feature rows != frame count for " + video_id);
  annotations.validate(frame_count, video_id);
}

// ---------------------------------------------------------------------------
// Dataset loading

namespace {

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

Header expect_header(const std::vector<std::string>& lines, const std::string& kind,
                     const fs::path& path) {
  if (lines.empty()) throw SchemaError("empty file " + path.string(), "header");
  return parse_header(lines.front(), kind);
}

AnnotationSet load_annotation_file(const fs::path& path, std::size_t T, const std::string& vid) {
  const auto lines = read_lines(path);
  expect_header(lines, "annotations", path);
  if (lines.size() < 2) throw SchemaError("missing annotation description line", "mode", vid);
  const Header desc = detail::parse_fields(lines[1]);
  const auto mode = annotation_mode_from_string(desc.get("mode", vid));
  const std::size_t users = parse_size(desc.get("users", vid), "users", vid);
  const std::size_t frames = parse_size(desc.get("frames", vid), "frames", vid);
  if (frames != T)
    throw SchemaError("annotation frames=" + std::to_string(frames) + " disagrees with manifest",
                      "frames", vid);
  double lo = 0.0;
  double hi = 1.0;
  if (desc.has("scale")) {
    const std::string s = desc.get("scale", vid);
    const auto comma = s.find(',');
    if (comma == std::string::npos) throw SchemaError("scale must be lo,hi", "scale", vid);
    lo = parse_real(s.substr(0, comma), "scale", vid);
    hi = parse_real(s.substr(comma + 1), "scale", vid);
  }
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 2; i < lines.size(); ++i) {
    const auto tokens = split_ws(lines[i]);
    if (tokens.empty()) continue;
    std::vector<double> row;
    row.reserve(tokens.size());
    for (const auto& tok : tokens) row.push_back(parse_real(tok, "annotations", vid));
    if (row.size() != T)
      throw SchemaError("annotation row " + std::to_string(rows.size()) + " has " +
                            std::to_string(row.size()) + " values, expected " + std::to_string(T),
                        "annotations", vid);
    rows.push_back(std::move(row));
  }
  if (rows.size() != users)
    throw SchemaError("declared users=" + std::to_string(users) + " but found " +
                          std::to_string(rows.size()) + " rows",
                      "users", vid);
  Matrix raw(static_cast<Eigen::Index>(users), static_cast<Eigen::Index>(T));
  for (std::size_t u = 0; u < users; ++u)
    for (std::size_t t = 0; t < T; ++t) raw(u, t) = rows[u][t];
  Matrix norm;
  try {
    norm = normalize_scale(raw, lo, hi);
  } catch (const SchemaError& e) {
    throw SchemaError(e.what(), "scale", vid);
  }
  return make_annotations(mode, norm);
}

}  // namespace

std::vector<VideoRecord> load_dataset(const fs::path& path) {
  fs::path manifest = path;
  if (fs::is_directory(path)) manifest = path / "manifest.tsv";
  if (!fs::exists(manifest)) throw IoError("missing dataset manifest " + manifest.string());
  const fs::path root = manifest.parent_path();
  const auto lines = read_lines(manifest);
  expect_header(lines, "dataset", manifest);

  std::vector<VideoRecord> records;
  std::set<std::string> seen;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto tokens = split_ws(lines[i]);
    if (tokens.empty() || tokens.front().starts_with('#')) continue;
    if (tokens.size() != 2)
      throw SchemaError("manifest line " + std::to_string(i + 1) + " must be '<video_id> <frames>'",
                        "manifest");
    VideoRecord r;
    r.video_id = tokens[0];
    if (!seen.insert(r.video_id).second)
      throw SchemaError("duplicate video id", "video_id", r.video_id);
    r.frame_count = parse_size(tokens[1], "frames", r.video_id);
    const fs::path dir = root / r.video_id;

    if (fs::exists(dir / "frames.txt")) {
      for (auto& l : read_lines(dir / "frames.txt"))
        if (!l.empty()) r.frame_refs.push_back(l);
      if (r.frame_refs.size() != r.frame_count)
        throw SchemaError("frames.txt lists " + std::to_string(r.frame_refs.size()) + " frames",
                          "frame_refs", r.video_id);
    } else {
      for (std::size_t t = 0; t < r.frame_count; ++t)
        r.frame_refs.push_back(fmt::format("frame_{:04d}", t));
    }

    if (fs::exists(dir / "captions.txt")) {
      auto cf = load_captions(dir / "captions.txt");
      if (!cf.complete() || cf.frame_count != r.frame_count)
        throw SchemaError("captions do not cover every frame", "captions", r.video_id);
      r.captions = CaptionSequence{std::move(cf.captions), CaptionSource::loaded};
    }
    if (fs::exists(dir / "change_points.txt"))
      r.change_points = load_change_points(dir / "change_points.txt");
    if (fs::exists(dir / "features.txt")) r.frame_features = load_features(dir / "features.txt");

    if (!fs::exists(dir / "annotations.txt"))
      throw SchemaError("missing annotations.txt", "annotations", r.video_id);
    r.annotations = load_annotation_file(dir / "annotations.txt", r.frame_count, r.video_id);
    r.validate();
    records.push_back(std::move(r));
  }
  return records;
}

// ---------------------------------------------------------------------------
// Folds

std::vector<std::string> FoldSplit::fold_members(std::size_t fold) const {
  std::vector<std::string> out;
  for (const auto& [id, f] : assignments)
    if (f == fold) out.push_back(id);
  return out;
}

void FoldSplit::validate(std::span<const VideoRecord> records) const {
  if (k < 2) throw InvariantError("fold count must be >= 2");
  if (assignments.size() != records.size())
    throw InvariantError("fold split covers " + std::to_string(assignments.size()) +
                         " videos, dataset has " + std::to_string(records.size()));
  std::vector<std::size_t> sizes(k, 0);
  for (const auto& r : records) {
    auto it = assignments.find(r.video_id);
    if (it == assignments.end()) throw InvariantError("video " + r.video_id + " has no fold");
    if (it->second >= k) throw InvariantError("fold index out of range for " + r.video_id);
    ++sizes[it->second];
  }
  const auto [mn, mx] = std::minmax_element(sizes.begin(), sizes.end());
  if (*mx - *mn > 1) throw InvariantError("fold sizes differ by more than one");
}

FoldSplit make_folds(std::span<const VideoRecord> records, std::size_t k, std::uint64_t seed) {
  if (k < 2 || k > records.size())
    throw PreconditionError("fold count k=" + std::to_string(k) + " must lie in [2, " +
                            std::to_string(records.size()) + "]");
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(order);
  FoldSplit split;
  split.k = k;
  for (std::size_t pos = 0; pos < order.size(); ++pos)
    split.assignments[records[order[pos]].video_id] = pos % k;
  return split;
}

void save_folds(const FoldSplit& folds, const fs::path& path) {
  std::string out = fmt::format("#llmvs-folds v1 k={}\n", folds.k);
  for (const auto& [id, f] : folds.assignments) out += fmt::format("{} {}\n", id, f);
  write_file_atomic(path, out);
}

FoldSplit load_folds(const fs::path& path) {
  const auto lines = read_lines(path);
  const Header h = expect_header(lines, "folds", path);
  FoldSplit split;
  split.k = parse_size(h.get("k"), "k");
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto tokens = split_ws(lines[i]);
    if (tokens.empty()) continue;
    if (tokens.size() != 2) throw SchemaError("fold line must be '<video_id> <fold>'", "folds");
    const auto fold = parse_size(tokens[1], "fold", tokens[0]);
    if (fold >= split.k) throw SchemaError("fold index out of range", "fold", tokens[0]);
    if (!split.assignments.emplace(tokens[0], fold).second)
      throw SchemaError("video listed twice", "fold", tokens[0]);
  }
  return split;
}

// ---------------------------------------------------------------------------
// Artifacts

void save_captions(const std::vector<std::string>& captions, std::size_t T, const fs::path& path) {
  if (captions.size() > T)
    throw PreconditionError("more captions than frames (" + std::to_string(captions.size()) + " > " +
                            std::to_string(T) + ")");
  std::string out = fmt::format("#llmvs-captions v1 frames={} count={}\n", T, captions.size());
  for (const auto& c : captions) {
    out += detail::escape_line(c);
    out += '\n';
  }
  write_file_atomic(path, out);
}

CaptionFile load_captions(const fs::path& path) {
  const auto lines = read_lines(path);
  const Header h = expect_header(lines, "captions", path);
  CaptionFile cf;
  cf.frame_count = parse_size(h.get("frames"), "frames");
  const std::size_t count = parse_size(h.get("count"), "count");
  if (count > cf.frame_count) throw SchemaError("caption count exceeds frames", "count");
  if (lines.size() - 1 != count)
    throw SchemaError("declared count=" + std::to_string(count) + " but file holds " +
                          std::to_string(lines.size() - 1) + " captions",
                      "count");
  for (std::size_t i = 1; i < lines.size(); ++i) cf.captions.push_back(detail::unescape_line(lines[i]));
  return cf;
}

void save_scores(const ScoreSeries& scores, const fs::path& path, const std::vector<bool>& flags) {
  if (!flags.empty() && flags.size() != scores.size())
    throw PreconditionError("score flags length mismatch");
  std::string out = fmt::format("#llmvs-scores v1 frames={} normalized={}\n", scores.size(),
                                scores.normalized ? 1 : 0);
  for (std::size_t t = 0; t < scores.size(); ++t) {
    out += fmt::format("{}", scores.scores[t]);
    if (!flags.empty() && flags[t]) out += " filled";
    out += '\n';
  }
  write_file_atomic(path, out);
}

ScoreFile load_scores(const fs::path& path) {
  const auto lines = read_lines(path);
  const Header h = expect_header(lines, "scores", path);
  const std::size_t T = parse_size(h.get("frames"), "frames");
  ScoreFile sf;
  sf.series.normalized = h.get("normalized") == "1";
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto tokens = split_ws(lines[i]);
    if (tokens.empty()) continue;
    sf.series.scores.push_back(parse_real(tokens[0], "scores"));
    sf.flags.push_back(tokens.size() > 1 && tokens[1] == "filled");
  }
  if (sf.series.size() != T)
    throw SchemaError("declared frames=" + std::to_string(T) + " but file holds " +
                          std::to_string(sf.series.size()) + " scores",
                      "frames");
  return sf;
}

namespace {

void append_rows(std::string& out, const Matrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out += ' ';
      out += fmt::format("{}", m(r, c));
    }
    out += '\n';
  }
}

Matrix parse_rows(const std::vector<std::string>& lines, std::size_t first, std::size_t rows,
                  std::size_t cols, const std::string& field) {
  if (lines.size() < first + rows)
    throw SchemaError("declared " + std::to_string(rows) + " rows but file holds " +
                          std::to_string(lines.size() > first ? lines.size() - first : 0),
                      field);
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    const auto tokens = split_ws(lines[first + r]);
    if (tokens.size() != cols)
      throw SchemaError("row " + std::to_string(r) + " has " + std::to_string(tokens.size()) +
                            " values, expected " + std::to_string(cols),
                        field);
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = parse_real(tokens[c], field);
  }
  return m;
}

}  // namespace

void save_embedding(const EmbeddingPair& pair, const fs::path& path) {
  pair.validate();
  std::string out = fmt::format("#llmvs-embedding v1 query={} answer={} width={}\n", pair.q.rows(),
                                pair.a.rows(), pair.q.cols());
  append_rows(out, pair.q);
  append_rows(out, pair.a);
  write_file_atomic(path, out);
}

EmbeddingPair load_embedding(const fs::path& path) {
  auto lines = read_lines(path);
  const Header h = expect_header(lines, "embedding", path);
  while (lines.size() > 1 && lines.back().empty()) lines.pop_back();
  const std::size_t lq = parse_size(h.get("query"), "query");
  const std::size_t la = parse_size(h.get("answer"), "answer");
  const std::size_t d = parse_size(h.get("width"), "width");
  if (lines.size() - 1 != lq + la)
    throw SchemaError("declared " + std::to_string(lq + la) + " rows but file holds " +
                          std::to_string(lines.size() - 1),
                      "rows");
  EmbeddingPair p;
  p.q = parse_rows(lines, 1, lq, d, "query");
  p.a = parse_rows(lines, 1 + lq, la, d, "answer");
  p.validate();
  return p;
}

fs::path embedding_path(const fs::path& dir, const std::string& video_id, std::size_t t) {
  return dir / video_id / fmt::format("{:06d}.emb", t);
}

std::vector<EmbeddingPair> load_video_embeddings(const fs::path& dir, const std::string& video_id,
                                                 std::size_t T) {
  std::vector<EmbeddingPair> out;
  out.reserve(T);
  for (std::size_t t = 0; t < T; ++t) {
    const auto p = embedding_path(dir, video_id, t);
    if (!fs::exists(p)) throw IoError("missing embedding " + p.string());
    out.push_back(load_embedding(p));
  }
  return out;
}

void save_features(const Matrix& features, const fs::path& path) {
  std::string out =
      fmt::format("#llmvs-features v1 frames={} dims={}\n", features.rows(), features.cols());
  append_rows(out, features);
  write_file_atomic(path, out);
}

Matrix load_features(const fs::path& path) {
  const auto lines = read_lines(path);
  const Header h = expect_header(lines, "features", path);
  const std::size_t T = parse_size(h.get("frames"), "frames");
  const std::size_t d = parse_size(h.get("dims"), "dims");
  if (d < 1) throw SchemaError("features need dims >= 1", "dims");
  return parse_rows(lines, 1, T, d, "features");
}

void save_change_points(std::span<const Shot> shots, const fs::path& path) {
  std::string out = fmt::format("#llmvs-change-points v1 shots={}\n", shots.size());
  for (const auto& s : shots) out += fmt::format("{},{}\n", s.start, s.end);
  write_file_atomic(path, out);
}

std::vector<Shot> load_change_points(const fs::path& path) {
  const auto lines = read_lines(path);
  const Header h = expect_header(lines, "change-points", path);
  const std::size_t n = parse_size(h.get("shots"), "shots");
  std::vector<Shot> shots;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (split_ws(lines[i]).empty()) continue;
    const auto comma = lines[i].find(',');
    if (comma == std::string::npos) throw SchemaError("change point must be 'start,end'", "shots");
    shots.push_back({parse_size(lines[i].substr(0, comma), "start"),
                     parse_size(lines[i].substr(comma + 1), "end")});
  }
  if (shots.size() != n) throw SchemaError("declared shots count disagrees with rows", "shots");
  return shots;
}

void write_file_atomic(const fs::path& path, const std::string& contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw IoError("short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace llmvs
