#pragma once

#include "llmvs/types.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace llmvs {

enum class AnnotationMode {
  per_user_scores,   // TVSum-style: U score rows, compared per user
  averaged_summary,  // SumMe-style: binary user summaries averaged to one row
};

std::string to_string(AnnotationMode m);
AnnotationMode annotation_mode_from_string(const std::string& s);

struct AnnotationSet {
  AnnotationMode mode = AnnotationMode::per_user_scores;
  /// U x T, populated in per_user_scores mode.
  Matrix user_scores;
  /// Length T, populated in averaged_summary mode.
  std::vector<double> averaged_summary;
  /// Training target for every mode, length T.
  std::vector<double> regression_target;

  std::size_t frame_count() const { return regression_target.size(); }
  void validate(std::size_t T, const std::string& video_id = {}) const;
};

/// Rescale raw scores on the integer scale [lo, hi] linearly onto [0, 1].
/// Throws SchemaError for values outside the declared scale.
Matrix normalize_scale(const Matrix& raw, double lo, double hi);

/// Build an AnnotationSet from normalized rows. In averaged_summary mode the
/// rows are averaged into the summary; in per_user_scores mode they are kept
/// and their column mean becomes the regression target.
AnnotationSet make_annotations(AnnotationMode mode, const Matrix& normalized_rows);

struct VideoRecord {
  std::string video_id;
  std::size_t frame_count = 0;
  std::vector<std::string> frame_refs;
  std::optional<CaptionSequence> captions;
  std::optional<std::vector<Shot>> change_points;
  std::optional<Matrix> frame_features;
  AnnotationSet annotations;

  /// Throws InvariantError if any record invariant fails.
  void validate() const;
};

/// Throws InvariantError unless `shots` partition [0, T-1] exactly.
void validate_partition(std::span<const Shot> shots, std::size_t T);

/// Load a dataset from its manifest (a file, or a directory holding
/// `manifest.tsv`). See docs/dataset_format.md.
std::vector<VideoRecord> load_dataset(const std::filesystem::path& path);

struct FoldSplit {
  std::size_t k = 0;
  std::map<std::string, std::size_t> assignments;

  std::vector<std::string> fold_members(std::size_t fold) const;
  void validate(std::span<const VideoRecord> records) const;
};

FoldSplit make_folds(std::span<const VideoRecord> records, std::size_t k, std::uint64_t seed);

void save_folds(const FoldSplit& folds, const std::filesystem::path& path);
FoldSplit load_folds(const std::filesystem::path& path);

// Artifacts. Every file starts with a `#llmvs-<kind> v1` header line; load
// rejects other versions with VersionError and length disagreements with
// SchemaError.

/// Captions may be a prefix of the video (count < T) while generation is in
/// progress; `T` is recorded in the header.
void save_captions(const std::vector<std::string>& captions, std::size_t T,
                   const std::filesystem::path& path);

struct CaptionFile {
  std::size_t frame_count = 0;
  std::vector<std::string> captions;
  bool complete() const { return captions.size() == frame_count; }
};
CaptionFile load_captions(const std::filesystem::path& path);

void save_scores(const ScoreSeries& scores, const std::filesystem::path& path,
                 const std::vector<bool>& flags = {});

struct ScoreFile {
  ScoreSeries series;
  std::vector<bool> flags;
};
ScoreFile load_scores(const std::filesystem::path& path);

void save_embedding(const EmbeddingPair& pair, const std::filesystem::path& path);
EmbeddingPair load_embedding(const std::filesystem::path& path);

/// Per-frame embedding cache: `<dir>/<video_id>/<t:06d>.emb`.
std::filesystem::path embedding_path(const std::filesystem::path& dir, const std::string& video_id,
                                     std::size_t t);
std::vector<EmbeddingPair> load_video_embeddings(const std::filesystem::path& dir,
                                                 const std::string& video_id, std::size_t T);

void save_features(const Matrix& features, const std::filesystem::path& path);
Matrix load_features(const std::filesystem::path& path);

void save_change_points(std::span<const Shot> shots, const std::filesystem::path& path);
std::vector<Shot> load_change_points(const std::filesystem::path& path);

/// Write via a sibling temporary file and rename into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

}  // namespace llmvs
