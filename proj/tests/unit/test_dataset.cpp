#include "llmvs/dataset.hpp"
#include "llmvs/error.hpp"
#include "llmvs/rng.hpp"
#include "temp_dir.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>

using namespace llmvs;
namespace fs = std::filesystem;
using testutil::TempDir;

namespace {

void write(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p) << text;
}

// Two videos: a per-user one with captions and change points, an averaged one
// with features only.
fs::path two_video_fixture(const TempDir& dir) {
  write(dir / "manifest.tsv", "#llmvs-dataset v1\nalpha 4\nbeta 3\n");
  write(dir / "alpha/captions.txt",
        "#llmvs-captions v1 frames=4 count=4\nA dog runs.\nA cat sits.\nA car drives.\nA bird flies.\n");
  write(dir / "alpha/annotations.txt",
        "#llmvs-annotations v1\nmode=per-user-scores users=3 frames=4 scale=1,5\n"
        "1 2 3 5\n5 4 3 1\n3 3 3 3\n");
  write(dir / "alpha/change_points.txt", "#llmvs-change-points v1 shots=2\n0,1\n2,3\n");
  write(dir / "beta/annotations.txt",
        "#llmvs-annotations v1\nmode=averaged-summary users=2 frames=3\n1 0 0\n1 1 0\n");
  write(dir / "beta/features.txt", "#llmvs-features v1 frames=3 dims=2\n0 1\n0 1\n5 5\n");
  return dir.path();
}

std::vector<VideoRecord> records_named(std::size_t n) {
  std::vector<VideoRecord> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i].video_id = "v" + std::to_string(i);
  return out;
}

std::vector<std::size_t> fold_sizes(const FoldSplit& split) {
  std::vector<std::size_t> sizes(split.k, 0);
  for (const auto& [id, f] : split.assignments) ++sizes[f];
  return sizes;
}

}  // namespace

TEST(LoadDataset, TwoVideoFixture) {
  TempDir dir;
  const auto records = load_dataset(two_video_fixture(dir));
  ASSERT_EQ(records.size(), 2u);
  EXPECT_EQ(records[0].video_id, "alpha");
  EXPECT_EQ(records[0].frame_count, 4u);
  ASSERT_TRUE(records[0].captions);
  EXPECT_EQ(records[0].captions->captions,
            (std::vector<std::string>{"A dog runs.", "A cat sits.", "A car drives.", "A bird flies."}));
  ASSERT_TRUE(records[0].change_points);
  EXPECT_EQ(records[0].change_points->size(), 2u);
  EXPECT_EQ(records[0].frame_refs.front(), "frame_0000");

  EXPECT_EQ(records[1].frame_count, 3u);
  EXPECT_FALSE(records[1].captions);
  ASSERT_TRUE(records[1].frame_features);
  EXPECT_EQ(records[1].annotations.mode, AnnotationMode::averaged_summary);
  EXPECT_EQ(records[1].annotations.averaged_summary, (std::vector<double>{1.0, 0.5, 0.0}));
  EXPECT_EQ(records[1].annotations.regression_target, records[1].annotations.averaged_summary);
  EXPECT_EQ(records[1].annotations.user_scores.size(), 0);
}

TEST(LoadDataset, ManifestFileOrDirectory) {
  TempDir dir;
  two_video_fixture(dir);
  EXPECT_EQ(load_dataset(dir / "manifest.tsv").size(), 2u);
}

TEST(LoadDataset, RawScoresRescaledOntoUnitInterval) {
  TempDir dir;
  const auto records = load_dataset(two_video_fixture(dir));
  const auto& a = records[0].annotations;
  ASSERT_EQ(a.user_scores.rows(), 3);
  // (v - 1) / 4
  EXPECT_EQ(a.user_scores(0, 0), 0.0);
  EXPECT_EQ(a.user_scores(0, 1), 0.25);
  EXPECT_EQ(a.user_scores(0, 2), 0.5);
  EXPECT_EQ(a.user_scores(0, 3), 1.0);
  EXPECT_EQ(a.user_scores(1, 0), 1.0);
  EXPECT_EQ(a.user_scores.minCoeff(), 0.0);
  EXPECT_EQ(a.user_scores.maxCoeff(), 1.0);
  for (int t = 0; t < 4; ++t)
    EXPECT_DOUBLE_EQ(a.regression_target[t], a.user_scores.col(t).mean());
}

TEST(LoadDataset, GapInChangePointsIsRejected) {
  TempDir dir;
  two_video_fixture(dir);
  write(dir / "manifest.tsv", "#llmvs-dataset v1\ngamma 10\n");
  write(dir / "gamma/annotations.txt",
        "#llmvs-annotations v1\nmode=averaged-summary users=1 frames=10\n0 0 0 0 0 1 1 1 1 1\n");
  write(dir / "gamma/change_points.txt", "#llmvs-change-points v1 shots=2\n0,4\n6,9\n");
  try {
    load_dataset(dir.path());
    FAIL() << "expected an invariant error";
  } catch (const InvariantError& e) {
    EXPECT_NE(std::string(e.what()).find("non-contiguous partition"), std::string::npos);
  }
}

TEST(LoadDataset, MissingManifest) {
  TempDir dir;
  EXPECT_THROW(load_dataset(dir / "nowhere"), IoError);
}

TEST(LoadDataset, SchemaErrorsNameFieldAndVideo) {
  TempDir dir;
  two_video_fixture(dir);
  write(dir / "alpha/annotations.txt",
        "#llmvs-annotations v1\nmode=per-user-scores users=2 frames=4 scale=1,5\n1 2 3 5\n");
  try {
    load_dataset(dir.path());
    FAIL() << "expected a schema error";
  } catch (const SchemaError& e) {
    EXPECT_EQ(e.field(), "users");
    EXPECT_EQ(e.video_id(), "alpha");
  }
}

TEST(LoadDataset, ValueOutsideDeclaredScale) {
  TempDir dir;
  two_video_fixture(dir);
  write(dir / "alpha/annotations.txt",
        "#llmvs-annotations v1\nmode=per-user-scores users=1 frames=4 scale=1,5\n1 2 3 6\n");
  EXPECT_THROW(load_dataset(dir.path()), SchemaError);
}

TEST(LoadDataset, DuplicateIdAndFrameCountMismatch) {
  TempDir dir;
  two_video_fixture(dir);
  write(dir / "manifest.tsv", "#llmvs-dataset v1\nalpha 4\nalpha 4\n");
  EXPECT_THROW(load_dataset(dir.path()), SchemaError);
  write(dir / "manifest.tsv", "#llmvs-dataset v1\nalpha 5\n");
  EXPECT_THROW(load_dataset(dir.path()), SchemaError);
}

TEST(LoadDataset, UnknownManifestVersion) {
  TempDir dir;
  two_video_fixture(dir);
  write(dir / "manifest.tsv", "#llmvs-dataset v2\nalpha 4\n");
  EXPECT_THROW(load_dataset(dir.path()), VersionError);
}

TEST(Partition, Validation) {
  const std::vector<Shot> good = {{0, 4}, {5, 9}};
  EXPECT_NO_THROW(validate_partition(good, 10));
  EXPECT_THROW(validate_partition(good, 11), InvariantError);
  const std::vector<Shot> late = {{1, 9}};
  EXPECT_THROW(validate_partition(late, 10), InvariantError);
  const std::vector<Shot> overlap = {{0, 5}, {5, 9}};
  EXPECT_THROW(validate_partition(overlap, 10), InvariantError);
  EXPECT_THROW(validate_partition({}, 10), InvariantError);
}

TEST(Normalization, EndpointsMonotoneAndIdempotent) {
  Matrix raw(1, 5);
  raw << 1, 2, 3, 4, 5;
  const Matrix n = normalize_scale(raw, 1, 5);
  EXPECT_EQ(n(0, 0), 0.0);
  EXPECT_EQ(n(0, 4), 1.0);
  for (int i = 1; i < 5; ++i) EXPECT_GT(n(0, i), n(0, i - 1));
  EXPECT_TRUE(normalize_scale(n, 0, 1) == n);
  EXPECT_THROW(normalize_scale(raw, 2, 5), SchemaError);
  EXPECT_THROW(normalize_scale(raw, 5, 5), SchemaError);
}

TEST(Annotations, ModeFieldsAreExclusive) {
  Matrix rows(2, 3);
  rows << 1, 0, 0, 1, 1, 0;
  const auto summe = make_annotations(AnnotationMode::averaged_summary, rows);
  EXPECT_NO_THROW(summe.validate(3));
  EXPECT_THROW(summe.validate(4), InvariantError);
  auto broken = summe;
  broken.user_scores = rows;
  EXPECT_THROW(broken.validate(3), InvariantError);

  const auto tvsum = make_annotations(AnnotationMode::per_user_scores, rows);
  EXPECT_TRUE(tvsum.averaged_summary.empty());
  EXPECT_EQ(tvsum.user_scores.rows(), 2);
  EXPECT_NO_THROW(tvsum.validate(3));
}

TEST(Folds, TwentyFiveVideosFiveFolds) {
  const auto records = records_named(25);
  const auto split = make_folds(records, 5, 0);
  EXPECT_EQ(fold_sizes(split), (std::vector<std::size_t>{5, 5, 5, 5, 5}));
  EXPECT_NO_THROW(split.validate(records));
}

TEST(Folds, BalancedRemainder) {
  const auto records = records_named(7);
  auto sizes = fold_sizes(make_folds(records, 5, 3));
  std::sort(sizes.rbegin(), sizes.rend());
  EXPECT_EQ(sizes, (std::vector<std::size_t>{2, 2, 1, 1, 1}));
}

TEST(Folds, DeterministicPerSeed) {
  const auto records = records_named(12);
  EXPECT_EQ(make_folds(records, 4, 9).assignments, make_folds(records, 4, 9).assignments);
  EXPECT_NE(make_folds(records, 4, 9).assignments, make_folds(records, 4, 10).assignments);
}

TEST(Folds, KOutOfRange) {
  const auto records = records_named(4);
  EXPECT_THROW(make_folds(records, 1, 0), PreconditionError);
  EXPECT_THROW(make_folds(records, 5, 0), PreconditionError);
}

TEST(Folds, RandomPartitionsHold) {
  Rng rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.below(40);
    const std::size_t k = 2 + rng.below(n - 1);
    const auto records = records_named(n);
    const auto split = make_folds(records, k, rng.next());
    ASSERT_EQ(split.assignments.size(), n);
    const auto sizes = fold_sizes(split);
    const auto [mn, mx] = std::minmax_element(sizes.begin(), sizes.end());
    ASSERT_LE(*mx - *mn, 1u);
    ASSERT_EQ(std::accumulate(sizes.begin(), sizes.end(), std::size_t{0}), n);
  }
}

TEST(Folds, FileRoundTrip) {
  TempDir dir;
  const auto records = records_named(9);
  const auto split = make_folds(records, 3, 5);
  save_folds(split, dir / "folds.txt");
  const auto back = load_folds(dir / "folds.txt");
  EXPECT_EQ(back.k, 3u);
  EXPECT_EQ(back.assignments, split.assignments);
}

TEST(Artifacts, CaptionsRoundTrip) {
  TempDir dir;
  std::vector<std::string> captions;
  for (int i = 0; i < 10; ++i) captions.push_back("Caption number " + std::to_string(i) + ", with punctuation.");
  save_captions(captions, 10, dir / "c.txt");
  const auto back = load_captions(dir / "c.txt");
  EXPECT_TRUE(back.complete());
  EXPECT_EQ(back.captions, captions);
}

TEST(Artifacts, PartialCaptions) {
  TempDir dir;
  save_captions({"one", "two"}, 5, dir / "c.txt");
  const auto back = load_captions(dir / "c.txt");
  EXPECT_FALSE(back.complete());
  EXPECT_EQ(back.frame_count, 5u);
  EXPECT_THROW(save_captions({"a", "b", "c"}, 2, dir / "d.txt"), PreconditionError);
}

TEST(Artifacts, ScoresRoundTrip) {
  TempDir dir;
  ScoreSeries s{{0.0, 0.5, 1.0}, true};
  save_scores(s, dir / "s.scores", {false, true, false});
  const auto back = load_scores(dir / "s.scores");
  EXPECT_EQ(back.series.scores, s.scores);
  EXPECT_TRUE(back.series.normalized);
  EXPECT_EQ(back.flags, (std::vector<bool>{false, true, false}));
}

TEST(Artifacts, ArbitraryDoublesRoundTripBitExactly) {
  TempDir dir;
  Rng rng(4);
  EmbeddingPair p;
  p.q = Matrix(3, 5);
  p.a = Matrix(2, 5);
  for (Eigen::Index i = 0; i < p.q.size(); ++i) p.q.data()[i] = rng.normal() * 1e-3;
  for (Eigen::Index i = 0; i < p.a.size(); ++i) p.a.data()[i] = rng.normal() * 1e7;
  save_embedding(p, dir / "e.emb");
  const auto back = load_embedding(dir / "e.emb");
  EXPECT_TRUE(back.q == p.q);
  EXPECT_TRUE(back.a == p.a);

  ScoreSeries s;
  for (int i = 0; i < 50; ++i) s.scores.push_back(rng.uniform());
  save_scores(s, dir / "s.scores");
  EXPECT_EQ(load_scores(dir / "s.scores").series.scores, s.scores);
}

TEST(Artifacts, EmbeddingDeclaredLengthMismatch) {
  TempDir dir;
  write(dir / "e.emb", "#llmvs-embedding v1 query=4 answer=1 width=2\n1 2\n3 4\n5 6\n7 8\n");
  EXPECT_THROW(load_embedding(dir / "e.emb"), SchemaError);
}

TEST(Artifacts, VersionMismatch) {
  TempDir dir;
  write(dir / "c.txt", "#llmvs-captions v9 frames=1 count=1\nhello\n");
  EXPECT_THROW(load_captions(dir / "c.txt"), VersionError);
  write(dir / "s.scores", "#llmvs-scores v0 frames=1 normalized=0\n0.5\n");
  EXPECT_THROW(load_scores(dir / "s.scores"), VersionError);
}

TEST(Artifacts, ScoresLengthMismatch) {
  TempDir dir;
  save_scores(ScoreSeries{{0.1, 0.2}, false}, dir / "s.scores");
  std::string text = read_file(dir / "s.scores");
  text += "0.3\n";
  write(dir / "s.scores", text);
  EXPECT_THROW(load_scores(dir / "s.scores"), SchemaError);
}

TEST(Artifacts, FeaturesAndChangePointsRoundTrip) {
  TempDir dir;
  Matrix f(3, 2);
  f << 0.25, -1, 3, 4.5, 1e-9, 7;
  save_features(f, dir / "f.txt");
  EXPECT_TRUE(load_features(dir / "f.txt") == f);
  const std::vector<Shot> shots = {{0, 3}, {4, 4}, {5, 11}};
  save_change_points(shots, dir / "cp.txt");
  EXPECT_EQ(load_change_points(dir / "cp.txt"), shots);
}

TEST(Artifacts, EmbeddingCacheLayout) {
  EXPECT_EQ(embedding_path("cache", "vid", 12), fs::path("cache/vid/000012.emb"));
  TempDir dir;
  EXPECT_THROW(load_video_embeddings(dir.path(), "vid", 2), IoError);
}

TEST(AtomicWrite, ReplacesWithoutLeavingTemporaries) {
  TempDir dir;
  write_file_atomic(dir / "x/out.txt", "first");
  write_file_atomic(dir / "x/out.txt", "second");
  EXPECT_EQ(read_file(dir / "x/out.txt"), "second");
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(dir / "x")) {
    (void)e;
    ++files;
  }
  EXPECT_EQ(files, 1u);
}
