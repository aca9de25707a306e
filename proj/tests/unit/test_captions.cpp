#include "llmvs/captions.hpp"
#include "llmvs/dataset.hpp"
#include "llmvs/error.hpp"
#include "temp_dir.hpp"

#include <gtest/gtest.h>

using namespace llmvs;
using testutil::TempDir;

namespace {

const std::vector<std::string> kFixture = {
    "A man walks a dog along a beach.",
    "A dog chases a ball into the surf.",
    "A wave crashes over the dog.",
    "The man throws the ball again.",
    "The sun sets over the water.",
};

VideoRecord five_frame_record() {
  VideoRecord r;
  r.video_id = "beach";
  r.frame_count = 5;
  for (int t = 0; t < 5; ++t) r.frame_refs.push_back("frame_000" + std::to_string(t));
  return r;
}

MockFixture five_frame_fixture() {
  MockFixture f = default_mock_fixture();
  for (int t = 0; t < 5; ++t) f.captions["frame_000" + std::to_string(t)] = kFixture[t];
  return f;
}

BackendConfig config(int in_flight = 1) {
  BackendConfig c;
  c.model = "mock-captioner";
  c.max_in_flight = in_flight;
  return c;
}

}  // namespace

TEST(GenerateCaptions, GenericStyleReturnsFixtureInOrder) {
  MockBackend mock(config(), five_frame_fixture());
  const auto c = generate_captions(five_frame_record(), mock);
  EXPECT_EQ(c.captions, kFixture);
  EXPECT_EQ(c.source, CaptionSource::generated);
  EXPECT_EQ(mock.call_count(), 5u);
}

TEST(GenerateCaptions, CentralBackgroundJoinsTwoSentences) {
  MockBackend mock(config(), five_frame_fixture());
  CaptionOptions opt;
  opt.style = CaptionPromptStyle::central_background;
  const auto c = generate_captions(five_frame_record(), mock, opt);
  ASSERT_EQ(c.size(), 5u);
  EXPECT_EQ(c.captions[0], "In the center, a man walks a dog along a beach. In the background, a man walks a dog along a beach.");
  EXPECT_EQ(mock.call_count(), 10u);
}

TEST(GenerateCaptions, JoinedCaptionRespectsTokenCap) {
  auto cfg = config();
  cfg.caption_token_cap = 6;
  MockBackend mock(cfg, five_frame_fixture());
  CaptionOptions opt;
  opt.style = CaptionPromptStyle::central_background;
  const auto c = generate_captions(five_frame_record(), mock, opt);
  for (const auto& s : c.captions) {
    std::size_t words = 1;
    for (char ch : s) words += ch == ' ';
    EXPECT_LE(words, 6u) << s;
  }
}

TEST(GenerateCaptions, FailurePersistsPrefixAndCarriesResumeIndex) {
  TempDir dir;
  MockFixture f = five_frame_fixture();
  f.failing_refs.insert("frame_0003");
  MockBackend mock(config(), f);
  CaptionOptions opt;
  opt.progress_path = dir / "beach.txt.partial";
  try {
    generate_captions(five_frame_record(), mock, opt);
    FAIL() << "expected failure";
  } catch (const ResumableError& e) {
    EXPECT_EQ(e.resume_index(), 3u);
  }
  const auto partial = load_captions(*opt.progress_path);
  EXPECT_EQ(partial.frame_count, 5u);
  EXPECT_EQ(partial.captions, std::vector<std::string>(kFixture.begin(), kFixture.begin() + 3));
}

TEST(GenerateCaptions, ResumeMatchesUninterruptedRun) {
  TempDir dir;
  MockFixture f = five_frame_fixture();
  f.failing_refs.insert("frame_0003");
  MockBackend failing(config(), f);
  CaptionOptions opt;
  opt.progress_path = dir / "beach.txt.partial";
  EXPECT_THROW(generate_captions(five_frame_record(), failing, opt), ResumableError);

  MockBackend healthy(config(), five_frame_fixture());
  const auto resumed = generate_captions(five_frame_record(), healthy, opt);
  EXPECT_EQ(healthy.call_count(), 2u);
  EXPECT_EQ(resumed.captions, kFixture);
  EXPECT_FALSE(std::filesystem::exists(*opt.progress_path));

  MockBackend fresh(config(), five_frame_fixture());
  EXPECT_EQ(generate_captions(five_frame_record(), fresh).captions, resumed.captions);
}

TEST(GenerateCaptions, ConcurrentRequestsKeepFrameOrder) {
  MockBackend mock(config(4), five_frame_fixture());
  EXPECT_EQ(generate_captions(five_frame_record(), mock).captions, kFixture);
}

TEST(GenerateCaptions, ConcurrentFailureStillReportsFirstFailedFrame) {
  TempDir dir;
  MockFixture f = five_frame_fixture();
  f.failing_refs.insert("frame_0001");
  f.failing_refs.insert("frame_0004");
  MockBackend mock(config(3), f);
  CaptionOptions opt;
  opt.progress_path = dir / "p";
  try {
    generate_captions(five_frame_record(), mock, opt);
    FAIL();
  } catch (const ResumableError& e) {
    EXPECT_EQ(e.resume_index(), 1u);
  }
  EXPECT_EQ(load_captions(*opt.progress_path).captions, std::vector<std::string>{kFixture[0]});
}

TEST(GenerateCaptions, UnresolvableRefFails) {
  auto r = five_frame_record();
  r.frame_refs[2] = "missing";
  MockBackend mock(config(), five_frame_fixture());
  try {
    generate_captions(r, mock);
    FAIL();
  } catch (const ResumableError& e) {
    EXPECT_EQ(e.resume_index(), 2u);
  }
}

TEST(GenerateCaptions, ProgressFileForAnotherLengthIsRejected) {
  TempDir dir;
  save_captions({"x"}, 9, dir / "p");
  MockBackend mock(config(), five_frame_fixture());
  CaptionOptions opt;
  opt.progress_path = dir / "p";
  EXPECT_THROW(generate_captions(five_frame_record(), mock, opt), SchemaError);
}

TEST(CaptionStyle, Names) {
  EXPECT_EQ(caption_prompt_style_from_string("generic"), CaptionPromptStyle::generic);
  EXPECT_EQ(caption_prompt_style_from_string("central-background"), CaptionPromptStyle::central_background);
  EXPECT_EQ(to_string(CaptionPromptStyle::central_background), "central-background");
  EXPECT_THROW(caption_prompt_style_from_string("fancy"), ConfigError);
}
