// Copyright 2026 The MARINE Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <bit>
#include <cmath>
#include <fstream>
#include <limits>

#include <gtest/gtest.h>

#include "marine/embed.hpp"
#include "marine/marf.hpp"
#include "test_util.hpp"

namespace marine {
namespace {

using testing::TempDir;

VideoFeature random_feature(Rng& rng, std::uint32_t k, std::uint32_t d, std::string tag = "vit-s14") {
  VideoFeature f;
  f.video_id = "vid";
  f.k = k;
  f.d = d;
  f.backbone = std::move(tag);
  for (std::uint32_t j = 0; j < k; ++j) f.frame_indices.push_back(static_cast<std::uint32_t>(rng.below(1000)));
  for (std::size_t i = 0; i < static_cast<std::size_t>(k) * d; ++i)
    f.values.push_back(static_cast<float>(rng.normal() * 3.0));
  return f;
}

TEST(Marf, HeaderLayout) {
  VideoFeature f{"x", {1.5f, -2.0f}, 1, 2, {7}, "ab"};
  const auto b = marf::encode(f);
  ASSERT_EQ(b.size(), 4u + 16u + 2u + 4u + 8u);
  EXPECT_EQ(std::string(b.begin(), b.begin() + 4), "MARF");
  auto u32 = [&](std::size_t at) {
    return static_cast<std::uint32_t>(b[at]) | static_cast<std::uint32_t>(b[at + 1]) << 8 |
           static_cast<std::uint32_t>(b[at + 2]) << 16 | static_cast<std::uint32_t>(b[at + 3]) << 24;
  };
  EXPECT_EQ(u32(4), 1u);   // version
  EXPECT_EQ(u32(8), 2u);   // d
  EXPECT_EQ(u32(12), 1u);  // k
  EXPECT_EQ(u32(16), 2u);  // tag length
  EXPECT_EQ(b[20], 'a');
  EXPECT_EQ(u32(22), 7u);  // frame index
  EXPECT_EQ(u32(26), std::bit_cast<std::uint32_t>(1.5f));
  EXPECT_EQ(u32(30), std::bit_cast<std::uint32_t>(-2.0f));
}

TEST(Marf, RoundTripIsBitExact) {
  Rng rng(5);
  TempDir dir("marf");
  for (int i = 0; i < 25; ++i) {
    auto f = random_feature(rng, 1 + static_cast<std::uint32_t>(rng.below(12)),
                            1 + static_cast<std::uint32_t>(rng.below(40)));
    if (i == 0) f.values[0] = -0.0f;
    f.video_id = "clip_" + std::to_string(i);
    write_feature(dir / (f.video_id + ".marf"), f);
    const auto g = read_feature(dir / (f.video_id + ".marf"));
    EXPECT_TRUE(bit_equal(f, g));
    EXPECT_EQ(g.video_id, f.video_id);
    EXPECT_EQ(g.backbone, f.backbone);
  }
}

TEST(Marf, NegativeZeroIsNotBitEqualToZero) {
  VideoFeature a{"a", {0.0f}, 1, 1, {0}, "t"}, b{"b", {-0.0f}, 1, 1, {0}, "t"};
  EXPECT_FALSE(bit_equal(a, b));
}

TEST(Marf, TruncatedFileFails) {
  Rng rng(1);
  const auto bytes = marf::encode(random_feature(rng, 3, 4));
  for (std::size_t cut : {std::size_t{0}, std::size_t{3}, std::size_t{10}, std::size_t{21}, bytes.size() - 1}) {
    const std::vector<std::uint8_t> part(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(cut));
    EXPECT_THROW(marf::decode(part), FormatError) << cut;
  }
  TempDir dir("trunc");
  {
    std::ofstream out(dir / "t.marf", std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size() - 2));
  }
  EXPECT_THROW(read_feature(dir / "t.marf"), FormatError);
}

TEST(Marf, RejectsBadHeaders) {
  Rng rng(2);
  const auto good = marf::encode(random_feature(rng, 2, 3));
  auto bad_magic = good;
  bad_magic[0] = 'X';
  EXPECT_THROW(marf::decode(bad_magic), FormatError);
  auto bad_version = good;
  bad_version[4] = 2;
  try {
    marf::decode(bad_version);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 4u);
  }
  auto zero_d = good;
  zero_d[8] = 0;
  try {
    marf::decode(zero_d);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 8u);
  }
  auto zero_k = good;
  zero_k[12] = 0;
  EXPECT_THROW(marf::decode(zero_k), FormatError);
  auto trailing = good;
  trailing.push_back(0);
  EXPECT_THROW(marf::decode(trailing), FormatError);
  auto nan = good;
  const auto bits = std::bit_cast<std::uint32_t>(std::numeric_limits<float>::quiet_NaN());
  for (int i = 0; i < 4; ++i) nan[nan.size() - 4 + static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(bits >> (8 * i));
  EXPECT_THROW(marf::decode(nan), FormatError);
}

TEST(Marf, FrameMajorLayout) {
  Rng rng(3);
  const auto f = random_feature(rng, 5, 6);
  for (std::size_t j = 0; j < 5; ++j) {
    auto g = f;
    for (auto& v : std::span<float>(g.values).subspan(j * 6, 6)) v += 1.0f;
    for (std::size_t p = 0; p < g.values.size(); ++p)
      EXPECT_EQ(g.values[p] != f.values[p], p / 6 == j) << p;
    EXPECT_EQ(f.frame_block(j)[0], f.values[j * 6]);
  }
}

TEST(MockEmbedder, ZeroAndUniformFrames) {
  const MockEmbedder e;
  EXPECT_EQ(e.dim(), 4u);
  EXPECT_EQ(e.identity(), "mock-v1");
  const Frame zero(8, 8, 3, 0), mid(8, 8, 3, 128);
  EXPECT_EQ(e.embed_frame({"v", 0, &zero}), (std::vector<float>{0, 0, 0, 0}));
  EXPECT_EQ(e.embed_frame({"v", 0, &mid}), (std::vector<float>{128, 0, 0, 0}));
}

TEST(MockEmbedder, StatisticsByHand) {
  // [[0, 10], [20, 30]]: mean 15, population std sqrt(125), |dx| = 10, |dy| = 20.
  const auto s = MockEmbedder::statistics(testing::grey_from(2, 2, {0, 10, 20, 30}));
  EXPECT_FLOAT_EQ(s[0], 15.0f);
  EXPECT_FLOAT_EQ(s[1], static_cast<float>(std::sqrt(125.0)));
  EXPECT_FLOAT_EQ(s[2], 10.0f);
  EXPECT_FLOAT_EQ(s[3], 20.0f);
}

TEST(MockEmbedder, DeterministicAndNeedsPixels) {
  Rng rng(4);
  const Frame f = testing::random_frame(rng, 16, 16);
  const MockEmbedder e;
  EXPECT_EQ(e.embed_frame({"v", 0, &f}), e.embed_frame({"v", 0, &f}));
  EXPECT_THROW(e.embed_frame({"v", 0, nullptr}), EmbedderError);
}

TEST(BuildVideoFeature, MockLengthAndOrder) {
  Rng rng(6);
  std::vector<Frame> frames;
  for (int i = 0; i < 24; ++i) frames.push_back(testing::random_frame(rng, 8, 8));
  const MockEmbedder e;
  const auto sel = select_evenly_spaced(24, 10);
  const auto f = build_video_feature(e, "clip", frames, sel);
  EXPECT_EQ(f.values.size(), 40u);
  EXPECT_EQ(f.k, 10u);
  EXPECT_EQ(f.d, 4u);
  EXPECT_EQ(f.backbone, "mock-v1");
  for (std::size_t j = 0; j < 10; ++j) {
    EXPECT_EQ(f.frame_indices[j], sel.indices[j]);
    const auto want = e.embed_frame({"clip", sel.indices[j], &frames[sel.indices[j]]});
    EXPECT_TRUE(std::equal(want.begin(), want.end(), f.frame_block(j).begin()));
  }
}

TEST(BuildVideoFeature, PaddedIndicesGiveIdenticalBlocks) {
  std::vector<Frame> frames{Frame(4, 4, 3, 9)};
  const MockEmbedder e;
  FrameSelection sel{{0, 0, 0, 0, 0}, 5, SelectionMethod::motion_based, std::nullopt};
  const auto f = build_video_feature(e, "one", frames, sel);
  for (std::size_t j = 1; j < 5; ++j)
    EXPECT_TRUE(std::equal(f.frame_block(0).begin(), f.frame_block(0).end(), f.frame_block(j).begin()));
}

// Counts calls to check that repeated indices are embedded once.
class CountingEmbedder final : public Embedder {
 public:
  std::string_view backend() const override { return "mock"; }
  std::size_t dim() const override { return 2; }
  const std::string& identity() const override { return id_; }
  std::vector<float> embed_frame(const FrameRef& ref) const override {
    ++calls;
    if (ref.index == 3) return {1.0f, std::numeric_limits<float>::infinity()};
    if (ref.index == 4) throw EmbedderError("backend exploded");
    return {static_cast<float>(ref.index), 0.5f};
  }
  mutable int calls = 0;

 private:
  std::string id_ = "count";
};

TEST(BuildVideoFeature, EmbedsRepeatsOnceAndReportsFrameIndex) {
  std::vector<Frame> frames(6, Frame(2, 2, 3));
  CountingEmbedder e;
  FrameSelection sel{{1, 2, 2, 2}, 4, SelectionMethod::motion_based, std::nullopt};
  build_video_feature(e, "v", frames, sel);
  EXPECT_EQ(e.calls, 2);
  FrameSelection nonfinite{{1, 3}, 2, SelectionMethod::motion_based, std::nullopt};
  EXPECT_THROW(build_video_feature(e, "v", frames, nonfinite), NumericError);
  FrameSelection failing{{4}, 1, SelectionMethod::motion_based, std::nullopt};
  try {
    build_video_feature(e, "v", frames, failing);
    FAIL();
  } catch (const EmbedderError& err) {
    EXPECT_NE(std::string(err.what()).find("frame 4"), std::string::npos);
  }
  FrameSelection outside{{9}, 1, SelectionMethod::motion_based, std::nullopt};
  EXPECT_THROW(build_video_feature(e, "v", frames, outside), InvalidInput);
}

TEST(FeatureStore, ServesStoredVectorsBitExact) {
  Rng rng(8);
  TempDir dir("store");
  auto a = random_feature(rng, 3, 5), b = random_feature(rng, 3, 5);
  a.frame_indices = {0, 4, 9};
  b.frame_indices = {1, 2, 3};
  write_feature(dir / "a.marf", a);
  write_feature(dir / "b.marf", b);
  const FeatureStoreEmbedder store(dir.path());
  EXPECT_EQ(store.dim(), 5u);
  EXPECT_EQ(store.identity(), "vit-s14");
  EXPECT_FALSE(store.needs_pixels());
  const auto v = store.embed_frame({"a", 4, nullptr});
  EXPECT_TRUE(std::equal(v.begin(), v.end(), a.frame_block(1).begin(), [](float x, float y) {
    return std::bit_cast<std::uint32_t>(x) == std::bit_cast<std::uint32_t>(y);
  }));
  EXPECT_THROW(store.embed_frame({"a", 5, nullptr}), EmbedderError);
  EXPECT_THROW(store.embed_frame({"zzz", 0, nullptr}), EmbedderError);

  // Re-assembling the selection from the store reproduces the file.
  FrameSelection sel{{0, 4, 9}, 3, SelectionMethod::motion_based, std::nullopt};
  const auto rebuilt = build_video_feature(store, "a", std::span<const Frame>(), sel);
  EXPECT_TRUE(bit_equal(rebuilt, a));
}

TEST(FeatureStore, RejectsMixedBackbonesAndMissingDirectory) {
  Rng rng(9);
  TempDir dir("mixed");
  write_feature(dir / "a.marf", random_feature(rng, 2, 4, "vit-s14"));
  write_feature(dir / "b.marf", random_feature(rng, 2, 4, "vit-g14"));
  EXPECT_THROW(FeatureStoreEmbedder{dir.path()}, ConfigError);
  EXPECT_THROW(FeatureStoreEmbedder{dir / "missing"}, ConfigError);
}

}  // namespace
}  // namespace marine
