#include <gtest/gtest.h>

#include <filesystem>

#include "bvsr/image.hpp"
#include "bvsr/operators.hpp"
#include "bvsr/png_io.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace bvsr;

TEST(Frame, RejectsInconsistentSampleCount) {
  EXPECT_THROW(Frame(2, 2, 1, std::vector<double>(3)), DimensionError);
  EXPECT_THROW(Frame(0, 2, 1), DimensionError);
}

TEST(Sequence, RejectsMixedShapes) {
  Sequence seq;
  seq.push_back(Frame(4, 4, 3));
  EXPECT_THROW(seq.push_back(Frame(4, 5, 3)), DimensionError);
  EXPECT_THROW(Sequence(std::vector<Frame>{}), DimensionError);
}

TEST(Clamp01, MapsOutOfRangeSamples) {
  Frame f(1, 3, 1, std::vector<double>{-0.2, 0.5, 1.7});
  const Frame c = clamp01(f);
  EXPECT_EQ(c.at(0, 0), 0.0);
  EXPECT_EQ(c.at(0, 1), 0.5);
  EXPECT_EQ(c.at(0, 2), 1.0);
  const Frame in_range = bvsr::testing::random_frame(5, 4, 3, 1);
  EXPECT_EQ(clamp01(in_range), in_range);
}

TEST(SpaceToDepth, BlockRasterOrdering) {
  Frame f(2, 2, 1, std::vector<double>{1, 2, 3, 4});
  const Frame d = space_to_depth(f, 2);
  ASSERT_EQ(d.height(), 1);
  ASSERT_EQ(d.width(), 1);
  ASSERT_EQ(d.channels(), 4);
  for (int c = 0; c < 4; ++c) EXPECT_EQ(d.at(0, 0, c), c + 1.0);
  EXPECT_EQ(depth_to_space(d, 2), f);
}

TEST(SpaceToDepth, FactorOneIsIdentity) {
  const Frame f = bvsr::testing::random_frame(3, 5, 3, 2);
  EXPECT_EQ(space_to_depth(f, 1), f);
  EXPECT_EQ(depth_to_space(f, 1), f);
}

TEST(SpaceToDepth, OriginalChannelsOutermost) {
  Frame f(2, 2, 2);
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 2; ++x)
      for (int c = 0; c < 2; ++c) f.at(y, x, c) = 10 * c + 2 * y + x;
  const Frame d = space_to_depth(f, 2);
  for (int c = 0; c < 8; ++c) EXPECT_EQ(d.at(0, 0, c), 10 * (c / 4) + c % 4);
}

TEST(SpaceToDepth, ExhaustiveRoundTrip) {
  for (int s : {1, 2, 4})
    for (int h = s; h <= 8; h += s)
      for (int w = s; w <= 8; w += s)
        for (int c : {1, 3}) {
          const Frame f = bvsr::testing::random_frame(h, w, c, static_cast<std::uint64_t>(h * 100 + w * 10 + c + s));
          const Frame d = space_to_depth(f, s);
          EXPECT_EQ(d.channels(), c * s * s);
          EXPECT_EQ(depth_to_space(d, s), f);
        }
}

TEST(SpaceToDepth, DimensionErrors) {
  EXPECT_THROW(space_to_depth(Frame(3, 4, 1), 2), DimensionError);
  EXPECT_THROW(depth_to_space(Frame(2, 2, 3), 2), DimensionError);
}

TEST(BicubicResize, ScaleOneIsIdentity) {
  const Frame f = bvsr::testing::random_frame(6, 7, 3, 3);
  EXPECT_EQ(bicubic_resize(f, 1.0), f);
}

TEST(BicubicResize, PreservesConstants) {
  Frame f(5, 6, 3, 0.37);
  for (double s : {0.5, 1.5, 2.0, 3.0, 4.0}) {
    const Frame unclamped = detail::resample(f, static_cast<int>(std::lround(5 * s)),
                                             static_cast<int>(std::lround(6 * s)), &catmull_rom, 2.0);
    for (double v : unclamped.samples()) EXPECT_NEAR(v, 0.37, 1e-12);
  }
}

TEST(BicubicResize, RampUpsampleMatchesScalarOracle) {
  Frame f(4, 4, 1);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) f.at(y, x) = 0.05 * x + 0.2 * y;
  const Frame up = bicubic_resize(f, 2.0);
  ASSERT_EQ(up.height(), 8);
  ASSERT_EQ(up.width(), 8);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) {
      const double expected = std::clamp(oracle::bicubic_upsample_at(f, 2, y, x, 0), 0.0, 1.0);
      EXPECT_NEAR(up.at(y, x), expected, 1e-14) << y << "," << x;
    }
}

TEST(BicubicResize, IntegerUpsampleKeepsDecimationPhase) {
  const Frame f = bvsr::testing::random_frame(5, 6, 3, 4);
  const Frame up = bicubic_resize(f, 3.0);
  const Frame back = decimate(up, 3);
  for (std::size_t i = 0; i < f.size(); ++i) EXPECT_NEAR(back.data()[i], f.data()[i], 1e-14);
}

TEST(BicubicResize, ZeroSizedOutputRejected) {
  EXPECT_THROW(bicubic_resize(Frame(2, 2, 1), 0.1), DimensionError);
  EXPECT_THROW(bicubic_resize(Frame(2, 2, 1), -1.0), DimensionError);
}

TEST(BicubicResize, OutputIsClamped) {
  Frame f(1, 4, 1, std::vector<double>{0, 0, 1, 1});
  for (const Frame out = bicubic_resize(f, 4.0); double v : out.samples()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

class PngTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("bvsr_png_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    std::filesystem::create_directories(dir_);
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }
  std::filesystem::path dir_;
};

TEST_F(PngTest, EightBitCodesRoundTripExactly) {
  Frame f(3, 4, 3);
  for (std::size_t i = 0; i < f.size(); ++i) f.data()[i] = static_cast<double>((i * 37) % 256) / 255.0;
  write_png(dir_ / "a.png", f, 8);
  const Frame g = read_png(dir_ / "a.png");
  ASSERT_TRUE(g.same_shape(f));
  for (std::size_t i = 0; i < f.size(); ++i) EXPECT_EQ(g.data()[i], f.data()[i]);
}

TEST_F(PngTest, SixteenBitQuantization) {
  const Frame f = bvsr::testing::random_frame(5, 3, 1, 9);
  write_png(dir_ / "b.png", f, 16);
  const Frame g = read_png(dir_ / "b.png");
  for (std::size_t i = 0; i < f.size(); ++i) EXPECT_NEAR(g.data()[i], f.data()[i], 0.5 / 65535.0 + 1e-15);
}

TEST_F(PngTest, EncodeClampsAndRoundsHalfUp) {
  EXPECT_EQ(quantize_sample(-0.3, 8), 0u);
  EXPECT_EQ(quantize_sample(1.3, 8), 255u);
  EXPECT_EQ(quantize_sample(0.5 / 255.0, 8), 1u);
  EXPECT_EQ(quantize_sample(1.0, 16), 65535u);
}

TEST_F(PngTest, MissingAndCorruptFiles) {
  EXPECT_THROW(read_png(dir_ / "missing.png"), IoError);
  std::ofstream(dir_ / "bad.png") << "not a png";
  EXPECT_THROW(read_png(dir_ / "bad.png"), IoError);
  EXPECT_THROW(read_sequence(dir_ / "nothing_here"), IoError);
}

TEST_F(PngTest, SequenceRoundTripUsesNumberedNames) {
  Sequence seq;
  for (int i = 0; i < 3; ++i) seq.push_back(Frame(2, 2, 1, i / 255.0));
  write_sequence(dir_, seq);
  EXPECT_TRUE(std::filesystem::exists(dir_ / "frame_000002.png"));
  const Sequence back = read_sequence(dir_);
  ASSERT_EQ(back.size(), 3u);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(back[i].at(1, 1), i / 255.0);
}
