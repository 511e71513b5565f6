#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "cmfd/error.hpp"
#include "cmfd/imaging.hpp"
#include "support.hpp"

using namespace cmfd;
using cmfd::test::data_path;

TEST(LoadImage, WhitePixel) {
  const RasterImage img = load_image(data_path("white_1x1.png"));
  EXPECT_EQ(img.width, 1);
  EXPECT_EQ(img.height, 1);
  ASSERT_EQ(img.channels, 3);
  EXPECT_EQ(img.data, (std::vector<std::uint8_t>{255, 255, 255}));
}

TEST(LoadImage, CheckerboardMatchesReferenceDecoder) {
  // Pixels as decoded by an independent PNG reader.
  const std::vector<std::uint8_t> expected{255, 0, 0, 0, 255, 0,
                                           0, 0, 255, 255, 255, 255};
  const RasterImage img = load_image(data_path("checker_2x2.png"));
  ASSERT_EQ(img.width, 2);
  ASSERT_EQ(img.height, 2);
  ASSERT_EQ(img.channels, 3);
  EXPECT_EQ(img.data, expected);
}

TEST(LoadImage, SixteenBitIsScaledToEightBit) {
  // source samples 0, 65535, 25700, 51400
  const RasterImage img = load_image(data_path("gray16_2x2.png"));
  ASSERT_EQ(img.channels, 1);
  EXPECT_EQ(img.data, (std::vector<std::uint8_t>{0, 255, 100, 200}));
}

TEST(LoadImage, TruncatedFileIsFormatError) {
  EXPECT_THROW(load_image(data_path("truncated.png")), FormatError);
}

TEST(LoadImage, MissingFileIsIoError) {
  EXPECT_THROW(load_image(data_path("does_not_exist.png")), IoError);
}

TEST(LoadImage, SaveRoundTrip) {
  cmfd::test::TempDir dir("imaging");
  const RasterImage src = synthetic_texture(17, 9, 3);
  save_image(dir / "x.png", src);
  const RasterImage back = load_image(dir / "x.png");
  EXPECT_EQ(back.width, src.width);
  EXPECT_EQ(back.height, src.height);
  EXPECT_EQ(back.data, src.data);
}

TEST(ToGray, PureRed) {
  RasterImage img{1, 1, 3, {255, 0, 0}};
  EXPECT_EQ(to_gray(img).data[0], 76);
}

TEST(ToGray, NeutralGrayIsFixedPoint) {
  RasterImage img{1, 1, 3, {128, 128, 128}};
  EXPECT_EQ(to_gray(img).data[0], 128);
}

TEST(ToGray, SingleChannelUnchangedAndIdempotent) {
  RasterImage img{3, 1, 1, {0, 77, 255}};
  const GrayImage g = to_gray(img);
  EXPECT_EQ(g.data, img.data);
  RasterImage again{g.width, g.height, 1, g.data};
  EXPECT_EQ(to_gray(again).data, g.data);
}

TEST(ScalingFactor, Examples) {
  EXPECT_EQ(scaling_factor(728, 1024), 4);
  EXPECT_EQ(scaling_factor(2300, 3000), 2);
  EXPECT_EQ(scaling_factor(1024, 1024), 2);
  EXPECT_EQ(scaling_factor(1023, 1024), 4);
}

TEST(ScalingFactor, AlwaysTwoOrFour) {
  for (int h = 1; h < 4000; h += 37) {
    for (int w = 1; w < 4000; w += 53) {
      const int s = scaling_factor(h, w);
      EXPECT_TRUE(s == 2 || s == 4);
    }
  }
}

TEST(ResolutionClass, Classify) {
  EXPECT_EQ(classify_resolution(512, 512), ResolutionClass::small);
  EXPECT_EQ(classify_resolution(728, 1024), ResolutionClass::medium);
  EXPECT_EQ(classify_resolution(3000, 2300), ResolutionClass::large);
  EXPECT_STREQ(to_string(ResolutionClass::medium), "medium");
}

TEST(Upscale, ConstantFieldIsPreserved) {
  const GrayImage up = upscale(GrayImage(5, 3, 64), 2);
  EXPECT_EQ(up.width, 10);
  EXPECT_EQ(up.height, 6);
  for (auto v : up.data) EXPECT_EQ(v, 64);
}

TEST(Upscale, RampMatchesKernelOracle) {
  GrayImage ramp(3, 3);
  ramp.data = {0, 10, 20, 30, 40, 50, 60, 70, 80};
  // Keys kernel, a = -0.5, corner-aligned grid, replicated borders; evaluated
  // separately in double precision.
  const std::vector<std::uint8_t> expected{
      0,  3,  8,  12, 17, 20, 10, 13, 18, 22, 27, 30, 24, 27, 31, 36, 40, 44,
      36, 40, 44, 49, 53, 56, 50, 53, 58, 62, 67, 70, 60, 63, 68, 72, 77, 80};
  const GrayImage up = upscale(ramp, 2);
  ASSERT_EQ(up.width, 6);
  ASSERT_EQ(up.height, 6);
  EXPECT_EQ(up.data, expected);
  EXPECT_EQ(up.at(0, 0), 0);
  EXPECT_EQ(up.at(5, 0), 20);
  EXPECT_EQ(up.at(0, 5), 60);
  EXPECT_EQ(up.at(5, 5), 80);
}

TEST(Upscale, InvalidFactor) {
  EXPECT_THROW(upscale(GrayImage(4, 4), 3), PreconditionError);
  EXPECT_THROW(upscale(GrayImage(4, 4), 1), PreconditionError);
}

TEST(Upscale, PixelBudget) {
  EXPECT_THROW(upscale(GrayImage(100, 100), 4, 100 * 100 * 15), ResourceError);
  EXPECT_NO_THROW(upscale(GrayImage(100, 100), 4, 100 * 100 * 16));
}

TEST(Upscale, DimensionsAreExactMultiples) {
  for (int s : {2, 4}) {
    for (auto [w, h] : {std::pair{1, 1}, std::pair{7, 3}, std::pair{20, 31}}) {
      const GrayImage up = upscale(cmfd::test::textured_gray(w, h, 5), s);
      EXPECT_EQ(up.width, s * w);
      EXPECT_EQ(up.height, s * h);
    }
  }
}

TEST(Entropy, ConstantImageIsZero) {
  const EntropyMap e = entropy_map(GrayImage(20, 20, 9));
  for (double v : e.data) EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(Entropy, EightyOneDistinctValues) {
  GrayImage img(9, 9);
  for (int i = 0; i < 81; ++i) img.data[i] = static_cast<std::uint8_t>(i * 3);
  const EntropyMap e = entropy_map(img);
  EXPECT_NEAR(e.at(4, 4), 6.339850002885, 1e-9);
}

TEST(Entropy, FortyFortyOneSplit) {
  GrayImage img(9, 9);
  for (int i = 0; i < 81; ++i) img.data[i] = i < 40 ? 10 : 200;
  const EntropyMap e = entropy_map(img);
  EXPECT_NEAR(e.at(4, 4), 0.999890052455, 1e-9);
}

TEST(Entropy, BorderUsesSymmetricPadding) {
  // Left column 0, rest 100. At x = 0 the window covers columns
  // {-4..4} -> {3,2,1,0,0,1,2,3,4}: two zero columns out of nine.
  GrayImage img(12, 12, 100);
  for (int y = 0; y < 12; ++y) img.at(0, y) = 0;
  const EntropyMap e = entropy_map(img);
  const double p = 2.0 / 9.0;
  EXPECT_NEAR(e.at(0, 6), -(p * std::log2(p) + (1 - p) * std::log2(1 - p)), 1e-9);
}

TEST(Entropy, ValuesStayInRange) {
  const GrayImage img = cmfd::test::textured_gray(64, 48, 11);
  const EntropyMap e = entropy_map(img);
  const double hi = std::log2(81.0);
  for (double v : e.data) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, hi + 1e-12);
  }
}

TEST(Entropy, NoiseImageStaysInRange) {
  GrayImage img(40, 40);
  std::mt19937 rng(1);
  for (auto& v : img.data) v = static_cast<std::uint8_t>(rng() & 0xFF);
  for (double v : entropy_map(img).data) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 6.34);
  }
}

TEST(Entropy, RejectsEvenWindow) {
  EXPECT_THROW(entropy_map(GrayImage(10, 10), 8), PreconditionError);
}

TEST(Bilinear, InterpolatesAndClamps) {
  GrayImage img(2, 2);
  img.data = {0, 100, 100, 200};
  EXPECT_DOUBLE_EQ(sample_bilinear(img, 0.5, 0.5), 100.0);
  EXPECT_DOUBLE_EQ(sample_bilinear(img, 0.25, 0.0), 25.0);
  EXPECT_DOUBLE_EQ(sample_bilinear(img, -3.0, 7.0), 100.0);
}
