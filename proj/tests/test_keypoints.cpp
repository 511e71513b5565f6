#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cmfd/error.hpp"
#include "cmfd/keypoints.hpp"
#include "support.hpp"

using namespace cmfd;

namespace {

GrayImage blob_image(int size, double cx, double cy, double sigma) {
  GrayImage img(size, size, 40);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double r2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
      img.at(x, y) = static_cast<std::uint8_t>(
          std::lround(40 + 180 * std::exp(-r2 / (2 * sigma * sigma))));
    }
  }
  return img;
}

GrayImage rotate90(const GrayImage& img) {
  // clockwise: (x, y) -> (h - 1 - y, x)
  GrayImage out(img.height, img.width);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) out.at(img.height - 1 - y, x) = img.at(x, y);
  }
  return out;
}

double descriptor_distance(const Descriptor& a, const Descriptor& b) {
  double s = 0;
  for (int i = 0; i < kDescriptorSize; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

}  // namespace

TEST(Detect, ConstantImageHasNoKeypoints) {
  EXPECT_TRUE(detect_keypoints(GrayImage(64, 64, 128)).empty());
}

TEST(Detect, TooSmall) {
  EXPECT_THROW(detect_keypoints(GrayImage(15, 40, 0)), InputTooSmallError);
  EXPECT_NO_THROW(detect_keypoints(GrayImage(16, 16, 0)));
}

TEST(Detect, NegativeContrastThresholdRejected) {
  EXPECT_THROW(detect_keypoints(GrayImage(32, 32, 0), -0.1), PreconditionError);
}

TEST(Detect, OctaveCount) {
  EXPECT_EQ(octave_count(512, 512), 7);
  EXPECT_EQ(octave_count(2048, 1500), 8);
  EXPECT_EQ(octave_count(16, 16), 2);
}

TEST(Detect, GaussianBlobIsLocalized) {
  const double cx = 40.3, cy = 37.6, sigma = 4.0;
  const KeypointSet kps = detect_keypoints(blob_image(80, cx, cy, sigma));
  bool found = false;
  for (const auto& k : kps.keypoints) {
    const double d = std::hypot(k.x - cx, k.y - cy);
    if (d <= 2.0 && k.sigma >= sigma / 2 && k.sigma <= sigma * 2) found = true;
  }
  EXPECT_TRUE(found);
}

TEST(Detect, DescriptorsHaveUnitNorm) {
  const KeypointSet kps = detect_keypoints(cmfd::test::textured_gray(96, 96, 2));
  ASSERT_FALSE(kps.empty());
  ASSERT_EQ(kps.descriptors.size(), kps.keypoints.size());
  for (const auto& d : kps.descriptors) {
    double n = 0;
    for (float v : d) {
      EXPECT_GE(v, 0.0f);
      n += static_cast<double>(v) * v;
    }
    EXPECT_NEAR(std::sqrt(n), 1.0, 1e-6);
  }
}

TEST(Detect, KeypointsInsideBoundsAndOrdered) {
  const GrayImage img = cmfd::test::textured_gray(90, 70, 4);
  const KeypointSet kps = detect_keypoints(img);
  ASSERT_FALSE(kps.empty());
  for (const auto& k : kps.keypoints) {
    EXPECT_GT(k.x, 0.0);
    EXPECT_GT(k.y, 0.0);
    EXPECT_LT(k.x, img.width - 1.0);
    EXPECT_LT(k.y, img.height - 1.0);
    EXPECT_GE(k.theta, 0.0);
    EXPECT_LT(k.theta, 360.0);
    EXPECT_GT(k.sigma, 0.0);
  }
  auto key = [](const Keypoint& k) {
    return std::tuple(k.octave, k.layer, k.y, k.x, k.theta);
  };
  for (std::size_t i = 1; i < kps.size(); ++i) {
    EXPECT_LE(key(kps.keypoints[i - 1]), key(kps.keypoints[i]));
  }
}

TEST(Detect, Deterministic) {
  const GrayImage img = cmfd::test::textured_gray(80, 80, 9);
  const KeypointSet a = detect_keypoints(img);
  const KeypointSet b = detect_keypoints(img);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.keypoints[i].x, b.keypoints[i].x);
    EXPECT_EQ(a.keypoints[i].theta, b.keypoints[i].theta);
    EXPECT_EQ(a.descriptors[i], b.descriptors[i]);
  }
}

TEST(Detect, LowerContrastThresholdNeverLosesKeypoints) {
  const GrayImage img = cmfd::test::textured_gray(96, 96, 12);
  std::size_t previous = std::numeric_limits<std::size_t>::max();
  for (double t : {0.0, 0.005, 0.01, 0.02, 0.04, 0.08}) {
    const std::size_t n = detect_keypoints(img, t).size();
    EXPECT_LE(n, previous) << "threshold " << t;
    previous = n;
  }
}

TEST(Detect, RotationInvariance) {
  const GrayImage img = cmfd::test::textured_gray(128, 128, 21);
  const GrayImage rot = rotate90(img);
  const KeypointSet a = detect_keypoints(img);
  const KeypointSet b = detect_keypoints(rot);
  ASSERT_FALSE(a.empty());
  const double ratio = static_cast<double>(b.size()) / static_cast<double>(a.size());
  EXPECT_NEAR(ratio, 1.0, 0.1);

  // Pair keypoints through the known rotation and compare descriptors.
  std::size_t paired = 0, close = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& k = a.keypoints[i];
    const double rx = img.height - 1 - k.y;
    const double ry = k.x;
    double best = 1e9;
    std::size_t best_j = 0;
    for (std::size_t j = 0; j < b.size(); ++j) {
      const auto& q = b.keypoints[j];
      if (std::abs(q.sigma - k.sigma) > 0.1 * k.sigma) continue;
      const double dtheta = std::remainder(q.theta - k.theta - 90.0, 360.0);
      if (std::abs(dtheta) > 5.0) continue;
      const double d = std::hypot(q.x - rx, q.y - ry);
      if (d < best) {
        best = d;
        best_j = j;
      }
    }
    if (best > 0.5) continue;
    ++paired;
    if (descriptor_distance(a.descriptors[i], b.descriptors[best_j]) < 0.3) ++close;
  }
  ASSERT_GT(paired, a.size() / 2);
  EXPECT_GE(static_cast<double>(close) / paired, 0.95);
}

TEST(Coverage, EmptyIsZero) {
  EXPECT_DOUBLE_EQ(coverage_rate({}, 32, 32), 0.0);
}

TEST(Coverage, EveryPixelIsSaturated) {
  std::vector<Keypoint> kps;
  for (int y = 0; y < 32; ++y) {
    for (int x = 0; x < 32; ++x) kps.push_back({double(x), double(y), 1.6, 0, 0, 0});
  }
  EXPECT_DOUBLE_EQ(coverage_rate(kps, 32, 32), 1.0);
}

TEST(Coverage, CenteredWindowCount) {
  // Four keypoints at one location cover exactly the 16x16 window of
  // pixels whose centred windows contain it.
  std::vector<Keypoint> kps(4, Keypoint{20, 20, 1.6, 0, 0, 0});
  const double expected = 16.0 * 16.0 / (64.0 * 64.0);
  EXPECT_DOUBLE_EQ(coverage_rate(kps, 64, 64), expected);
}

TEST(Coverage, GrowsWithUpsampling) {
  for (std::uint64_t seed : {31u, 32u}) {
    const GrayImage img = cmfd::test::textured_gray(96, 96, seed);
    double previous = -1.0;
    for (int s : {1, 2, 4}) {
      const GrayImage up = resize_bicubic(img, s);
      KeypointSet kps = detect_keypoints(up);
      const double f = (img.width - 1.0) / (s * img.width - 1.0);
      for (auto& k : kps.keypoints) {
        k.x *= f;
        k.y *= f;
      }
      const double c = coverage_rate(kps.keypoints, img.width, img.height);
      EXPECT_GE(c, previous) << "seed " << seed << " scale " << s;
      previous = c;
    }
  }
}
