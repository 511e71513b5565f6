#include <gtest/gtest.h>

#include <cmath>
#include <optional>
#include <random>

#include <Eigen/LU>

#include "cmfd/error.hpp"

#include "cmfd/geometry.hpp"

using namespace cmfd;

namespace {

std::vector<Correspondence> mapped(const Homography& h, const std::vector<Point2>& pts) {
  std::vector<Correspondence> out;
  for (const auto& p : pts) out.push_back({p, h.apply(p)});
  return out;
}

std::vector<Point2> random_points(std::mt19937_64& rng, int n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<Point2> pts;
  for (int i = 0; i < n; ++i) pts.push_back({u(rng), u(rng)});
  return pts;
}

double max_abs_diff(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace

TEST(Apply, IdentityAndTranslation) {
  const Point2 p = apply(Homography(), 10, 20);
  EXPECT_DOUBLE_EQ(p.x, 10);
  EXPECT_DOUBLE_EQ(p.y, 20);
  const Point2 q = apply(Homography::translation(50, 0), 3, 7);
  EXPECT_DOUBLE_EQ(q.x, 53);
  EXPECT_DOUBLE_EQ(q.y, 7);
}

TEST(Apply, PointAtInfinity) {
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  m(2, 0) = 1.0;
  m(2, 2) = -10.0;
  const Homography h(m);
  EXPECT_THROW(h.apply({10.0, 0.0}), PointAtInfinityError);
  EXPECT_FALSE(h.try_apply({10.0, 0.0}).has_value());
}

TEST(Apply, RoundTripOnRandomMatrices) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int tested = 0;
  while (tested < 200) {
    Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) m(r, c) += 0.3 * u(rng);
    }
    m(2, 0) *= 1e-3;
    m(2, 1) *= 1e-3;
    if (std::abs(m.determinant()) < 0.1) continue;
    const Homography h(m);
    const Homography inv = h.inverse();
    for (int k = 0; k < 5; ++k) {
      const Point2 p{100 * u(rng), 100 * u(rng)};
      const auto q = inv.try_apply(p);
      if (!q) continue;
      const Point2 back = h.apply(*q);
      EXPECT_NEAR(back.x, p.x, 1e-9);
      EXPECT_NEAR(back.y, p.y, 1e-9);
    }
    ++tested;
  }
}

TEST(Homography, SingularMatrixRejected) {
  EXPECT_THROW(Homography(Eigen::Matrix3d::Zero()), DegeneracyError);
  Eigen::Matrix3d m;
  m << 1, 2, 3, 2, 4, 6, 0, 0, 1;
  EXPECT_THROW(Homography{m}, DegeneracyError);
}

TEST(Homography, SingularInverseRejected) {
  // fine after normalisation, but the normalised inverse collapses
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  m(2, 2) = 1e-7;
  EXPECT_THROW(Homography{m}, DegeneracyError);
}

TEST(Homography, ValidModelsAreInvertible) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  int built = 0;
  for (int t = 0; t < 500; ++t) {
    Eigen::Matrix3d m;
    for (int i = 0; i < 9; ++i) m(i / 3, i % 3) = u(rng) * (i >= 6 ? 1e-3 : 1.0);
    std::optional<Homography> h;
    try {
      h = Homography(m);
    } catch (const DegeneracyError&) {
      continue;
    }
    ++built;
    EXPECT_NO_THROW(h->inverse());
  }
  EXPECT_GT(built, 400);
}

TEST(Homography, NormalisesBottomRight) {
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity() * 2.0;
  EXPECT_DOUBLE_EQ(Homography(m)(2, 2), 1.0);
  EXPECT_DOUBLE_EQ(Homography(m)(0, 0), 1.0);
}

TEST(Dlt, UnitSquareIdentity) {
  const std::vector<Correspondence> c{
      {{0, 0}, {0, 0}}, {{1, 0}, {1, 0}}, {{1, 1}, {1, 1}}, {{0, 1}, {0, 1}}};
  EXPECT_LT(max_abs_diff(estimate_dlt(c).matrix(), Eigen::Matrix3d::Identity()), 1e-9);
}

TEST(Dlt, KnownSimilarity) {
  const Homography truth = Homography::similarity(30.0, 1.2, 5.0, -3.0);
  const auto c = mapped(truth, {{0, 0}, {10, 2}, {3, 12}, {-7, 5}});
  EXPECT_LT(max_abs_diff(estimate_dlt(c).matrix(), truth.matrix()), 1e-6);
}

TEST(Dlt, SimilarityFactoryMatchesClosedForm) {
  const Homography h = Homography::similarity(30.0, 1.2, 5.0, -3.0);
  const double c = 1.2 * std::cos(M_PI / 6), s = 1.2 * std::sin(M_PI / 6);
  Eigen::Matrix3d m;
  m << c, -s, 5, s, c, -3, 0, 0, 1;
  EXPECT_LT(max_abs_diff(h.matrix(), m), 1e-12);
}

TEST(Dlt, CollinearTripleIsDegenerate) {
  const std::vector<Correspondence> c{
      {{0, 0}, {1, 1}}, {{1, 1}, {2, 2}}, {{2, 2}, {3, 3}}, {{0, 5}, {1, 6}}};
  EXPECT_THROW(estimate_dlt(c), DegeneracyError);
}

TEST(Dlt, TooFewPairs) {
  const std::vector<Correspondence> c{{{0, 0}, {0, 0}}, {{1, 0}, {1, 0}}, {{1, 1}, {1, 1}}};
  EXPECT_THROW(estimate_dlt(c), InsufficientDataError);
}

TEST(Dlt, ProjectiveExact) {
  Eigen::Matrix3d m;
  m << 1.1, 0.05, 3, -0.02, 0.95, -4, 1e-4, -2e-4, 1;
  const Homography truth(m);
  const auto c = mapped(truth, {{0, 0}, {100, 0}, {100, 80}, {0, 80}, {50, 40}, {20, 70}});
  EXPECT_LT(max_abs_diff(estimate_dlt(c).matrix(), truth.matrix()), 1e-8);
}

TEST(Ransac, TranslationWithOutliers) {
  std::mt19937_64 rng(3);
  const Homography truth = Homography::translation(120.0, -35.0);
  auto c = mapped(truth, random_points(rng, 20, 0, 400));
  std::uniform_real_distribution<double> u(0, 500);
  for (int i = 0; i < 5; ++i) c.push_back({{u(rng), u(rng)}, {u(rng), u(rng)}});
  const RansacResult r = ransac_homography(c, RansacParams{}, 42);
  const Point2 p = r.model.apply({0, 0});
  EXPECT_NEAR(p.x, 120.0, 0.5);
  EXPECT_NEAR(p.y, -35.0, 0.5);
  for (std::size_t i = 0; i < 20; ++i) {
    EXPECT_TRUE(std::find(r.inliers.begin(), r.inliers.end(), i) != r.inliers.end());
  }
}

TEST(Ransac, FourExactPairs) {
  const Homography truth = Homography::similarity(10, 0.9, 4, 4);
  const auto c = mapped(truth, {{0, 0}, {30, 0}, {30, 20}, {0, 20}});
  const RansacResult r = ransac_homography(c, RansacParams{}, 1);
  EXPECT_EQ(r.inliers.size(), 4u);
  EXPECT_LT(max_abs_diff(r.model.matrix(), truth.matrix()), 1e-6);
}

TEST(Ransac, TooFew) {
  const std::vector<Correspondence> c(3);
  EXPECT_THROW(ransac_homography(c, RansacParams{}, 0), InsufficientDataError);
}

TEST(Ransac, PureNoisePinnedSeed) {
  std::mt19937_64 rng(99);
  std::vector<Correspondence> c;
  for (int i = 0; i < 10; ++i) {
    const auto p = random_points(rng, 2, 0, 1000);
    c.push_back({p[0], p[1]});
  }
  EXPECT_THROW(ransac_homography(c, RansacParams{}, 5), NoModelError);
}

TEST(Ransac, PureNoiseFailsAlmostAlways) {
  // Monte Carlo over point sets and seeds.
  int failures = 0;
  const int trials = 400;
  for (int t = 0; t < trials; ++t) {
    std::mt19937_64 rng(1000 + t);
    std::vector<Correspondence> c;
    for (int i = 0; i < 10; ++i) {
      const auto p = random_points(rng, 2, 0, 1000);
      c.push_back({p[0], p[1]});
    }
    try {
      ransac_homography(c, RansacParams{}, static_cast<std::uint64_t>(t));
    } catch (const NoModelError&) {
      ++failures;
    }
  }
  EXPECT_GE(static_cast<double>(failures) / trials, 0.99);
}

TEST(Ransac, InlierListIsExactlyBelowThreshold) {
  std::mt19937_64 rng(11);
  const Homography truth = Homography::similarity(-20, 1.1, 30, 60);
  auto c = mapped(truth, random_points(rng, 30, 0, 300));
  std::normal_distribution<double> n(0.0, 1.5);
  for (auto& x : c) {
    x.dst.x += n(rng);
    x.dst.y += n(rng);
  }
  std::uniform_real_distribution<double> u(0, 400);
  for (int i = 0; i < 8; ++i) c.push_back({{u(rng), u(rng)}, {u(rng), u(rng)}});
  const RansacParams p;
  const RansacResult r = ransac_homography(c, p, 77);
  std::vector<std::size_t> expected;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (transfer_error(r.model, c[i]) < p.t_in) expected.push_back(i);
  }
  EXPECT_EQ(r.inliers, expected);
}

TEST(Ransac, DeterministicForSeed) {
  std::mt19937_64 rng(5);
  auto c = mapped(Homography::similarity(25, 0.9, 10, 10), random_points(rng, 20, 0, 300));
  std::uniform_real_distribution<double> u(0, 300);
  for (int i = 0; i < 5; ++i) c.push_back({{u(rng), u(rng)}, {u(rng), u(rng)}});
  const RansacResult a = ransac_homography(c, RansacParams{}, 9);
  const RansacResult b = ransac_homography(c, RansacParams{}, 9);
  EXPECT_EQ(a.model.matrix(), b.model.matrix());
  EXPECT_EQ(a.inliers, b.inliers);
}

TEST(Ransac, TranslationEquivariance) {
  std::mt19937_64 rng(8);
  const Homography truth = Homography::similarity(15, 1.05, 40, -10);
  const auto pts = random_points(rng, 25, 0, 300);
  const auto c = mapped(truth, pts);
  const double dx = 37.0, dy = -12.0;
  std::vector<Correspondence> shifted;
  for (const auto& x : c) {
    shifted.push_back({{x.src.x + dx, x.src.y + dy}, {x.dst.x + dx, x.dst.y + dy}});
  }
  const RansacResult a = ransac_homography(c, RansacParams{}, 3);
  const RansacResult b = ransac_homography(shifted, RansacParams{}, 3);
  const Eigen::Matrix3d t = Homography::translation(dx, dy).matrix();
  const Eigen::Matrix3d conj = t * a.model.matrix() * t.inverse();
  EXPECT_LT(max_abs_diff(conj / conj(2, 2), b.model.matrix()), 1e-6);
}

TEST(Ransac, InvalidParams) {
  RansacParams p;
  p.confidence = 1.0;
  EXPECT_THROW(p.validate(), Error);
  p = RansacParams{};
  p.t_in = 0;
  EXPECT_THROW(p.validate(), Error);
}

TEST(Orientation, RotationAngleOfSimilarity) {
  EXPECT_NEAR(rotation_angle_deg(Homography::similarity(30, 1.5, 0, 0)), 30.0, 1e-9);
  EXPECT_NEAR(rotation_angle_deg(Homography::similarity(-120, 0.7, 5, 5)), -120.0, 1e-9);
}

TEST(Orientation, CircularMedianWraps) {
  const std::vector<double> a{350, 355, 5, 10, 0};
  EXPECT_NEAR(angle_difference_deg(circular_median_deg(a), 0.0), 0.0, 1e-9);
  EXPECT_DOUBLE_EQ(angle_difference_deg(10, 350), 20);
  EXPECT_DOUBLE_EQ(angle_difference_deg(-180, 0), 180);
}

TEST(Orientation, Validation) {
  auto pairs_with = [](std::vector<double> deltas) {
    std::vector<std::pair<Keypoint, Keypoint>> p;
    for (std::size_t i = 0; i < deltas.size(); ++i) {
      Keypoint a{0, 0, 2, 40.0 + 17.0 * static_cast<double>(i), 0, 0};
      Keypoint b = a;
      b.theta = std::fmod(a.theta + deltas[i] + 360.0, 360.0);
      p.emplace_back(a, b);
    }
    return p;
  };
  EXPECT_TRUE(validate_orientation(Homography(), pairs_with({0, 0, 0, 0}), 10));
  EXPECT_TRUE(validate_orientation(Homography::similarity(30, 1, 0, 0),
                                   pairs_with({28, 31, 32, 30, 29}), 10));
  EXPECT_FALSE(validate_orientation(Homography(), pairs_with({90, 91, 89, 90}), 10));
}
