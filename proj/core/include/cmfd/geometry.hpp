#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "cmfd/keypoints.hpp"

namespace cmfd {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

struct Correspondence {
  Point2 src;
  Point2 dst;
};

/// 3x3 projective transform, stored with m(2,2) = 1 whenever that entry is
/// nonzero. Construction throws DegeneracyError for singular matrices and
/// for matrices whose normalised inverse would be singular, so inverse()
/// never throws.
class Homography {
 public:
  Homography();
  explicit Homography(const Eigen::Matrix3d& m);

  static Homography translation(double dx, double dy);
  /// Rotation by angle_deg and uniform scale about the origin, then
  /// translation.
  static Homography similarity(double angle_deg, double scale, double tx,
                               double ty);

  const Eigen::Matrix3d& matrix() const { return m_; }
  double operator()(int r, int c) const { return m_(r, c); }
  Homography inverse() const;

  /// Throws PointAtInfinityError when the projective denominator vanishes.
  Point2 apply(Point2 p) const;
  std::optional<Point2> try_apply(Point2 p) const noexcept;

  std::array<double, 9> row_major() const;

 private:
  Eigen::Matrix3d m_;
};

inline Point2 apply(const Homography& h, double x, double y) {
  return h.apply({x, y});
}

/// Normalised DLT with m(2,2) fixed to 1, solved in least squares; exact for
/// four non-degenerate pairs. Throws DegeneracyError when three of four
/// source points are collinear or the system is rank deficient, and
/// InsufficientDataError for fewer than four pairs.
Homography estimate_dlt(std::span<const Correspondence> pairs);

struct RansacParams {
  double t_in = 3.0;
  int max_iters = 2000;
  double confidence = 0.995;
  double theta_tol = 10.0;

  void validate() const;
};

struct RansacResult {
  Homography model;
  std::vector<std::size_t> inliers;  // forward error < t_in under model
  int iterations = 0;
};

/// Plain RANSAC over 4-point samples with adaptive termination and a final
/// refit on all inliers of the best hypothesis. A hypothesis needs the
/// support of at least one correspondence beyond its own sample when more
/// than four are available. Deterministic for a given seed.
///
/// Throws InsufficientDataError for fewer than four correspondences and
/// NoModelError when no hypothesis reaches the required support.
RansacResult ransac_homography(std::span<const Correspondence> pairs,
                               const RansacParams& params,
                               std::uint64_t seed);

/// Forward reprojection error; +inf when the point maps to infinity.
double transfer_error(const Homography& h, const Correspondence& c);

/// Angle (degrees) of the rotation factor in the polar decomposition of
/// the upper-left 2x2 block.
double rotation_angle_deg(const Homography& h);

/// Signed smallest difference a - b, wrapped to (-180, 180].
double angle_difference_deg(double a, double b);

/// Sample point minimising the sum of circular distances to the others.
double circular_median_deg(std::span<const double> angles_deg);

/// True iff the homography's rotation agrees, within tol degrees, with the
/// circular median of (theta_right - theta_left) over the pairs.
bool validate_orientation(const Homography& h,
                          std::span<const std::pair<Keypoint, Keypoint>> inliers,
                          double tol_deg);

}  // namespace cmfd
