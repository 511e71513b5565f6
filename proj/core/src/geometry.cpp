#include "cmfd/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include <Eigen/Dense>

#include "cmfd/error.hpp"

namespace cmfd {
namespace {

constexpr double kSingularDet = 1e-12;
constexpr double kInfinityDenominator = 1e-12;
constexpr double kCollinearArea = 1e-6;

Eigen::Matrix3d normalized(const Eigen::Matrix3d& m) {
  if (std::abs(m(2, 2)) > std::numeric_limits<double>::epsilon()) return m / m(2, 2);
  return m;
}

}  // namespace

Homography::Homography() : m_(Eigen::Matrix3d::Identity()) {}

Homography::Homography(const Eigen::Matrix3d& m) : m_(normalized(m)) {
  if (!m_.allFinite() || std::abs(m_.determinant()) <= kSingularDet) {
    throw DegeneracyError("homography is singular");
  }
  // the inverse must be a valid homography as well
  const Eigen::Matrix3d inv = normalized(m_.inverse());
  if (!inv.allFinite() || std::abs(inv.determinant()) <= kSingularDet) {
    throw DegeneracyError("homography is singular");
  }
}

Homography Homography::translation(double dx, double dy) {
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  m(0, 2) = dx;
  m(1, 2) = dy;
  return Homography(m);
}

Homography Homography::similarity(double angle_deg, double scale, double tx,
                                  double ty) {
  const double a = angle_deg * std::numbers::pi / 180.0;
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  m(0, 0) = scale * std::cos(a);
  m(0, 1) = -scale * std::sin(a);
  m(1, 0) = scale * std::sin(a);
  m(1, 1) = scale * std::cos(a);
  m(0, 2) = tx;
  m(1, 2) = ty;
  return Homography(m);
}

Homography Homography::inverse() const { return Homography(m_.inverse()); }

std::optional<Point2> Homography::try_apply(Point2 p) const noexcept {
  const double d = m_(2, 0) * p.x + m_(2, 1) * p.y + m_(2, 2);
  if (std::abs(d) <= kInfinityDenominator) return std::nullopt;
  return Point2{(m_(0, 0) * p.x + m_(0, 1) * p.y + m_(0, 2)) / d,
                (m_(1, 0) * p.x + m_(1, 1) * p.y + m_(1, 2)) / d};
}

Point2 Homography::apply(Point2 p) const {
  auto q = try_apply(p);
  if (!q) throw PointAtInfinityError("point maps to infinity");
  return *q;
}

std::array<double, 9> Homography::row_major() const {
  std::array<double, 9> out{};
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) out[r * 3 + c] = m_(r, c);
  }
  return out;
}

namespace {

// Isotropic scaling so the points have zero mean and mean distance sqrt(2).
Eigen::Matrix3d hartley_transform(std::span<const Point2> pts) {
  double cx = 0.0, cy = 0.0;
  for (const Point2& p : pts) {
    cx += p.x;
    cy += p.y;
  }
  cx /= static_cast<double>(pts.size());
  cy /= static_cast<double>(pts.size());
  double mean_dist = 0.0;
  for (const Point2& p : pts) mean_dist += std::hypot(p.x - cx, p.y - cy);
  mean_dist /= static_cast<double>(pts.size());
  if (mean_dist <= std::numeric_limits<double>::epsilon()) {
    throw DegeneracyError("all points coincide");
  }
  const double s = std::numbers::sqrt2 / mean_dist;
  Eigen::Matrix3d t = Eigen::Matrix3d::Identity();
  t(0, 0) = s;
  t(1, 1) = s;
  t(0, 2) = -s * cx;
  t(1, 2) = -s * cy;
  return t;
}

Point2 transform(const Eigen::Matrix3d& t, Point2 p) {
  return {t(0, 0) * p.x + t(0, 2), t(1, 1) * p.y + t(1, 2)};
}

double cross(Point2 a, Point2 b, Point2 c) {
  return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
}

bool has_collinear_triple(std::span<const Point2> pts) {
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      for (std::size_t k = j + 1; k < pts.size(); ++k) {
        if (std::abs(cross(pts[i], pts[j], pts[k])) < kCollinearArea) return true;
      }
    }
  }
  return false;
}

}  // namespace

Homography estimate_dlt(std::span<const Correspondence> pairs) {
  const std::size_t n = pairs.size();
  if (n < 4) throw InsufficientDataError("DLT needs at least 4 correspondences");

  std::vector<Point2> src(n), dst(n);
  for (std::size_t i = 0; i < n; ++i) {
    src[i] = pairs[i].src;
    dst[i] = pairs[i].dst;
  }
  const Eigen::Matrix3d ts = hartley_transform(src);
  const Eigen::Matrix3d td = hartley_transform(dst);
  for (std::size_t i = 0; i < n; ++i) {
    src[i] = transform(ts, src[i]);
    dst[i] = transform(td, dst[i]);
  }
  if (n == 4 && has_collinear_triple(src)) {
    throw DegeneracyError("three source points are collinear");
  }

  Eigen::MatrixXd a(2 * n, 8);
  Eigen::VectorXd b(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = src[i].x, y = src[i].y;
    const double u = dst[i].x, v = dst[i].y;
    const auto r = static_cast<Eigen::Index>(2 * i);
    a.row(r) << x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y;
    a.row(r + 1) << 0.0, 0.0, 0.0, x, y, 1.0, -v * x, -v * y;
    b(r) = u;
    b(r + 1) = v;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  qr.setThreshold(1e-10);
  if (qr.rank() < 8) throw DegeneracyError("DLT system is rank deficient");
  const Eigen::VectorXd h = qr.solve(b);

  Eigen::Matrix3d hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), 1.0;
  const Eigen::Matrix3d full = td.inverse() * hn * ts;
  return Homography(full);
}

void RansacParams::validate() const {
  if (!(t_in > 0.0)) throw ConfigError("ransac: t_in must be > 0");
  if (max_iters < 1) throw ConfigError("ransac: max_iters must be >= 1");
  if (!(confidence > 0.0 && confidence < 1.0)) {
    throw ConfigError("ransac: confidence must lie in (0, 1)");
  }
  if (!(theta_tol >= 0.0)) throw ConfigError("ransac: theta_tol must be >= 0");
}

double transfer_error(const Homography& h, const Correspondence& c) {
  const auto q = h.try_apply(c.src);
  if (!q) return std::numeric_limits<double>::infinity();
  return std::hypot(q->x - c.dst.x, q->y - c.dst.y);
}

namespace {

// Rejects minimal samples that are degenerate or whose quadrilaterals do
// not keep the same orientation on both sides.
bool plausible_sample(std::span<const Correspondence> pairs,
                      const std::array<std::size_t, 4>& idx) {
  std::array<Point2, 4> s{}, d{};
  for (int i = 0; i < 4; ++i) {
    s[i] = pairs[idx[i]].src;
    d[i] = pairs[idx[i]].dst;
  }
  constexpr int tri[4][3] = {{0, 1, 2}, {0, 1, 3}, {0, 2, 3}, {1, 2, 3}};
  for (const auto& t : tri) {
    const double cs = cross(s[t[0]], s[t[1]], s[t[2]]);
    const double cd = cross(d[t[0]], d[t[1]], d[t[2]]);
    if (cs * cd <= 0.0) return false;
  }
  return true;
}

std::vector<std::size_t> inliers_of(const Homography& h,
                                    std::span<const Correspondence> pairs,
                                    double t_in) {
  std::vector<std::size_t> in;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (transfer_error(h, pairs[i]) < t_in) in.push_back(i);
  }
  return in;
}

}  // namespace

RansacResult ransac_homography(std::span<const Correspondence> pairs,
                               const RansacParams& params,
                               std::uint64_t seed) {
  params.validate();
  const std::size_t n = pairs.size();
  if (n < 4) throw InsufficientDataError("RANSAC needs at least 4 correspondences");
  const std::size_t required = n > 4 ? 5 : 4;

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);

  std::optional<Homography> best;
  std::size_t best_count = 0;
  long long needed = params.max_iters;
  int it = 0;
  for (; it < params.max_iters && it < needed; ++it) {
    std::array<std::size_t, 4> idx{};
    for (int k = 0; k < 4; ++k) {
      std::size_t v;
      do {
        v = pick(rng);
      } while (std::find(idx.begin(), idx.begin() + k, v) != idx.begin() + k);
      idx[k] = v;
    }
    if (!plausible_sample(pairs, idx)) continue;

    std::array<Correspondence, 4> sample{};
    for (int k = 0; k < 4; ++k) sample[k] = pairs[idx[k]];
    std::optional<Homography> h;
    try {
      h = estimate_dlt(sample);
    } catch (const DegeneracyError&) {
      continue;
    }

    std::size_t count = 0;
    for (const Correspondence& c : pairs) {
      if (transfer_error(*h, c) < params.t_in) ++count;
    }
    if (count > best_count) {
      best_count = count;
      best = h;
      const double w = static_cast<double>(count) / static_cast<double>(n);
      const double p_good = std::pow(w, 4);
      if (p_good >= 1.0) {
        needed = it + 1;
      } else if (p_good > 0.0) {
        const double k = std::log(1.0 - params.confidence) / std::log(1.0 - p_good);
        if (std::isfinite(k)) {
          needed = std::min<long long>(needed, static_cast<long long>(std::ceil(k)));
        }
      }
    }
  }

  if (!best || best_count < required) {
    throw NoModelError("RANSAC found no hypothesis with enough support");
  }

  RansacResult result{*best, inliers_of(*best, pairs, params.t_in), it + 0};
  if (result.inliers.size() >= 4) {
    std::vector<Correspondence> support;
    support.reserve(result.inliers.size());
    for (std::size_t i : result.inliers) support.push_back(pairs[i]);
    try {
      Homography refit = estimate_dlt(support);
      auto refit_inliers = inliers_of(refit, pairs, params.t_in);
      if (refit_inliers.size() >= result.inliers.size()) {
        result.model = refit;
        result.inliers = std::move(refit_inliers);
      }
    } catch (const DegeneracyError&) {
    }
  }
  return result;
}

double rotation_angle_deg(const Homography& h) {
  const Eigen::Matrix3d& m = h.matrix();
  // For A = [a b; c d] the orthogonal polar factor rotates by
  // atan2(c - b, a + d) when det(A) > 0.
  return std::atan2(m(1, 0) - m(0, 1), m(0, 0) + m(1, 1)) * 180.0 / std::numbers::pi;
}

double angle_difference_deg(double a, double b) {
  double d = std::fmod(a - b, 360.0);
  if (d <= -180.0) d += 360.0;
  if (d > 180.0) d -= 360.0;
  return d;
}

double circular_median_deg(std::span<const double> angles_deg) {
  if (angles_deg.empty()) throw EmptyInputError("circular median of nothing");
  double best = angles_deg[0];
  double best_cost = std::numeric_limits<double>::infinity();
  for (double cand : angles_deg) {
    double cost = 0.0;
    for (double a : angles_deg) cost += std::abs(angle_difference_deg(a, cand));
    if (cost < best_cost) {
      best_cost = cost;
      best = cand;
    }
  }
  return best;
}

bool validate_orientation(const Homography& h,
                          std::span<const std::pair<Keypoint, Keypoint>> inliers,
                          double tol_deg) {
  if (inliers.empty()) throw EmptyInputError("validate_orientation: no inliers");
  std::vector<double> deltas;
  deltas.reserve(inliers.size());
  for (const auto& [l, r] : inliers) deltas.push_back(angle_difference_deg(r.theta, l.theta));
  const double median = circular_median_deg(deltas);
  return std::abs(angle_difference_deg(rotation_angle_deg(h), median)) <= tol_deg;
}

}  // namespace cmfd
