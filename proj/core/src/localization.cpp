#include "cmfd/localization.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "cmfd/error.hpp"
#include "json.hpp"

namespace cmfd {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

Point2 position(const KeypointSet& kps, std::size_t i) {
  return {kps.keypoints[i].x, kps.keypoints[i].y};
}

double dist2(Point2 a, Point2 b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return dx * dx + dy * dy;
}

// Uniform grid over match endpoints with cell size r, so every point within
// r of a query lies in the 3x3 block around the query's cell.
class EndpointGrid {
 public:
  EndpointGrid(const MatchSet& set, const KeypointSet& kps, double r)
      : cell_(r) {
    double max_x = 0.0, max_y = 0.0;
    for (const auto& m : set.matches) {
      for (auto k : {m.left, m.right}) {
        max_x = std::max(max_x, kps.keypoints[k].x);
        max_y = std::max(max_y, kps.keypoints[k].y);
      }
    }
    cols_ = static_cast<int>(max_x / cell_) + 1;
    rows_ = static_cast<int>(max_y / cell_) + 1;
    cells_.resize(static_cast<std::size_t>(cols_) * rows_);
    for (std::size_t t = 0; t < set.matches.size(); ++t) {
      const auto& m = set.matches[t];
      const auto a = cell_of(position(kps, m.left));
      const auto b = cell_of(position(kps, m.right));
      cells_[a].push_back(static_cast<std::uint32_t>(t));
      if (b != a) cells_[b].push_back(static_cast<std::uint32_t>(t));
    }
  }

  template <typename F>
  void visit(Point2 p, F&& f) const {
    const int cx = std::clamp(static_cast<int>(p.x / cell_), 0, cols_ - 1);
    const int cy = std::clamp(static_cast<int>(p.y / cell_), 0, rows_ - 1);
    for (int y = std::max(0, cy - 1); y <= std::min(rows_ - 1, cy + 1); ++y) {
      for (int x = std::max(0, cx - 1); x <= std::min(cols_ - 1, cx + 1); ++x) {
        for (auto t : cells_[static_cast<std::size_t>(y) * cols_ + x]) f(t);
      }
    }
  }

 private:
  std::size_t cell_of(Point2 p) const {
    const int cx = std::clamp(static_cast<int>(p.x / cell_), 0, cols_ - 1);
    const int cy = std::clamp(static_cast<int>(p.y / cell_), 0, rows_ - 1);
    return static_cast<std::size_t>(cy) * cols_ + cx;
  }

  double cell_;
  int cols_ = 1;
  int rows_ = 1;
  std::vector<std::vector<std::uint32_t>> cells_;
};

// Indices of matches with an endpoint strictly within r of either endpoint
// of `center`, in ascending order.
template <typename F>
void neighbourhood(const MatchSet& set, const KeypointSet& kps,
                   const EndpointGrid& grid, std::size_t center, double r,
                   std::vector<std::uint32_t>& stamp, std::uint32_t tag, F&& f) {
  const double r2 = r * r;
  const auto& c = set.matches[center];
  for (const Point2 q : {position(kps, c.left), position(kps, c.right)}) {
    grid.visit(q, [&](std::uint32_t t) {
      if (stamp[t] == tag) return;
      const auto& m = set.matches[t];
      if (dist2(position(kps, m.left), q) < r2 ||
          dist2(position(kps, m.right), q) < r2) {
        stamp[t] = tag;
        f(t);
      }
    });
  }
}


void paint_disk(PixelMask& mask, double cx, double cy, double radius) {
  const int y0 = std::max(0, static_cast<int>(std::ceil(cy - radius)));
  const int y1 = std::min(mask.height - 1, static_cast<int>(std::floor(cy + radius)));
  const double r2 = radius * radius;
  for (int y = y0; y <= y1; ++y) {
    const double dy = y - cy;
    const double half = std::sqrt(std::max(0.0, r2 - dy * dy));
    const int x0 = std::max(0, static_cast<int>(std::ceil(cx - half)));
    const int x1 = std::min(mask.width - 1, static_cast<int>(std::floor(cx + half)));
    if (x0 > x1) continue;
    auto* row = mask.bits.data() + static_cast<std::size_t>(y) * mask.width;
    std::fill(row + x0, row + x1 + 1, std::uint8_t{1});
  }
}

int round_coord(double v) { return static_cast<int>(std::lround(v)); }

double gray_at(const GrayImage& gray, Point2 p) {
  const int x = std::clamp(round_coord(p.x), 0, gray.width - 1);
  const int y = std::clamp(round_coord(p.y), 0, gray.height - 1);
  return gray.at(x, y);
}

// Verifies one region through `map`; sign = +1 when region pixels are the
// minuend of the difference, -1 when they are the subtrahend.
void verify_side(const PixelMask& region, const Homography& map,
                 const GrayImage& gray, DiffBounds bounds, double sign,
                 PixelMask& out) {
  const auto& m = map.matrix();
  const double w_max = gray.width - 1;
  const double h_max = gray.height - 1;
  for (int y = 0; y < region.height; ++y) {
    const auto* row = region.bits.data() + static_cast<std::size_t>(y) * region.width;
    for (int x = 0; x < region.width; ++x) {
      if (!row[x]) continue;
      const double d = m(2, 0) * x + m(2, 1) * y + m(2, 2);
      if (std::abs(d) <= 1e-12) continue;
      const double u = (m(0, 0) * x + m(0, 1) * y + m(0, 2)) / d;
      const double v = (m(1, 0) * x + m(1, 1) * y + m(1, 2)) / d;
      if (!(u >= 0.0 && v >= 0.0 && u <= w_max && v <= h_max)) continue;
      const double other = std::round(sample_bilinear(gray, u, v));
      const double diff = sign * (static_cast<double>(gray.at(x, y)) - other);
      if (diff < bounds.low || diff > bounds.high) continue;
      out.set(x, y);
      out.set(round_coord(u), round_coord(v));
    }
  }
}

}  // namespace

void LocalizationParams::validate() const {
  if (!(r_sam > 0.0)) throw ConfigError("r_sam must be positive");
  if (n_in < 0) throw ConfigError("n_in must be non-negative");
  if (!(region_gamma > 0.0)) throw ConfigError("region_gamma must be positive");
  if (max_iters < 1) throw ConfigError("max_iters must be at least 1");
  if (morph_radius < 0) throw ConfigError("morph_radius must be non-negative");
  if (refine_rounds < 0) throw ConfigError("refine_rounds must be non-negative");
}

std::size_t PixelMask::count() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), 1));
}

PixelMask& PixelMask::operator|=(const PixelMask& other) {
  if (other.width != width || other.height != height) {
    throw ShapeError("mask shapes differ");
  }
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] |= other.bits[i];
  return *this;
}

SamplingSet densest_sampling_set(const MatchSet& unvisited,
                                 const KeypointSet& kps, double r_sam) {
  if (unvisited.empty()) throw EmptyInputError("no unvisited matches");
  if (!(r_sam > 0.0)) throw PreconditionError("r_sam must be positive");

  const EndpointGrid grid(unvisited, kps, r_sam);
  std::vector<std::uint32_t> stamp(unvisited.size(), 0);
  std::uint32_t tag = 0;

  std::size_t best = 0;
  std::size_t best_count = 0;
  for (std::size_t i = 0; i < unvisited.size(); ++i) {
    std::size_t count = 0;
    neighbourhood(unvisited, kps, grid, i, r_sam, stamp, ++tag,
                  [&](std::uint32_t) { ++count; });
    if (count > best_count) {
      best_count = count;
      best = i;
    }
  }

  std::vector<std::uint32_t> members;
  neighbourhood(unvisited, kps, grid, best, r_sam, stamp, ++tag,
                [&](std::uint32_t t) { members.push_back(t); });
  std::sort(members.begin(), members.end());

  SamplingSet out;
  out.seed = unvisited.matches[best];
  out.sample.reserve(members.size());
  for (auto t : members) out.sample.push_back(unvisited.matches[t]);
  return out;
}

std::vector<Inlier> select_inliers(const Homography& h,
                                   const MatchSet& all_matches,
                                   const KeypointSet& kps, double t_in) {
  const Homography inv = h.inverse();
  const double inf = std::numeric_limits<double>::infinity();
  auto error = [&](Point2 a, Point2 b) {
    double e = inf;
    if (auto p = h.try_apply(a)) e = std::sqrt(dist2(*p, b));
    if (auto q = inv.try_apply(b)) e = std::min(e, std::sqrt(dist2(*q, a)));
    return e;
  };

  std::vector<Inlier> out;
  for (const auto& m : all_matches.matches) {
    const Point2 l = position(kps, m.left);
    const Point2 r = position(kps, m.right);
    const double forward = error(l, r);
    const double backward = error(r, l);
    if (std::min(forward, backward) < t_in) {
      out.push_back({m, backward < forward});
    }
  }
  return out;
}

Homography refine_model(const Homography& h, std::vector<Inlier>& inliers,
                        const MatchSet& all_matches, const KeypointSet& kps,
                        double t_in, int rounds) {
  Homography model = h;
  for (int r = 0; r < rounds && inliers.size() >= 4; ++r) {
    std::vector<Correspondence> corr;
    corr.reserve(inliers.size());
    for (const auto& in : inliers) {
      corr.push_back({position(kps, in.source()), position(kps, in.target())});
    }
    std::optional<Homography> next;
    try {
      next = estimate_dlt(corr);
    } catch (const DegeneracyError&) {
      break;
    }
    auto grown = select_inliers(*next, all_matches, kps, t_in);
    if (grown.size() <= inliers.size()) break;
    model = *next;
    inliers = std::move(grown);
  }
  return model;
}

MatchSet remove_inliers(const MatchSet& unvisited,
                        std::span<const DirectedMatch> inliers) {
  std::vector<DirectedMatch> gone(inliers.begin(), inliers.end());
  std::sort(gone.begin(), gone.end());
  MatchSet out;
  out.matches.reserve(unvisited.size());
  for (const auto& m : unvisited.matches) {
    if (!std::binary_search(gone.begin(), gone.end(), m)) out.matches.push_back(m);
  }
  return out;
}

MatchSet remove_inliers(const MatchSet& unvisited,
                        std::span<const Inlier> inliers) {
  std::vector<DirectedMatch> plain;
  plain.reserve(inliers.size());
  for (const auto& in : inliers) plain.push_back(in.match);
  return remove_inliers(unvisited, std::span<const DirectedMatch>(plain));
}

std::pair<PixelMask, PixelMask> suspicious_regions(
    std::span<const Inlier> inliers, const KeypointSet& kps, double gamma,
    int width, int height) {
  PixelMask src(width, height);
  PixelMask dst(width, height);
  for (const auto& in : inliers) {
    const auto& a = kps.keypoints[in.source()];
    const auto& b = kps.keypoints[in.target()];
    paint_disk(src, a.x, a.y, gamma * a.sigma);
    paint_disk(dst, b.x, b.y, gamma * b.sigma);
  }
  return {std::move(src), std::move(dst)};
}

double quantile_linear(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw EmptyInputError("quantile of empty data");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

DiffBounds robust_bounds(std::span<const double> diffs) {
  if (diffs.empty()) throw EmptyInputError("no differences");
  std::vector<double> sorted(diffs.begin(), diffs.end());
  std::sort(sorted.begin(), sorted.end());
  const double q1 = quantile_linear(sorted, 0.25);
  const double q3 = quantile_linear(sorted, 0.75);
  const double iqr = q3 - q1;
  const double lo_fence = q1 - 1.5 * iqr;
  const double hi_fence = q3 + 1.5 * iqr;

  DiffBounds b{std::numeric_limits<double>::infinity(),
               -std::numeric_limits<double>::infinity()};
  for (double d : sorted) {
    if (d < lo_fence || d > hi_fence) continue;
    b.low = std::min(b.low, d);
    b.high = std::max(b.high, d);
  }
  if (b.low > b.high) return {sorted.front(), sorted.back()};
  return b;
}

DiffBounds robust_diff_bounds(std::span<const Inlier> inliers,
                              const KeypointSet& kps, const GrayImage& gray) {
  std::vector<double> diffs;
  diffs.reserve(inliers.size());
  for (const auto& in : inliers) {
    diffs.push_back(gray_at(gray, position(kps, in.source())) -
                    gray_at(gray, position(kps, in.target())));
  }
  return robust_bounds(diffs);
}

PixelMask verify_regions(const PixelMask& sr_source, const PixelMask& sr_target,
                         const Homography& h, const GrayImage& gray,
                         DiffBounds bounds) {
  if (sr_source.width != gray.width || sr_source.height != gray.height ||
      sr_target.width != gray.width || sr_target.height != gray.height) {
    throw ShapeError("region masks must match the image");
  }
  PixelMask out(gray.width, gray.height);
  verify_side(sr_source, h, gray, bounds, +1.0, out);
  verify_side(sr_target, h.inverse(), gray, bounds, -1.0, out);
  return out;
}

PixelMask downscale_majority(const PixelMask& mask, int s, int width,
                             int height) {
  if (s < 1) throw PreconditionError("scale must be at least 1");
  if (mask.width < width * s || mask.height < height * s) {
    throw ShapeError("mask smaller than the target grid");
  }
  PixelMask out(width, height);
  const int need = s * s;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      int n = 0;
      for (int dy = 0; dy < s; ++dy) {
        for (int dx = 0; dx < s; ++dx) n += mask.at(x * s + dx, y * s + dy);
      }
      if (2 * n > need) out.set(x, y);
    }
  }
  return out;
}

PixelMask close_open(const PixelMask& mask, int radius) {
  if (radius <= 0 || mask.bits.empty()) return mask;
  cv::Mat m(mask.height, mask.width, CV_8UC1,
            const_cast<std::uint8_t*>(mask.bits.data()));
  const cv::Mat kernel = cv::getStructuringElement(
      cv::MORPH_ELLIPSE, cv::Size(2 * radius + 1, 2 * radius + 1));
  cv::Mat closed, opened;
  cv::morphologyEx(m, closed, cv::MORPH_CLOSE, kernel);
  cv::morphologyEx(closed, opened, cv::MORPH_OPEN, kernel);
  PixelMask out(mask.width, mask.height);
  std::copy(opened.datastart, opened.dataend, out.bits.begin());
  return out;
}

LocalizationResult localize(const MatchSet& matches, const KeypointSet& kps,
                            const GrayImage& gray, const RansacParams& geo,
                            const LocalizationParams& params, int s,
                            int original_width, int original_height,
                            std::uint64_t rng_seed,
                            const IterationObserver& observer) {
  params.validate();
  geo.validate();

  LocalizationResult result;
  result.upscaled = PixelMask(gray.width, gray.height);
  MatchSet unvisited = matches;

  for (int iter = 0; iter < params.max_iters && !unvisited.empty(); ++iter) {
    const SamplingSet sam = densest_sampling_set(unvisited, kps, params.r_sam);
    IterationTrace trace;
    trace.seed = sam.seed;
    trace.sample_size = sam.sample.size();

    auto finish = [&](std::string outcome) {
      trace.outcome = std::move(outcome);
      if (observer) observer(trace, result.upscaled);
      result.traces.push_back(std::move(trace));
    };
    const std::array<DirectedMatch, 1> seed_only{sam.seed};

    if (sam.sample.size() < 4) {
      unvisited = remove_inliers(unvisited, std::span<const DirectedMatch>(seed_only));
      finish("small-sample");
      continue;
    }

    std::vector<Correspondence> corr;
    corr.reserve(sam.sample.size());
    for (const auto& m : sam.sample) {
      corr.push_back({position(kps, m.left), position(kps, m.right)});
    }

    std::optional<RansacResult> fit;
    try {
      fit = ransac_homography(corr, geo,
                              splitmix64(rng_seed ^ static_cast<std::uint64_t>(iter)));
    } catch (const NoModelError&) {
    } catch (const DegeneracyError&) {
    }
    if (!fit) {
      unvisited = remove_inliers(unvisited, std::span<const DirectedMatch>(seed_only));
      finish("no-model");
      continue;
    }

    auto inliers = select_inliers(fit->model, matches, kps, geo.t_in);
    const Homography h = refine_model(fit->model, inliers, matches, kps, geo.t_in,
                                      params.refine_rounds);
    trace.homography = h;
    trace.inlier_count = inliers.size();
    unvisited = remove_inliers(unvisited, std::span<const Inlier>(inliers));
    unvisited = remove_inliers(unvisited, std::span<const DirectedMatch>(seed_only));

    if (!gate_sgo(inliers.size(), params.n_in)) {
      finish("sgo-gate");
      continue;
    }

    std::vector<std::pair<Keypoint, Keypoint>> pairs;
    pairs.reserve(inliers.size());
    for (const auto& in : inliers) {
      pairs.emplace_back(kps.keypoints[in.source()], kps.keypoints[in.target()]);
    }
    if (!validate_orientation(h, pairs, geo.theta_tol)) {
      finish("orientation");
      continue;
    }

    const auto [sr_src, sr_dst] = suspicious_regions(
        inliers, kps, params.region_gamma, gray.width, gray.height);
    const DiffBounds bounds = robust_diff_bounds(inliers, kps, gray);
    // verification runs in the model's direction: source -> target
    result.upscaled |= verify_regions(sr_src, sr_dst, h, gray, bounds);
    trace.accepted = true;
    ++result.accepted_models;
    finish("accepted");
  }

  result.mask = downscale_majority(result.upscaled, s, original_width,
                                   original_height);
  if (params.morphology) result.mask = close_open(result.mask, params.morph_radius);
  return result;
}

void save_mask(const std::filesystem::path& path, const TamperMask& mask) {
  GrayImage img(mask.width, mask.height);
  for (std::size_t i = 0; i < mask.bits.size(); ++i) {
    img.data[i] = mask.bits[i] ? 255 : 0;
  }
  save_image(path, img);
}

TamperMask load_mask(const std::filesystem::path& path) {
  const RasterImage img = load_image(path);
  TamperMask mask(img.width, img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < img.channels; ++c) {
        if (img.at(x, y, c) != 0) {
          mask.set(x, y);
          break;
        }
      }
    }
  }
  return mask;
}

void write_trace_jsonl(const std::filesystem::path& path,
                       std::span<const IterationTrace> traces) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string());
  for (std::size_t i = 0; i < traces.size(); ++i) {
    const auto& t = traces[i];
    nlohmann::json j;
    j["iter"] = i;
    j["seed"] = {t.seed.left, t.seed.right};
    j["sample_size"] = t.sample_size;
    j["inliers"] = t.inlier_count;
    j["accepted"] = t.accepted;
    j["outcome"] = t.outcome;
    if (t.homography) {
      j["homography"] = t.homography->row_major();
    } else {
      j["homography"] = nullptr;
    }
    out << j.dump() << '\n';
  }
}

}  // namespace cmfd
