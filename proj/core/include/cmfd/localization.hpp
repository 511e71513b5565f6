#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cmfd/geometry.hpp"
#include "cmfd/imaging.hpp"
#include "cmfd/keypoints.hpp"
#include "cmfd/matching.hpp"

namespace cmfd {

struct LocalizationParams {
  double r_sam = 64.0;          // sampling radius, upscaled pixels
  int n_in = 20;                // minimum inliers (strict)
  double region_gamma = 16.0;   // suspicious disk radius = gamma * sigma
  int max_iters = 200;
  int refine_rounds = 3;        // refit-and-reselect passes over the full set
  bool morphology = true;       // closing then opening on the final mask
  int morph_radius = 3;

  void validate() const;
};

/// Binary per-pixel map; 1 = marked.
struct PixelMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;

  PixelMask() = default;
  PixelMask(int w, int h)
      : width(w), height(h), bits(static_cast<std::size_t>(w) * h, 0) {}

  bool at(int x, int y) const {
    return bits[static_cast<std::size_t>(y) * width + x] != 0;
  }
  void set(int x, int y) { bits[static_cast<std::size_t>(y) * width + x] = 1; }
  bool contains(int x, int y) const {
    return x >= 0 && y >= 0 && x < width && y < height;
  }
  std::size_t count() const;
  std::size_t pixel_count() const { return bits.size(); }
  PixelMask& operator|=(const PixelMask& other);
};

/// Localization output at the original image resolution.
using TamperMask = PixelMask;

/// A match from the full set that agrees with a homography. reversed is set
/// when the model maps the right keypoint onto the left one.
struct Inlier {
  DirectedMatch match;
  bool reversed = false;

  std::size_t source() const { return reversed ? match.right : match.left; }
  std::size_t target() const { return reversed ? match.left : match.right; }
};

struct SamplingSet {
  DirectedMatch seed;
  std::vector<DirectedMatch> sample;
};

struct DiffBounds {
  double low = 0.0;
  double high = 0.0;
};

struct IterationTrace {
  DirectedMatch seed;
  std::size_t sample_size = 0;
  std::size_t inlier_count = 0;
  bool accepted = false;
  std::optional<Homography> homography;
  std::string outcome;  // accepted, small-sample, no-model, sgo-gate, orientation
};

/// Picks the unvisited match whose neighbourhood (matches with either
/// endpoint within r_sam of either of its endpoints) is largest; ties go to
/// the earliest match. Throws EmptyInputError on an empty set.
SamplingSet densest_sampling_set(const MatchSet& unvisited,
                                 const KeypointSet& kps, double r_sam);

/// Matches of the full set whose transfer error under h is below t_in in
/// either orientation. The error of an oriented pair a -> b is
/// min(|h*a - b|, |h^-1*b - a|); each match appears once, in the
/// orientation with the smaller error.
std::vector<Inlier> select_inliers(const Homography& h,
                                   const MatchSet& all_matches,
                                   const KeypointSet& kps, double t_in);

/// Refits the model on the oriented inliers and reselects over the full set,
/// up to `rounds` times, while the inlier count grows.
Homography refine_model(const Homography& h, std::vector<Inlier>& inliers,
                        const MatchSet& all_matches, const KeypointSet& kps,
                        double t_in, int rounds);

MatchSet remove_inliers(const MatchSet& unvisited,
                        std::span<const DirectedMatch> inliers);
MatchSet remove_inliers(const MatchSet& unvisited,
                        std::span<const Inlier> inliers);

/// inlier_count > n_in.
inline bool gate_sgo(std::size_t inlier_count, int n_in) {
  return n_in < 0 || inlier_count > static_cast<std::size_t>(n_in);
}

/// Union of disks of radius gamma * sigma around the source-side and the
/// target-side keypoints of the inliers, clipped to width x height.
std::pair<PixelMask, PixelMask> suspicious_regions(
    std::span<const Inlier> inliers, const KeypointSet& kps, double gamma,
    int width, int height);

/// Quantile with linear interpolation at position (n-1)q of sorted data.
double quantile_linear(std::span<const double> sorted, double q);

/// Tukey-fence filtering (1.5 IQR) followed by min/max. Falls back to the
/// unfiltered range if nothing survives.
DiffBounds robust_bounds(std::span<const double> diffs);

/// Gray differences source - target at the rounded inlier positions,
/// reduced by robust_bounds.
DiffBounds robust_diff_bounds(std::span<const Inlier> inliers,
                              const KeypointSet& kps, const GrayImage& gray);

/// Marks every source-region pixel k whose image h*k is inside the frame
/// and whose gray difference to it lies in bounds (together with the
/// rounded counterpart), and symmetrically the target region through h^-1.
/// Counterpart grays are bilinear samples rounded to the nearest level.
PixelMask verify_regions(const PixelMask& sr_source, const PixelMask& sr_target,
                         const Homography& h, const GrayImage& gray,
                         DiffBounds bounds);

/// s x s block majority (strictly more than half marked).
PixelMask downscale_majority(const PixelMask& mask, int s, int width,
                             int height);

/// Morphological closing then opening with a disk of the given radius.
PixelMask close_open(const PixelMask& mask, int radius);

struct LocalizationResult {
  TamperMask mask;           // original resolution
  PixelMask upscaled;        // accumulated map before downscaling
  std::vector<IterationTrace> traces;
  std::size_t accepted_models = 0;
};

/// Called after every iteration with the trace and the accumulated map.
using IterationObserver =
    std::function<void(const IterationTrace&, const PixelMask&)>;

/// Iterative localization in the coordinates of `gray` (the upscaled
/// image); the accumulated map is reduced to original_width x
/// original_height by s-block majority.
LocalizationResult localize(const MatchSet& matches, const KeypointSet& kps,
                            const GrayImage& gray, const RansacParams& geo,
                            const LocalizationParams& params, int s,
                            int original_width, int original_height,
                            std::uint64_t rng_seed,
                            const IterationObserver& observer = {});

/// 8-bit single channel PNG, 0 = authentic, 255 = tampered.
void save_mask(const std::filesystem::path& path, const TamperMask& mask);
/// Nonzero pixels are tampered.
TamperMask load_mask(const std::filesystem::path& path);

/// One JSON object per line: iter, seed, sample_size, inliers, accepted,
/// homography (row-major or null).
void write_trace_jsonl(const std::filesystem::path& path,
                       std::span<const IterationTrace> traces);

}  // namespace cmfd
