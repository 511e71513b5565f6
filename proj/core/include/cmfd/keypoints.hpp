#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "cmfd/imaging.hpp"

namespace cmfd {

/// A scale-space keypoint in the coordinates of the image it was detected on.
/// theta is measured with atan2(dy, dx) in image coordinates (y pointing
/// down), in degrees within [0, 360).
struct Keypoint {
  double x = 0.0;
  double y = 0.0;
  double sigma = 0.0;
  double theta = 0.0;
  int octave = 0;
  int layer = 0;
};

inline constexpr int kDescriptorSize = 128;
using Descriptor = std::array<float, kDescriptorSize>;

/// Parallel keypoint/descriptor lists.
struct KeypointSet {
  std::vector<Keypoint> keypoints;
  std::vector<Descriptor> descriptors;

  std::size_t size() const { return keypoints.size(); }
  bool empty() const { return keypoints.empty(); }
};

struct SiftParams {
  double contrast_threshold = 0.0;
  double edge_threshold = 10.0;
  int scales_per_octave = 3;
  double sigma0 = 1.6;
  // Blur already present in the input, as in the usual SIFT assumption.
  double input_blur = 0.5;
};

/// floor(log2(min(w, h))) - 2, at least 1.
int octave_count(int width, int height);

/// DoG extrema with sub-pixel refinement, contrast and edge-response
/// filtering, one keypoint per dominant orientation peak (>= 80% of the
/// histogram maximum) and a 4x4x8 gradient descriptor normalised to unit L2
/// norm. No internal upsampling: octave 0 runs at the supplied resolution.
///
/// Output is ordered by (octave, layer, y, x, theta). Throws
/// InputTooSmallError for images smaller than 16x16.
KeypointSet detect_keypoints(const GrayImage& img, const SiftParams& params);

inline KeypointSet detect_keypoints(const GrayImage& img,
                                    double contrast_threshold = 0.0,
                                    double edge_threshold = 10.0) {
  SiftParams p;
  p.contrast_threshold = contrast_threshold;
  p.edge_threshold = edge_threshold;
  return detect_keypoints(img, p);
}

/// Fraction of pixels whose centred window (clipped at the borders) holds at
/// least min_count keypoints. Keypoints are binned at their rounded
/// position; points outside the image are ignored.
double coverage_rate(std::span<const Keypoint> keypoints, int width,
                     int height, int window = 16, int min_count = 4);

/// One row per keypoint: x,y,sigma,theta.
void write_keypoints_csv(const std::filesystem::path& path,
                         const KeypointSet& kps);

}  // namespace cmfd
