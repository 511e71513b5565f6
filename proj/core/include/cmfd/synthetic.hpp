#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "cmfd/imaging.hpp"
#include "cmfd/localization.hpp"

namespace cmfd {

struct PatchRect {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;
};

/// Rotation (degrees, image coordinates) and uniform scale about the patch
/// centre, followed by a translation of the centre by (dx, dy).
struct PatchTransform {
  double dx = 0.0;
  double dy = 0.0;
  double angle_deg = 0.0;
  double scale = 1.0;
};

struct PostProcess {
  double brightness = 0.0;                      // added to every channel
  std::optional<std::pair<int, int>> contrast;  // [0,255] -> [lo,hi]
  std::optional<int> color_levels;              // levels per channel
  double noise_sigma = 0.0;                     // Gaussian, seeded
};

struct SyntheticForgerySpec {
  PatchRect patch;
  std::vector<PatchTransform> copies;  // one pasted copy per transform
  std::optional<PostProcess> post_process;
};

struct SyntheticForgery {
  RasterImage image;
  TamperMask mask;
};

/// Pastes each transformed copy of the patch (bilinear resampling from the
/// untouched source) and marks the patch and every footprint in the mask.
/// Throws SpecError when the patch or a copy leaves the image or no copy
/// is given. rng_seed drives the optional noise.
SyntheticForgery generate_forgery(const RasterImage& source,
                                  const SyntheticForgerySpec& spec,
                                  std::uint64_t rng_seed);

/// Non-repeating colour texture: layered value noise with random strokes
/// and blobs.
RasterImage synthetic_texture(int width, int height, std::uint64_t seed);

/// Facade-like authentic image: a lattice of window tiles where each window
/// design (frame layout and patterned curtain) appears on two tiles, which
/// differ only in position jitter, slight shading and per-tile noise.
RasterImage synthetic_facade(int width, int height, std::uint64_t seed);

}  // namespace cmfd
