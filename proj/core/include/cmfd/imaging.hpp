#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

namespace cmfd {

/// Decoded raster, row-major, interleaved channels (RGB order when 3).
struct RasterImage {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<std::uint8_t> data;

  RasterImage() = default;
  RasterImage(int w, int h, int c, std::uint8_t fill = 0)
      : width(w), height(h), channels(c),
        data(static_cast<std::size_t>(w) * h * c, fill) {}
  RasterImage(int w, int h, int c, std::vector<std::uint8_t> pixels)
      : width(w), height(h), channels(c), data(std::move(pixels)) {}

  std::uint8_t& at(int x, int y, int c = 0) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::uint8_t at(int x, int y, int c = 0) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
};

struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  GrayImage() = default;
  GrayImage(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

  std::uint8_t& at(int x, int y) {
    return data[static_cast<std::size_t>(y) * width + x];
  }
  std::uint8_t at(int x, int y) const {
    return data[static_cast<std::size_t>(y) * width + x];
  }
  bool contains(int x, int y) const {
    return x >= 0 && y >= 0 && x < width && y < height;
  }
  std::size_t pixel_count() const {
    return static_cast<std::size_t>(width) * height;
  }
};

enum class ResolutionClass { small, medium, large };

const char* to_string(ResolutionClass c);

/// small: max(h,w) < 1024, medium: < 2048, large otherwise.
ResolutionClass classify_resolution(int height, int width);

/// Per-pixel local Shannon entropy in bits.
struct EntropyMap {
  int width = 0;
  int height = 0;
  std::vector<double> data;

  double at(int x, int y) const {
    return data[static_cast<std::size_t>(y) * width + x];
  }
};

inline constexpr std::size_t kDefaultMaxPixels = 64'000'000;
inline constexpr int kDefaultEntropyWindow = 9;

/// Decodes PNG/JPEG/BMP/TIFF. 16-bit sources are scaled to 8 bits, alpha is
/// dropped. Throws IoError when the file cannot be read and FormatError when
/// it cannot be decoded.
RasterImage load_image(const std::filesystem::path& path);

/// Writes an 8-bit image; the format follows the file extension.
void save_image(const std::filesystem::path& path, const RasterImage& img);
void save_image(const std::filesystem::path& path, const GrayImage& img);

/// BT.601 luma, rounded to nearest. 1-channel input is passed through.
GrayImage to_gray(const RasterImage& img);

/// Upsampling factor for the excessive keypoint strategy: 4 when the mean
/// side length is below 1024, otherwise 2.
int scaling_factor(int height, int width);

/// Bicubic resize by an integer factor s >= 1 (Keys kernel, a = -0.5). The
/// sampling grid is corner-aligned: output (0,0) and (s*w-1, s*h-1) land
/// exactly on the source corners. Throws ResourceError when the output would
/// exceed max_pixels.
GrayImage resize_bicubic(const GrayImage& img, int s,
                         std::size_t max_pixels = kDefaultMaxPixels);

/// Pipeline upscale; s must be 2 or 4 (PreconditionError otherwise).
GrayImage upscale(const GrayImage& img, int s,
                  std::size_t max_pixels = kDefaultMaxPixels);

/// Local entropy over a window x window neighbourhood with symmetric
/// (half-sample) border padding. window must be odd and positive.
EntropyMap entropy_map(const GrayImage& img,
                       int window = kDefaultEntropyWindow);

/// Bilinear sample with clamped borders.
double sample_bilinear(const GrayImage& img, double x, double y);

}  // namespace cmfd
