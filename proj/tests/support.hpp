#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "cmfd/imaging.hpp"
#include "cmfd/keypoints.hpp"
#include "cmfd/localization.hpp"
#include "cmfd/synthetic.hpp"

namespace cmfd::test {

inline std::filesystem::path data_path(const std::string& name) {
  return std::filesystem::path(CMFD_TEST_DATA_DIR) / name;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("cmfd_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline GrayImage textured_gray(int w, int h, std::uint64_t seed) {
  return to_gray(synthetic_texture(w, h, seed));
}

inline GrayImage constant_gray(int w, int h, std::uint8_t v) {
  return GrayImage(w, h, v);
}

inline TamperMask rect_mask(int w, int h, int x0, int y0, int rw, int rh) {
  TamperMask m(w, h);
  for (int y = y0; y < y0 + rh; ++y) {
    for (int x = x0; x < x0 + rw; ++x) m.set(x, y);
  }
  return m;
}

}  // namespace cmfd::test
