#include "cmfd/imaging.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <string>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "cmfd/error.hpp"

namespace cmfd {

const char* to_string(ResolutionClass c) {
  switch (c) {
    case ResolutionClass::small: return "small";
    case ResolutionClass::medium: return "medium";
    case ResolutionClass::large: return "large";
  }
  return "unknown";
}

ResolutionClass classify_resolution(int height, int width) {
  const int longest = std::max(height, width);
  if (longest < 1024) return ResolutionClass::small;
  if (longest < 2048) return ResolutionClass::medium;
  return ResolutionClass::large;
}

RasterImage load_image(const std::filesystem::path& path) {
  {
    std::ifstream probe(path, std::ios::binary);
    if (!probe) throw IoError("cannot open image: " + path.string());
  }
  cv::Mat mat = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (mat.empty()) throw FormatError("cannot decode image: " + path.string());

  if (mat.depth() == CV_16U) {
    mat.convertTo(mat, CV_8U, 1.0 / 257.0);
  } else if (mat.depth() != CV_8U) {
    throw FormatError("unsupported sample depth in " + path.string());
  }

  switch (mat.channels()) {
    case 1: break;
    case 2: cv::extractChannel(mat, mat, 0); break;
    case 3: cv::cvtColor(mat, mat, cv::COLOR_BGR2RGB); break;
    case 4: cv::cvtColor(mat, mat, cv::COLOR_BGRA2RGB); break;
    default:
      throw FormatError("unsupported channel count in " + path.string());
  }

  RasterImage out(mat.cols, mat.rows, mat.channels());
  const std::size_t row_bytes =
      static_cast<std::size_t>(mat.cols) * mat.channels();
  for (int y = 0; y < mat.rows; ++y) {
    std::copy_n(mat.ptr<std::uint8_t>(y), row_bytes,
                out.data.begin() + static_cast<std::ptrdiff_t>(y * row_bytes));
  }
  return out;
}

namespace {

void write_mat(const std::filesystem::path& path, const cv::Mat& mat) {
  bool ok = false;
  try {
    ok = cv::imwrite(path.string(), mat);
  } catch (const cv::Exception& e) {
    throw IoError("cannot write image " + path.string() + ": " + e.what());
  }
  if (!ok) throw IoError("cannot write image: " + path.string());
}

}  // namespace

void save_image(const std::filesystem::path& path, const RasterImage& img) {
  const int type = img.channels == 3 ? CV_8UC3 : CV_8UC1;
  if (img.channels != 1 && img.channels != 3) {
    throw PreconditionError("save_image: channels must be 1 or 3");
  }
  cv::Mat view(img.height, img.width, type,
               const_cast<std::uint8_t*>(img.data.data()));
  cv::Mat mat;
  if (img.channels == 3) {
    cv::cvtColor(view, mat, cv::COLOR_RGB2BGR);
  } else {
    mat = view;
  }
  write_mat(path, mat);
}

void save_image(const std::filesystem::path& path, const GrayImage& img) {
  cv::Mat view(img.height, img.width, CV_8UC1,
               const_cast<std::uint8_t*>(img.data.data()));
  write_mat(path, view);
}

GrayImage to_gray(const RasterImage& img) {
  if (img.channels == 1) {
    GrayImage g;
    g.width = img.width;
    g.height = img.height;
    g.data = img.data;
    return g;
  }
  if (img.channels != 3) {
    throw PreconditionError("to_gray: channels must be 1 or 3");
  }
  GrayImage g(img.width, img.height);
  const std::size_t n = g.pixel_count();
  for (std::size_t i = 0; i < n; ++i) {
    const double r = img.data[3 * i];
    const double gg = img.data[3 * i + 1];
    const double b = img.data[3 * i + 2];
    const double luma = 0.299 * r + 0.587 * gg + 0.114 * b;
    g.data[i] = static_cast<std::uint8_t>(
        std::clamp(std::lround(luma), 0L, 255L));
  }
  return g;
}

int scaling_factor(int height, int width) {
  if (height < 1 || width < 1) {
    throw PreconditionError("scaling_factor: dimensions must be positive");
  }
  // (h + w) / 2 < 1024  <=>  h + w < 2048, kept in integers.
  return height + width < 2048 ? 4 : 2;
}

namespace {

double keys_cubic(double t) {
  constexpr double a = -0.5;
  t = std::abs(t);
  if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
  if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
  return 0.0;
}

struct Taps {
  std::array<int, 4> index;
  std::array<double, 4> weight;
};

std::vector<Taps> cubic_taps(int src_len, int dst_len) {
  std::vector<Taps> taps(static_cast<std::size_t>(dst_len));
  const double ratio =
      dst_len > 1 ? static_cast<double>(src_len - 1) / (dst_len - 1) : 0.0;
  for (int d = 0; d < dst_len; ++d) {
    const double pos = d * ratio;
    const int base = static_cast<int>(std::floor(pos));
    const double frac = pos - base;
    Taps& t = taps[static_cast<std::size_t>(d)];
    for (int k = 0; k < 4; ++k) {
      const int idx = base - 1 + k;
      t.index[k] = std::clamp(idx, 0, src_len - 1);
      t.weight[k] = keys_cubic(frac - (k - 1));
    }
  }
  return taps;
}

}  // namespace

GrayImage resize_bicubic(const GrayImage& img, int s, std::size_t max_pixels) {
  if (s < 1) throw PreconditionError("resize_bicubic: factor must be >= 1");
  if (img.width < 1 || img.height < 1) {
    throw PreconditionError("resize_bicubic: empty image");
  }
  const std::size_t out_w = static_cast<std::size_t>(img.width) * s;
  const std::size_t out_h = static_cast<std::size_t>(img.height) * s;
  if (out_w * out_h > max_pixels) {
    throw ResourceError("upscaled image of " + std::to_string(out_w) + "x" +
                        std::to_string(out_h) + " exceeds the pixel budget");
  }
  if (s == 1) return img;

  const int ow = static_cast<int>(out_w);
  const int oh = static_cast<int>(out_h);
  const auto xt = cubic_taps(img.width, ow);
  const auto yt = cubic_taps(img.height, oh);

  // Horizontal pass into a float buffer, then vertical.
  std::vector<float> tmp(static_cast<std::size_t>(ow) * img.height);
  for (int y = 0; y < img.height; ++y) {
    const std::uint8_t* row = &img.data[static_cast<std::size_t>(y) * img.width];
    float* out = &tmp[static_cast<std::size_t>(y) * ow];
    for (int x = 0; x < ow; ++x) {
      const Taps& t = xt[static_cast<std::size_t>(x)];
      double acc = 0.0;
      for (int k = 0; k < 4; ++k) acc += t.weight[k] * row[t.index[k]];
      out[x] = static_cast<float>(acc);
    }
  }

  GrayImage out(ow, oh);
  for (int y = 0; y < oh; ++y) {
    const Taps& t = yt[static_cast<std::size_t>(y)];
    const float* r0 = &tmp[static_cast<std::size_t>(t.index[0]) * ow];
    const float* r1 = &tmp[static_cast<std::size_t>(t.index[1]) * ow];
    const float* r2 = &tmp[static_cast<std::size_t>(t.index[2]) * ow];
    const float* r3 = &tmp[static_cast<std::size_t>(t.index[3]) * ow];
    std::uint8_t* dst = &out.data[static_cast<std::size_t>(y) * ow];
    for (int x = 0; x < ow; ++x) {
      const double v = t.weight[0] * r0[x] + t.weight[1] * r1[x] +
                       t.weight[2] * r2[x] + t.weight[3] * r3[x];
      dst[x] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
  }
  return out;
}

GrayImage upscale(const GrayImage& img, int s, std::size_t max_pixels) {
  if (s != 2 && s != 4) {
    throw PreconditionError("upscale: factor must be 2 or 4, got " +
                            std::to_string(s));
  }
  return resize_bicubic(img, s, max_pixels);
}

namespace {

int reflect(int i, int n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - i - 1;
  }
  return i;
}

}  // namespace

EntropyMap entropy_map(const GrayImage& img, int window) {
  if (window < 1 || window % 2 == 0) {
    throw PreconditionError("entropy_map: window must be odd and positive");
  }
  EntropyMap out;
  out.width = img.width;
  out.height = img.height;
  out.data.assign(img.pixel_count(), 0.0);
  if (img.pixel_count() == 0) return out;

  const int r = window / 2;
  const int n = window * window;
  const double log2n = std::log2(static_cast<double>(n));

  // c * log2(c) for every possible bin count.
  std::vector<double> clog(static_cast<std::size_t>(n) + 1, 0.0);
  for (int c = 1; c <= n; ++c) clog[c] = c * std::log2(static_cast<double>(c));

  std::vector<int> xs(static_cast<std::size_t>(img.width + 2 * r + 1));
  for (int i = -r; i <= img.width + r; ++i) xs[i + r] = reflect(i, img.width);

  std::vector<const std::uint8_t*> rows(static_cast<std::size_t>(window));
  std::array<int, 256> hist{};

  for (int y = 0; y < img.height; ++y) {
    for (int k = 0; k < window; ++k) {
      rows[k] = &img.data[static_cast<std::size_t>(reflect(y - r + k, img.height)) *
                          img.width];
    }
    hist.fill(0);
    for (int dx = -r; dx <= r; ++dx) {
      const int col = xs[dx + r];
      for (int k = 0; k < window; ++k) ++hist[rows[k][col]];
    }
    double s = 0.0;
    for (int c : hist) s += clog[c];

    double* dst = &out.data[static_cast<std::size_t>(y) * img.width];
    for (int x = 0; x < img.width; ++x) {
      const double e = log2n - s / n;
      dst[x] = std::clamp(e, 0.0, log2n);
      if (x + 1 == img.width) break;
      const int drop = xs[x - r + r];
      const int add = xs[x + 1 + r + r];
      for (int k = 0; k < window; ++k) {
        int& hd = hist[rows[k][drop]];
        s += clog[hd - 1] - clog[hd];
        --hd;
        int& ha = hist[rows[k][add]];
        s += clog[ha + 1] - clog[ha];
        ++ha;
      }
    }
  }
  return out;
}

double sample_bilinear(const GrayImage& img, double x, double y) {
  x = std::clamp(x, 0.0, static_cast<double>(img.width - 1));
  y = std::clamp(y, 0.0, static_cast<double>(img.height - 1));
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const int x1 = std::min(x0 + 1, img.width - 1);
  const int y1 = std::min(y0 + 1, img.height - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  const double top = (1.0 - fx) * img.at(x0, y0) + fx * img.at(x1, y0);
  const double bot = (1.0 - fx) * img.at(x0, y1) + fx * img.at(x1, y1);
  return (1.0 - fy) * top + fy * bot;
}

}  // namespace cmfd
