#include "cmfd/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include <opencv2/core.hpp>
#include <opencv2/imgproc.hpp>

#include "cmfd/error.hpp"
#include "cmfd/geometry.hpp"

namespace cmfd {

namespace {

std::uint8_t clamp_u8(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

double sample_channel(const RasterImage& img, int c, double x, double y) {
  x = std::clamp(x, 0.0, static_cast<double>(img.width - 1));
  y = std::clamp(y, 0.0, static_cast<double>(img.height - 1));
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const int x1 = std::min(x0 + 1, img.width - 1);
  const int y1 = std::min(y0 + 1, img.height - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  const double top = img.at(x0, y0, c) * (1 - fx) + img.at(x1, y0, c) * fx;
  const double bottom = img.at(x0, y1, c) * (1 - fx) + img.at(x1, y1, c) * fx;
  return top * (1 - fy) + bottom * fy;
}

// Maps patch coordinates to the pasted location.
Homography copy_transform(const PatchRect& r, const PatchTransform& t) {
  const double cx = r.x + (r.width - 1) / 2.0;
  const double cy = r.y + (r.height - 1) / 2.0;
  const double a = t.angle_deg * std::numbers::pi / 180.0;
  const double c = t.scale * std::cos(a);
  const double s = t.scale * std::sin(a);
  Eigen::Matrix3d m;
  m << c, -s, cx + t.dx - (c * cx - s * cy),  //
      s, c, cy + t.dy - (s * cx + c * cy),    //
      0, 0, 1;
  return Homography(m);
}

void apply_post_process(RasterImage& img, const PostProcess& p,
                        std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, p.noise_sigma > 0 ? p.noise_sigma : 1.0);
  for (auto& v : img.data) {
    double x = v + p.brightness;
    if (p.contrast) {
      const auto [lo, hi] = *p.contrast;
      x = lo + std::clamp(x, 0.0, 255.0) * (hi - lo) / 255.0;
    }
    if (p.color_levels) {
      const double step = 255.0 / (*p.color_levels - 1);
      x = std::round(std::clamp(x, 0.0, 255.0) / step) * step;
    }
    if (p.noise_sigma > 0) x += noise(rng);
    v = clamp_u8(x);
  }
}

// Smoothly interpolated random lattice, one layer per channel.
void add_value_noise(cv::Mat& acc, int cell, double amplitude, std::mt19937_64& rng) {
  const int gw = acc.cols / cell + 3;
  const int gh = acc.rows / cell + 3;
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  cv::Mat lattice(gh, gw, CV_32FC3);
  for (int y = 0; y < gh; ++y) {
    for (int x = 0; x < gw; ++x) {
      lattice.at<cv::Vec3f>(y, x) = cv::Vec3f(static_cast<float>(u(rng)),
                                              static_cast<float>(u(rng)),
                                              static_cast<float>(u(rng)));
    }
  }
  cv::Mat up;
  cv::resize(lattice, up, cv::Size(gw * cell, gh * cell), 0, 0, cv::INTER_CUBIC);
  acc += up(cv::Rect(cell, cell, acc.cols, acc.rows)) * amplitude;
}

RasterImage from_mat(const cv::Mat& bgr_float) {
  cv::Mat u8;
  bgr_float.convertTo(u8, CV_8UC3);
  RasterImage out;
  out.width = u8.cols;
  out.height = u8.rows;
  out.channels = 3;
  out.data.assign(u8.datastart, u8.dataend);
  return out;
}

cv::Scalar random_color(std::mt19937_64& rng, double lo = 0, double hi = 255) {
  std::uniform_real_distribution<double> u(lo, hi);
  return cv::Scalar(u(rng), u(rng), u(rng));
}

void add_pixel_noise(cv::Mat& img, double sigma, std::mt19937_64& rng) {
  std::normal_distribution<float> n(0.0f, static_cast<float>(sigma));
  for (int y = 0; y < img.rows; ++y) {
    auto* row = img.ptr<cv::Vec3f>(y);
    for (int x = 0; x < img.cols; ++x) {
      const float g = n(rng);
      row[x] += cv::Vec3f(g + n(rng) * 0.3f, g + n(rng) * 0.3f, g + n(rng) * 0.3f);
    }
  }
}

}  // namespace

SyntheticForgery generate_forgery(const RasterImage& source,
                                  const SyntheticForgerySpec& spec,
                                  std::uint64_t rng_seed) {
  const auto& r = spec.patch;
  if (r.width <= 0 || r.height <= 0 || r.x < 0 || r.y < 0 ||
      r.x + r.width > source.width || r.y + r.height > source.height) {
    throw SpecError("patch rectangle outside the image");
  }
  if (spec.copies.empty()) throw SpecError("at least one copy is required");

  SyntheticForgery out{source, TamperMask(source.width, source.height)};
  for (int y = r.y; y < r.y + r.height; ++y) {
    for (int x = r.x; x < r.x + r.width; ++x) out.mask.set(x, y);
  }

  const std::array<Point2, 4> corners{
      Point2{r.x - 0.5, r.y - 0.5}, Point2{r.x + r.width - 0.5, r.y - 0.5},
      Point2{r.x + r.width - 0.5, r.y + r.height - 0.5},
      Point2{r.x - 0.5, r.y + r.height - 0.5}};

  for (const auto& t : spec.copies) {
    if (!(t.scale > 0.0)) throw SpecError("copy scale must be positive");
    const Homography fwd = copy_transform(r, t);
    const Homography inv = fwd.inverse();
    double x0 = 1e300, y0 = 1e300, x1 = -1e300, y1 = -1e300;
    for (const auto& c : corners) {
      const Point2 p = fwd.apply(c);
      x0 = std::min(x0, p.x);
      y0 = std::min(y0, p.y);
      x1 = std::max(x1, p.x);
      y1 = std::max(y1, p.y);
    }
    if (x0 < -0.5 - 1e-9 || y0 < -0.5 - 1e-9 || x1 > source.width - 0.5 + 1e-9 ||
        y1 > source.height - 0.5 + 1e-9) {
      throw SpecError("transformed copy leaves the image");
    }
    const int bx0 = std::max(0, static_cast<int>(std::floor(x0)));
    const int by0 = std::max(0, static_cast<int>(std::floor(y0)));
    const int bx1 = std::min(source.width - 1, static_cast<int>(std::ceil(x1)));
    const int by1 = std::min(source.height - 1, static_cast<int>(std::ceil(y1)));
    for (int y = by0; y <= by1; ++y) {
      for (int x = bx0; x <= bx1; ++x) {
        const Point2 p = inv.apply({static_cast<double>(x), static_cast<double>(y)});
        if (p.x < r.x - 0.5 || p.x >= r.x + r.width - 0.5 || p.y < r.y - 0.5 ||
            p.y >= r.y + r.height - 0.5) {
          continue;
        }
        for (int c = 0; c < source.channels; ++c) {
          out.image.at(x, y, c) = clamp_u8(sample_channel(source, c, p.x, p.y));
        }
        out.mask.set(x, y);
      }
    }
  }

  if (spec.post_process) {
    const auto& p = *spec.post_process;
    if (p.color_levels && *p.color_levels < 2) {
      throw SpecError("color_levels must be at least 2");
    }
    apply_post_process(out.image, p, rng_seed);
  }
  return out;
}

namespace {

// Value noise plus alpha-blended strokes and blobs, without pixel noise.
cv::Mat texture_layers(int width, int height, std::mt19937_64& rng) {
  cv::Mat acc(height, width, CV_32FC3, cv::Scalar(128, 128, 128));
  add_value_noise(acc, 96, 50.0, rng);
  add_value_noise(acc, 32, 35.0, rng);
  add_value_noise(acc, 12, 22.0, rng);
  add_value_noise(acc, 5, 12.0, rng);

  std::uniform_int_distribution<int> ux(0, width - 1);
  std::uniform_int_distribution<int> uy(0, height - 1);
  std::uniform_int_distribution<int> usize(3, std::max(4, std::min(width, height) / 12));
  std::uniform_real_distribution<double> angle(0.0, 180.0);
  std::uniform_real_distribution<double> alpha(0.25, 0.6);
  const int shapes = std::max(8, width * height / 2500);
  for (int i = 0; i < shapes; ++i) {
    cv::Mat layer = acc.clone();
    const cv::Point c(ux(rng), uy(rng));
    const cv::Scalar color = random_color(rng, 20, 235);
    switch (i % 3) {
      case 0:
        cv::ellipse(layer, c, cv::Size(usize(rng), usize(rng)), angle(rng), 0, 360,
                    color, -1, cv::LINE_AA);
        break;
      case 1:
        cv::line(layer, c, cv::Point(ux(rng), uy(rng)), color,
                 1 + usize(rng) / 8, cv::LINE_AA);
        break;
      default: {
        std::vector<cv::Point> poly;
        for (int k = 0; k < 3 + i % 4; ++k) {
          poly.emplace_back(c.x + usize(rng) - usize(rng), c.y + usize(rng) - usize(rng));
        }
        cv::fillConvexPoly(layer, poly, color, cv::LINE_AA);
      }
    }
    const double a = alpha(rng);
    cv::addWeighted(layer, a, acc, 1.0 - a, 0.0, acc);
  }
  return acc;
}

}  // namespace

RasterImage synthetic_texture(int width, int height, std::uint64_t seed) {
  if (width < 1 || height < 1) throw PreconditionError("empty texture size");
  std::mt19937_64 rng(seed);
  cv::Mat acc = texture_layers(width, height, rng);
  add_pixel_noise(acc, 4.0, rng);
  return from_mat(acc);
}

RasterImage synthetic_facade(int width, int height, std::uint64_t seed) {
  if (width < 64 || height < 64) throw PreconditionError("facade needs at least 64x64");
  std::mt19937_64 rng(seed);
  cv::Mat acc(height, width, CV_32FC3, random_color(rng, 110, 170));
  add_value_noise(acc, 64, 14.0, rng);
  add_value_noise(acc, 8, 5.0, rng);

  const int period_x = 96;
  const int period_y = 112;
  const int cols = std::max(1, width / period_x);
  const int rows = std::max(1, height / period_y);
  const int margin_x = (width - cols * period_x) / 2;
  const int margin_y = (height - rows * period_y) / 2;

  std::uniform_int_distribution<int> jitter(-2, 2);
  std::uniform_int_distribution<int> size_jitter(-9, 9);
  std::uniform_int_distribution<int> frame(3, 7);
  std::uniform_real_distribution<double> shade(-12.0, 12.0);
  std::uniform_real_distribution<double> tile_shade(-4.0, 4.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const cv::Scalar frame_base = random_color(rng, 200, 245);
  const cv::Scalar glass_base = random_color(rng, 35, 80);

  // a few window designs shared across the grid; tiles differ in shading,
  // reflection and noise only
  struct Design {
    int ww, wh, f, mx, my, curtain;
    double gx, gy;
    cv::Scalar glass;
    cv::Mat curtain_pattern;
  };
  // each design appears on two tiles
  std::vector<Design> designs(static_cast<std::size_t>((rows * cols + 1) / 2));
  for (auto& d : designs) {
    d.ww = 54 + size_jitter(rng);
    d.wh = 72 + size_jitter(rng);
    d.f = frame(rng);
    d.mx = d.ww / 2 + jitter(rng);
    d.my = d.wh / 3 + jitter(rng);
    d.curtain = unit(rng) < 0.5 ? 1 : 2;
    d.glass = glass_base + cv::Scalar(shade(rng), shade(rng), shade(rng));
    d.gx = unit(rng) * 2 - 1;
    d.gy = unit(rng) * 2 - 1;
  }
  std::vector<std::size_t> assignment;
  for (std::size_t i = 0; i < designs.size(); ++i) assignment.insert(assignment.end(), {i, i});
  std::shuffle(assignment.begin(), assignment.end(), rng);

  for (int ty = 0; ty < rows; ++ty) {
    for (int tx = 0; tx < cols; ++tx) {
      Design& d = designs[assignment[static_cast<std::size_t>(ty * cols + tx)]];
      const int ww = d.ww;
      const int wh = d.wh;
      const int f = d.f;
      const int x0 = margin_x + tx * period_x + (period_x - ww) / 2 + jitter(rng);
      const int y0 = margin_y + ty * period_y + (period_y - wh) / 2 + jitter(rng);
      const double s = tile_shade(rng);
      const cv::Scalar frame_color = frame_base + cv::Scalar(s, s, s);
      const cv::Scalar glass = d.glass + cv::Scalar(s, s, s) * 0.3;

      cv::rectangle(acc, cv::Rect(x0 - f, y0 - f, ww + 2 * f, wh + 2 * f), frame_color, -1);
      cv::Mat pane = acc(cv::Rect(x0, y0, ww, wh));
      pane.setTo(glass);
      const double gx = d.gx;
      const double gy = d.gy;
      for (int y = 0; y < wh; ++y) {
        auto* row = pane.ptr<cv::Vec3f>(y);
        for (int x = 0; x < ww; ++x) {
          const float g = static_cast<float>(30.0 * (gx * x / ww + gy * y / wh));
          row[x] += cv::Vec3f(g, g, g);
        }
      }
      const int mx = x0 + d.mx;
      const int my = y0 + d.my;
      const int bar = std::max(2, f - 2);
      cv::rectangle(acc, cv::Rect(mx - bar / 2, y0, bar, wh), frame_color, -1);
      cv::rectangle(acc, cv::Rect(x0, my - bar / 2, ww, bar), frame_color, -1);
      // sill
      cv::rectangle(acc, cv::Rect(x0 - f - 3, y0 + wh + f, ww + 2 * f + 6, 4 + f / 2),
                    frame_color * 0.85, -1);
      // patterned curtain shared by both tiles of the design
      {
        const cv::Rect area(d.curtain == 1 ? x0 : mx + bar / 2 + 1, my + bar / 2 + 1,
                            std::max(4, ww / 2 - bar), std::max(4, wh - d.my - bar));
        if (d.curtain_pattern.empty()) {
          d.curtain_pattern = texture_layers(area.width, area.height, rng);
        }
        cv::Mat dst = acc(area & cv::Rect(0, 0, width, height));
        d.curtain_pattern(cv::Rect(0, 0, dst.cols, dst.rows)).copyTo(dst);
        dst += cv::Scalar(s, s, s);
      }
      // per-tile noise on top of the shared design
      cv::Mat tile = acc(cv::Rect(x0 - f - 3, y0 - f, ww + 2 * f + 6, wh + 2 * f + 4 + f / 2) &
                         cv::Rect(0, 0, width, height));
      add_pixel_noise(tile, 3.0, rng);
    }
  }
  add_pixel_noise(acc, 4.0, rng);
  return from_mat(acc);
}

}  // namespace cmfd
