#include "cmfd/keypoints.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <memory>
#include <numeric>
#include <numbers>

#include "cmfd/error.hpp"

namespace cmfd {
namespace {

constexpr int kImageBorder = 5;
constexpr int kMaxInterpSteps = 5;
constexpr int kOriHistBins = 36;
constexpr double kOriSigmaFactor = 1.5;
constexpr double kOriRadiusFactor = 3.0 * kOriSigmaFactor;
constexpr double kOriPeakRatio = 0.8;
constexpr int kDescWidth = 4;
constexpr int kDescBins = 8;
constexpr double kDescScaleFactor = 3.0;
constexpr float kDescMagThreshold = 0.2f;
constexpr int kMinImageSide = 16;

struct Plane {
  int w = 0;
  int h = 0;
  std::vector<float> v;

  Plane() = default;
  Plane(int width, int height)
      : w(width), h(height), v(static_cast<std::size_t>(width) * height) {}

  float at(int x, int y) const { return v[static_cast<std::size_t>(y) * w + x]; }
  float* row(int y) { return &v[static_cast<std::size_t>(y) * w]; }
  const float* row(int y) const { return &v[static_cast<std::size_t>(y) * w]; }
};

int reflect101(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - i - 2;
  }
  return i;
}

std::vector<float> gaussian_kernel(double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(4.0 * sigma)));
  std::vector<float> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  std::vector<double> tmp(k.size());
  for (int i = -radius; i <= radius; ++i) {
    tmp[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += tmp[i + radius];
  }
  for (std::size_t i = 0; i < k.size(); ++i) k[i] = static_cast<float>(tmp[i] / sum);
  return k;
}

Plane gaussian_blur(const Plane& src, double sigma) {
  const auto k = gaussian_kernel(sigma);
  const int r = static_cast<int>(k.size() / 2);
  Plane tmp(src.w, src.h);
  std::vector<float> padded(static_cast<std::size_t>(src.w + 2 * r));
  for (int y = 0; y < src.h; ++y) {
    const float* in = src.row(y);
    for (int i = -r; i < src.w + r; ++i) padded[i + r] = in[reflect101(i, src.w)];
    float* out = tmp.row(y);
    for (int x = 0; x < src.w; ++x) {
      const float* p = &padded[x];
      float acc = 0.0f;
      for (std::size_t t = 0; t < k.size(); ++t) acc += k[t] * p[t];
      out[x] = acc;
    }
  }
  Plane dst(src.w, src.h);
  for (int y = 0; y < src.h; ++y) {
    float* out = dst.row(y);
    std::fill(out, out + src.w, 0.0f);
    for (int t = -r; t <= r; ++t) {
      const float* in = tmp.row(reflect101(y + t, src.h));
      const float kt = k[t + r];
      for (int x = 0; x < src.w; ++x) out[x] += kt * in[x];
    }
  }
  return dst;
}

Plane downsample(const Plane& src) {
  Plane dst(std::max(1, src.w / 2), std::max(1, src.h / 2));
  for (int y = 0; y < dst.h; ++y) {
    const float* in = src.row(std::min(2 * y, src.h - 1));
    float* out = dst.row(y);
    for (int x = 0; x < dst.w; ++x) out[x] = in[std::min(2 * x, src.w - 1)];
  }
  return dst;
}

Plane subtract(const Plane& a, const Plane& b) {
  Plane d(a.w, a.h);
  for (std::size_t i = 0; i < d.v.size(); ++i) d.v[i] = a.v[i] - b.v[i];
  return d;
}

// Gradient magnitude and orientation (degrees, [0,360)) of one Gaussian layer.
struct GradientField {
  Plane mag;
  Plane ori;
};

GradientField gradients(const Plane& g) {
  GradientField f{Plane(g.w, g.h), Plane(g.w, g.h)};
  std::fill(f.mag.v.begin(), f.mag.v.end(), 0.0f);
  std::fill(f.ori.v.begin(), f.ori.v.end(), 0.0f);
  constexpr float kRadToDeg = static_cast<float>(180.0 / std::numbers::pi);
  for (int y = 1; y + 1 < g.h; ++y) {
    const float* up = g.row(y - 1);
    const float* mid = g.row(y);
    const float* down = g.row(y + 1);
    float* m = f.mag.row(y);
    float* o = f.ori.row(y);
    for (int x = 1; x + 1 < g.w; ++x) {
      const float dx = mid[x + 1] - mid[x - 1];
      const float dy = down[x] - up[x];
      m[x] = std::sqrt(dx * dx + dy * dy);
      float a = std::atan2(dy, dx) * kRadToDeg;
      if (a < 0.0f) a += 360.0f;
      if (a >= 360.0f) a -= 360.0f;
      o[x] = a;
    }
  }
  return f;
}

struct Octave {
  std::vector<Plane> gauss;
  std::vector<Plane> dog;
  std::vector<std::unique_ptr<GradientField>> grads;

  const GradientField& gradient(int layer) {
    auto& slot = grads[static_cast<std::size_t>(layer)];
    if (!slot) slot = std::make_unique<GradientField>(gradients(gauss[layer]));
    return *slot;
  }
};

struct Extremum {
  int layer;
  int x;
  int y;
  double xc;  // sub-pixel offsets
  double yc;
  double sc;
};

// Quadratic refinement; false when the candidate is rejected.
bool refine_extremum(const Octave& oct, int layers, Extremum& e,
                     const SiftParams& p) {
  constexpr double kDeriv = 0.5;
  constexpr double kCross = 0.25;
  double xi = 0.0, xr = 0.0, xc = 0.0;
  double contrast = 0.0;
  int step = 0;
  const int w = oct.dog[0].w;
  const int h = oct.dog[0].h;
  int layer = e.layer, r = e.y, c = e.x;

  for (; step < kMaxInterpSteps; ++step) {
    const Plane& img = oct.dog[layer];
    const Plane& prev = oct.dog[layer - 1];
    const Plane& next = oct.dog[layer + 1];

    const double dx = (img.at(c + 1, r) - img.at(c - 1, r)) * kDeriv;
    const double dy = (img.at(c, r + 1) - img.at(c, r - 1)) * kDeriv;
    const double ds = (next.at(c, r) - prev.at(c, r)) * kDeriv;
    const double v2 = 2.0 * img.at(c, r);
    const double dxx = img.at(c + 1, r) + img.at(c - 1, r) - v2;
    const double dyy = img.at(c, r + 1) + img.at(c, r - 1) - v2;
    const double dss = next.at(c, r) + prev.at(c, r) - v2;
    const double dxy = (img.at(c + 1, r + 1) - img.at(c - 1, r + 1) -
                        img.at(c + 1, r - 1) + img.at(c - 1, r - 1)) * kCross;
    const double dxs = (next.at(c + 1, r) - next.at(c - 1, r) -
                        prev.at(c + 1, r) + prev.at(c - 1, r)) * kCross;
    const double dys = (next.at(c, r + 1) - next.at(c, r - 1) -
                        prev.at(c, r + 1) + prev.at(c, r - 1)) * kCross;

    // Solve H * X = -g by Cramer's rule on the symmetric 3x3 system.
    const double a00 = dxx, a01 = dxy, a02 = dxs;
    const double a11 = dyy, a12 = dys, a22 = dss;
    const double det = a00 * (a11 * a22 - a12 * a12) -
                       a01 * (a01 * a22 - a12 * a02) +
                       a02 * (a01 * a12 - a11 * a02);
    if (std::abs(det) < 1e-20) return false;
    const double inv00 = (a11 * a22 - a12 * a12) / det;
    const double inv01 = (a02 * a12 - a01 * a22) / det;
    const double inv02 = (a01 * a12 - a02 * a11) / det;
    const double inv11 = (a00 * a22 - a02 * a02) / det;
    const double inv12 = (a02 * a01 - a00 * a12) / det;
    const double inv22 = (a00 * a11 - a01 * a01) / det;
    xc = -(inv00 * dx + inv01 * dy + inv02 * ds);
    xr = -(inv01 * dx + inv11 * dy + inv12 * ds);
    xi = -(inv02 * dx + inv12 * dy + inv22 * ds);

    if (std::abs(xi) < 0.5 && std::abs(xr) < 0.5 && std::abs(xc) < 0.5) {
      contrast = img.at(c, r) + 0.5 * (dx * xc + dy * xr + ds * xi);
      if (std::abs(contrast) * p.scales_per_octave < p.contrast_threshold) {
        return false;
      }
      const double tr = dxx + dyy;
      const double det2 = dxx * dyy - dxy * dxy;
      const double edge = p.edge_threshold;
      if (det2 <= 0.0 || tr * tr * edge >= (edge + 1.0) * (edge + 1.0) * det2) {
        return false;
      }
      e.layer = layer;
      e.x = c;
      e.y = r;
      e.xc = xc;
      e.yc = xr;
      e.sc = xi;
      return true;
    }

    constexpr double kLimit = static_cast<double>(std::numeric_limits<int>::max() / 3);
    if (std::abs(xi) > kLimit || std::abs(xr) > kLimit || std::abs(xc) > kLimit) {
      return false;
    }
    c += static_cast<int>(std::lround(xc));
    r += static_cast<int>(std::lround(xr));
    layer += static_cast<int>(std::lround(xi));
    if (layer < 1 || layer > layers || c < kImageBorder || c >= w - kImageBorder ||
        r < kImageBorder || r >= h - kImageBorder) {
      return false;
    }
  }
  return false;
}

std::vector<double> orientation_peaks(const GradientField& g, int cx, int cy,
                                      double scale) {
  const int radius = static_cast<int>(std::lround(kOriRadiusFactor * scale));
  const double sigma = kOriSigmaFactor * scale;
  const double expf = -1.0 / (2.0 * sigma * sigma);
  std::array<double, kOriHistBins> raw{};

  for (int i = -radius; i <= radius; ++i) {
    const int y = cy + i;
    if (y <= 0 || y >= g.mag.h - 1) continue;
    for (int j = -radius; j <= radius; ++j) {
      const int x = cx + j;
      if (x <= 0 || x >= g.mag.w - 1) continue;
      const double wgt = std::exp((i * i + j * j) * expf);
      int bin = static_cast<int>(std::lround(g.ori.at(x, y) * kOriHistBins / 360.0));
      if (bin >= kOriHistBins) bin -= kOriHistBins;
      raw[bin] += wgt * g.mag.at(x, y);
    }
  }

  std::array<double, kOriHistBins> hist{};
  for (int i = 0; i < kOriHistBins; ++i) {
    const auto at = [&](int k) { return raw[(k + kOriHistBins) % kOriHistBins]; };
    hist[i] = (at(i - 2) + at(i + 2)) * (1.0 / 16.0) +
              (at(i - 1) + at(i + 1)) * (4.0 / 16.0) + at(i) * (6.0 / 16.0);
  }
  const double max_val = *std::max_element(hist.begin(), hist.end());
  std::vector<double> peaks;
  if (max_val <= 0.0) return peaks;
  const double threshold = max_val * kOriPeakRatio;
  for (int i = 0; i < kOriHistBins; ++i) {
    const int l = i > 0 ? i - 1 : kOriHistBins - 1;
    const int r = i < kOriHistBins - 1 ? i + 1 : 0;
    if (hist[i] > hist[l] && hist[i] > hist[r] && hist[i] >= threshold) {
      double bin = i + 0.5 * (hist[l] - hist[r]) / (hist[l] - 2.0 * hist[i] + hist[r]);
      if (bin < 0) bin += kOriHistBins;
      if (bin >= kOriHistBins) bin -= kOriHistBins;
      double angle = bin * (360.0 / kOriHistBins);
      if (angle >= 360.0 || std::abs(angle - 360.0) < 1e-9) angle = 0.0;
      peaks.push_back(angle);
    }
  }
  return peaks;
}

// Returns false when the patch carries no gradient energy.
bool compute_descriptor(const GradientField& g, double px, double py,
                        double theta_deg, double scale, Descriptor& out) {
  constexpr int d = kDescWidth;
  constexpr int n = kDescBins;
  const double theta = theta_deg * std::numbers::pi / 180.0;
  const double hist_width = kDescScaleFactor * scale;
  int radius = static_cast<int>(std::lround(hist_width * std::numbers::sqrt2 * (d + 1) * 0.5));
  radius = std::min(radius, static_cast<int>(std::sqrt(
                                static_cast<double>(g.mag.w) * g.mag.w +
                                static_cast<double>(g.mag.h) * g.mag.h)));
  const double cos_t = std::cos(theta) / hist_width;
  const double sin_t = std::sin(theta) / hist_width;
  const double bins_per_deg = n / 360.0;
  const double exp_scale = -1.0 / (d * d * 0.5);
  const int cx = static_cast<int>(std::lround(px));
  const int cy = static_cast<int>(std::lround(py));

  std::array<double, (d + 2) * (d + 2) * (n + 2)> hist{};
  const auto idx = [](int r, int c, int o) { return (r * (d + 2) + c) * (n + 2) + o; };

  for (int i = -radius; i <= radius; ++i) {
    const int y = cy + i;
    if (y <= 0 || y >= g.mag.h - 1) continue;
    for (int j = -radius; j <= radius; ++j) {
      const int x = cx + j;
      if (x <= 0 || x >= g.mag.w - 1) continue;
      // Sample offset expressed in the keypoint frame.
      const double c_rot = j * cos_t + i * sin_t;
      const double r_rot = -j * sin_t + i * cos_t;
      double rbin = r_rot + d / 2.0 - 0.5;
      double cbin = c_rot + d / 2.0 - 0.5;
      if (!(rbin > -1.0 && rbin < d && cbin > -1.0 && cbin < d)) continue;

      const double mag = g.mag.at(x, y) *
                         std::exp((c_rot * c_rot + r_rot * r_rot) * exp_scale);
      double obin = (g.ori.at(x, y) - theta_deg) * bins_per_deg;
      const int r0 = static_cast<int>(std::floor(rbin));
      const int c0 = static_cast<int>(std::floor(cbin));
      int o0 = static_cast<int>(std::floor(obin));
      rbin -= r0;
      cbin -= c0;
      obin -= o0;
      if (o0 < 0) o0 += n;
      if (o0 >= n) o0 -= n;

      const double v_r1 = mag * rbin, v_r0 = mag - v_r1;
      const double v_rc11 = v_r1 * cbin, v_rc10 = v_r1 - v_rc11;
      const double v_rc01 = v_r0 * cbin, v_rc00 = v_r0 - v_rc01;
      const double v_rco111 = v_rc11 * obin, v_rco110 = v_rc11 - v_rco111;
      const double v_rco101 = v_rc10 * obin, v_rco100 = v_rc10 - v_rco101;
      const double v_rco011 = v_rc01 * obin, v_rco010 = v_rc01 - v_rco011;
      const double v_rco001 = v_rc00 * obin, v_rco000 = v_rc00 - v_rco001;

      const int rr = r0 + 1, cc = c0 + 1;
      hist[idx(rr, cc, o0)] += v_rco000;
      hist[idx(rr, cc, o0 + 1)] += v_rco001;
      hist[idx(rr, cc + 1, o0)] += v_rco010;
      hist[idx(rr, cc + 1, o0 + 1)] += v_rco011;
      hist[idx(rr + 1, cc, o0)] += v_rco100;
      hist[idx(rr + 1, cc, o0 + 1)] += v_rco101;
      hist[idx(rr + 1, cc + 1, o0)] += v_rco110;
      hist[idx(rr + 1, cc + 1, o0 + 1)] += v_rco111;
    }
  }

  std::array<double, kDescriptorSize> raw{};
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      const int base = idx(i + 1, j + 1, 0);
      hist[base] += hist[base + n];
      hist[base + 1] += hist[base + n + 1];
      for (int k = 0; k < n; ++k) raw[(i * d + j) * n + k] = hist[base + k];
    }
  }

  double norm2 = 0.0;
  for (double v : raw) norm2 += v * v;
  if (norm2 <= 0.0) return false;
  const double clamp = std::sqrt(norm2) * kDescMagThreshold;
  norm2 = 0.0;
  for (double& v : raw) {
    v = std::min(v, clamp);
    norm2 += v * v;
  }
  const double inv = 1.0 / std::sqrt(norm2);
  for (int k = 0; k < kDescriptorSize; ++k) out[k] = static_cast<float>(raw[k] * inv);
  return true;
}

struct Detection {
  Keypoint kp;
  Descriptor desc;
};

bool is_extremum(const Octave& oct, int layer, int x, int y, float val) {
  const Plane& cur = oct.dog[layer];
  const Plane& prev = oct.dog[layer - 1];
  const Plane& next = oct.dog[layer + 1];
  const int w = cur.w;
  const std::size_t center = static_cast<std::size_t>(y) * w + x;
  const std::ptrdiff_t offs[9] = {-w - 1, -w, -w + 1, -1, 0, 1, w - 1, w, w + 1};
  if (val > 0) {
    for (std::ptrdiff_t o : offs) {
      if (o != 0 && !(val > cur.v[center + o])) return false;
    }
    for (std::ptrdiff_t o : offs) {
      if (!(val > prev.v[center + o]) || !(val > next.v[center + o])) return false;
    }
  } else {
    for (std::ptrdiff_t o : offs) {
      if (o != 0 && !(val < cur.v[center + o])) return false;
    }
    for (std::ptrdiff_t o : offs) {
      if (!(val < prev.v[center + o]) || !(val < next.v[center + o])) return false;
    }
  }
  return true;
}

}  // namespace

int octave_count(int width, int height) {
  const int m = std::min(width, height);
  if (m < 1) return 1;
  const int n = static_cast<int>(std::floor(std::log2(static_cast<double>(m)))) - 2;
  return std::max(1, n);
}

KeypointSet detect_keypoints(const GrayImage& img, const SiftParams& p) {
  if (img.width < kMinImageSide || img.height < kMinImageSide) {
    throw InputTooSmallError("detect_keypoints: image must be at least 16x16");
  }
  if (p.contrast_threshold < 0.0) {
    throw PreconditionError("detect_keypoints: contrast threshold must be >= 0");
  }
  const int S = p.scales_per_octave;
  const int n_octaves = octave_count(img.width, img.height);

  Plane base(img.width, img.height);
  for (std::size_t i = 0; i < base.v.size(); ++i) {
    base.v[i] = static_cast<float>(img.data[i] / 255.0);
  }
  const double sig_diff = std::sqrt(std::max(
      p.sigma0 * p.sigma0 - p.input_blur * p.input_blur, 0.01));
  base = gaussian_blur(base, sig_diff);

  std::vector<double> layer_sigma(static_cast<std::size_t>(S + 3));
  const double k = std::pow(2.0, 1.0 / S);
  layer_sigma[0] = p.sigma0;
  for (int i = 1; i < S + 3; ++i) {
    const double prev = std::pow(k, i - 1) * p.sigma0;
    const double total = prev * k;
    layer_sigma[i] = std::sqrt(total * total - prev * prev);
  }

  const float prefilter = static_cast<float>(0.5 * p.contrast_threshold / S);
  std::vector<Detection> found;
  Plane next_base = std::move(base);

  for (int o = 0; o < n_octaves; ++o) {
    Octave oct;
    oct.gauss.reserve(static_cast<std::size_t>(S + 3));
    oct.gauss.push_back(std::move(next_base));
    for (int i = 1; i < S + 3; ++i) {
      oct.gauss.push_back(gaussian_blur(oct.gauss.back(), layer_sigma[i]));
    }
    for (int i = 0; i < S + 2; ++i) {
      oct.dog.push_back(subtract(oct.gauss[i + 1], oct.gauss[i]));
    }
    oct.grads.resize(static_cast<std::size_t>(S + 3));
    const int w = oct.dog[0].w;
    const int h = oct.dog[0].h;
    const double octave_scale = std::ldexp(1.0, o);

    for (int layer = 1; layer <= S; ++layer) {
      for (int y = kImageBorder; y < h - kImageBorder; ++y) {
        const float* row = oct.dog[layer].row(y);
        for (int x = kImageBorder; x < w - kImageBorder; ++x) {
          const float val = row[x];
          if (!(std::abs(val) > prefilter)) continue;
          if (!is_extremum(oct, layer, x, y, val)) continue;

          Extremum e{layer, x, y, 0.0, 0.0, 0.0};
          if (!refine_extremum(oct, S, e, p)) continue;

          const double scl_octv = p.sigma0 * std::pow(2.0, (e.layer + e.sc) / S);
          const GradientField& grad = oct.gradient(e.layer);
          const auto peaks = orientation_peaks(grad, e.x, e.y, scl_octv);
          for (double theta : peaks) {
            Detection det;
            det.kp.x = (e.x + e.xc) * octave_scale;
            det.kp.y = (e.y + e.yc) * octave_scale;
            det.kp.sigma = scl_octv * octave_scale;
            det.kp.theta = theta;
            det.kp.octave = o;
            det.kp.layer = e.layer;
            if (!compute_descriptor(grad, e.x + e.xc, e.y + e.yc, theta,
                                    scl_octv, det.desc)) {
              continue;
            }
            found.push_back(det);
          }
        }
      }
    }

    if (o + 1 < n_octaves) next_base = downsample(oct.gauss[S]);
  }

  std::vector<std::size_t> order(found.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const Keypoint& ka = found[a].kp;
    const Keypoint& kb = found[b].kp;
    if (ka.octave != kb.octave) return ka.octave < kb.octave;
    if (ka.layer != kb.layer) return ka.layer < kb.layer;
    if (ka.y != kb.y) return ka.y < kb.y;
    if (ka.x != kb.x) return ka.x < kb.x;
    if (ka.theta != kb.theta) return ka.theta < kb.theta;
    return a < b;
  });

  KeypointSet out;
  out.keypoints.reserve(found.size());
  out.descriptors.reserve(found.size());
  for (std::size_t i : order) {
    out.keypoints.push_back(found[i].kp);
    out.descriptors.push_back(found[i].desc);
  }
  return out;
}

double coverage_rate(std::span<const Keypoint> keypoints, int width,
                     int height, int window, int min_count) {
  if (width <= 0 || height <= 0) return 0.0;
  if (window < 1) throw PreconditionError("coverage_rate: window must be >= 1");
  const std::size_t stride = static_cast<std::size_t>(width) + 1;
  // Summed-area table of keypoint counts.
  std::vector<std::uint32_t> sat(stride * (static_cast<std::size_t>(height) + 1), 0);
  const auto cell = [&](int x, int y) -> std::uint32_t& {
    return sat[static_cast<std::size_t>(y) * stride + x];
  };
  std::vector<std::uint32_t> counts(static_cast<std::size_t>(width) * height, 0);
  for (const Keypoint& kp : keypoints) {
    const long x = std::lround(kp.x);
    const long y = std::lround(kp.y);
    if (x < 0 || y < 0 || x >= width || y >= height) continue;
    ++counts[static_cast<std::size_t>(y) * width + x];
  }
  for (int y = 0; y < height; ++y) {
    std::uint32_t row = 0;
    for (int x = 0; x < width; ++x) {
      row += counts[static_cast<std::size_t>(y) * width + x];
      cell(x + 1, y + 1) = cell(x + 1, y) + row;
    }
  }
  const int before = window / 2;
  const int after = window - before - 1;
  std::size_t covered = 0;
  for (int y = 0; y < height; ++y) {
    const int y0 = std::max(0, y - before);
    const int y1 = std::min(height - 1, y + after);
    for (int x = 0; x < width; ++x) {
      const int x0 = std::max(0, x - before);
      const int x1 = std::min(width - 1, x + after);
      const std::uint32_t n = cell(x1 + 1, y1 + 1) - cell(x0, y1 + 1) -
                              cell(x1 + 1, y0) + cell(x0, y0);
      if (n >= static_cast<std::uint32_t>(min_count)) ++covered;
    }
  }
  return static_cast<double>(covered) / (static_cast<double>(width) * height);
}

void write_keypoints_csv(const std::filesystem::path& path,
                         const KeypointSet& kps) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "x,y,sigma,theta\n";
  char buf[128];
  for (const Keypoint& kp : kps.keypoints) {
    std::snprintf(buf, sizeof buf, "%.4f,%.4f,%.4f,%.4f\n", kp.x, kp.y,
                  kp.sigma, kp.theta);
    out << buf;
  }
}

}  // namespace cmfd
