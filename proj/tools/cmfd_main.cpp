#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "cmfd/error.hpp"
#include "cmfd/eval.hpp"
#include "cmfd/imaging.hpp"
#include "cmfd/keypoints.hpp"
#include "cmfd/localization.hpp"
#include "cmfd/pipeline.hpp"
#include "cmfd/synthetic.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitUsage = 2;

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> ablate;
  std::optional<int> scale_override;
  std::optional<int> min_pixels;
  std::optional<int> n_in;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path, "JSON config file");
  cmd->add_option("--seed", f.seed, "RANSAC seed");
  cmd->add_option("--ablate", f.ablate,
                  "comma-separated stages to disable: gray,entropy,lexicographic");
  cmd->add_option("--scale-override", f.scale_override,
                  "upsampling factor (0 = automatic)");
  cmd->add_option("--min-pixels", f.min_pixels, "pixels needed for a tampered verdict");
  cmd->add_option("--n-in", f.n_in, "minimum inlier count of an accepted model");
}

cmfd::PipelineConfig build_config(const CommonFlags& f) {
  cmfd::PipelineConfig c;
  if (!f.config_path.empty()) c = cmfd::load_config(f.config_path);
  if (f.seed) c.rng_seed = *f.seed;
  if (f.ablate) {
    const cmfd::MatchStages off = cmfd::parse_ablation(*f.ablate);
    c.match.stages.gray = c.match.stages.gray && off.gray;
    c.match.stages.entropy = c.match.stages.entropy && off.entropy;
    c.match.stages.lexicographic = c.match.stages.lexicographic && off.lexicographic;
  }
  if (f.scale_override) c.scale_override = *f.scale_override;
  if (f.min_pixels) c.min_pixels = *f.min_pixels;
  if (f.n_in) c.localization.n_in = *f.n_in;
  c.validate();
  return c;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw cmfd::IoError("cannot open " + path.string());
  out << text << '\n';
}

int cmd_detect(const std::string& image_path, const CommonFlags& flags,
               const std::string& mask_out, const std::string& trace_out,
               const std::string& summary_out, const std::string& keypoints_out,
               const std::string& matches_out) {
  const cmfd::PipelineConfig config = build_config(flags);
  const cmfd::RasterImage image = cmfd::load_image(image_path);
  const bool want_artifacts = !keypoints_out.empty() || !matches_out.empty();
  cmfd::DetectionArtifacts artifacts;
  const cmfd::DetectionResult result =
      cmfd::run_detection(image, config, want_artifacts ? &artifacts : nullptr);

  if (!mask_out.empty()) cmfd::save_mask(mask_out, result.mask);
  if (!trace_out.empty()) cmfd::write_trace_jsonl(trace_out, result.traces);
  if (!keypoints_out.empty()) cmfd::write_keypoints_csv(keypoints_out, artifacts.keypoints);
  if (!matches_out.empty()) {
    cmfd::write_matches_csv(matches_out, artifacts.matches, artifacts.keypoints);
  }
  const std::string summary = cmfd::summary_json(result);
  if (!summary_out.empty()) write_text(summary_out, summary);
  std::cout << summary << '\n';
  return kExitOk;
}

int cmd_eval(const std::string& manifest_path, const std::string& out_dir,
             const CommonFlags& flags, unsigned workers) {
  const cmfd::PipelineConfig config = build_config(flags);
  const cmfd::DatasetManifest manifest = cmfd::load_manifest(manifest_path);
  const cmfd::DatasetReport report = cmfd::run_dataset(manifest, config, workers);
  fs::create_directories(out_dir);
  cmfd::write_report_csv(fs::path(out_dir) / "report.csv", report);
  cmfd::write_report_json(fs::path(out_dir) / "report.json", report);
  std::cout << "entries: " << report.rows.size() << ", errors: " << report.errors << '\n';
  return kExitOk;
}

int cmd_coverage(const std::string& image_path, const std::vector<int>& scales,
                 int window, int min_count) {
  for (int s : scales) {
    if (s < 1) throw cmfd::PreconditionError("scales must be positive integers");
  }
  const cmfd::GrayImage gray = cmfd::to_gray(cmfd::load_image(image_path));
  std::cout << "scale,n_keypoints,coverage\n";
  for (int s : scales) {
    const cmfd::GrayImage up = cmfd::resize_bicubic(gray, s);
    const cmfd::KeypointSet kps = cmfd::detect_keypoints(up, 0.0);
    // count keypoints per window of the original image
    std::vector<cmfd::Keypoint> original;
    original.reserve(kps.size());
    // corner-aligned grid: upscaled x maps to x * (w - 1) / (s * w - 1)
    const double fx = s == 1 ? 1.0 : (gray.width - 1.0) / (s * gray.width - 1.0);
    const double fy = s == 1 ? 1.0 : (gray.height - 1.0) / (s * gray.height - 1.0);
    for (auto k : kps.keypoints) {
      k.x *= fx;
      k.y *= fy;
      original.push_back(k);
    }
    const double rate =
        cmfd::coverage_rate(original, gray.width, gray.height, window, min_count);
    std::cout << s << ',' << kps.size() << ',' << std::fixed << std::setprecision(6)
              << rate << '\n';
    std::cout.unsetf(std::ios::fixed);
  }
  return kExitOk;
}

struct SynthFlags {
  std::string kind = "texture";
  int width = 512;
  int height = 512;
  std::uint64_t seed = 0;
  std::string source;
  std::vector<int> patch;
  std::vector<double> dx, dy, angle, scale;
  double noise = 0.0;
  double brightness = 0.0;
  std::string image_out;
  std::string mask_out;
};

int cmd_synth(const SynthFlags& f) {
  cmfd::RasterImage base;
  if (!f.source.empty()) {
    base = cmfd::load_image(f.source);
  } else if (f.kind == "texture") {
    base = cmfd::synthetic_texture(f.width, f.height, f.seed);
  } else if (f.kind == "facade") {
    base = cmfd::synthetic_facade(f.width, f.height, f.seed);
  } else {
    throw cmfd::PreconditionError("unknown kind: " + f.kind);
  }
  if (f.patch.empty()) {
    cmfd::save_image(f.image_out, base);
    return kExitOk;
  }
  if (f.patch.size() != 4) throw cmfd::PreconditionError("--patch takes x,y,w,h");
  cmfd::SyntheticForgerySpec spec;
  spec.patch = {f.patch[0], f.patch[1], f.patch[2], f.patch[3]};
  const std::size_t n = std::max({f.dx.size(), f.dy.size(), std::size_t{1}});
  auto pick = [](const std::vector<double>& v, std::size_t i, double def) {
    if (v.empty()) return def;
    return v[std::min(i, v.size() - 1)];
  };
  for (std::size_t i = 0; i < n; ++i) {
    spec.copies.push_back({pick(f.dx, i, 0.0), pick(f.dy, i, 0.0),
                           pick(f.angle, i, 0.0), pick(f.scale, i, 1.0)});
  }
  if (f.noise > 0 || f.brightness != 0) {
    cmfd::PostProcess post;
    post.noise_sigma = f.noise;
    post.brightness = f.brightness;
    spec.post_process = post;
  }
  const cmfd::SyntheticForgery forgery = cmfd::generate_forgery(base, spec, f.seed);
  cmfd::save_image(f.image_out, forgery.image);
  if (!f.mask_out.empty()) cmfd::save_mask(f.mask_out, forgery.mask);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Copy-move forgery detection and localization"};
  app.require_subcommand(1);

  CommonFlags detect_flags;
  std::string detect_image, mask_out, trace_out, summary_out, keypoints_out, matches_out;
  auto* detect = app.add_subcommand("detect", "detect and localize copy-move regions");
  detect->add_option("image", detect_image, "input image")->required();
  detect->add_option("--mask-out", mask_out, "output mask PNG");
  detect->add_option("--trace-out", trace_out, "per-iteration JSONL trace");
  detect->add_option("--summary-out", summary_out, "JSON summary file");
  detect->add_option("--keypoints-out", keypoints_out, "keypoint CSV (upscaled coordinates)");
  detect->add_option("--matches-out", matches_out, "match CSV (upscaled coordinates)");
  add_common(detect, detect_flags);

  CommonFlags eval_flags;
  std::string manifest_path, out_dir;
  unsigned workers = 0;
  auto* eval = app.add_subcommand("eval", "evaluate a dataset manifest");
  eval->add_option("manifest", manifest_path, "JSON manifest")->required();
  eval->add_option("--out-dir", out_dir, "report directory")->required();
  eval->add_option("--workers", workers, "worker threads (0 = hardware concurrency)");
  add_common(eval, eval_flags);

  std::string coverage_image;
  std::vector<int> scales{1, 2, 4};
  int window = 16, min_count = 4;
  auto* coverage = app.add_subcommand("coverage", "keypoint coverage rate per upsampling factor");
  coverage->add_option("image", coverage_image, "input image")->required();
  coverage->add_option("--scales", scales, "upsampling factors")->delimiter(',');
  coverage->add_option("--window", window, "window side in original pixels");
  coverage->add_option("--min-count", min_count, "keypoints required per window");

  SynthFlags synth_flags;
  auto* synth = app.add_subcommand("synth", "generate a synthetic forgery or base image");
  synth->add_option("--kind", synth_flags.kind, "texture or facade");
  synth->add_option("--source", synth_flags.source, "base image instead of a generated one");
  synth->add_option("--width", synth_flags.width);
  synth->add_option("--height", synth_flags.height);
  synth->add_option("--seed", synth_flags.seed);
  synth->add_option("--patch", synth_flags.patch, "x,y,w,h")->delimiter(',');
  synth->add_option("--dx", synth_flags.dx, "per-copy x offsets")->delimiter(',');
  synth->add_option("--dy", synth_flags.dy, "per-copy y offsets")->delimiter(',');
  synth->add_option("--angle", synth_flags.angle, "per-copy rotation, degrees")->delimiter(',');
  synth->add_option("--scale", synth_flags.scale, "per-copy scale")->delimiter(',');
  synth->add_option("--noise", synth_flags.noise, "Gaussian noise sigma");
  synth->add_option("--brightness", synth_flags.brightness, "brightness delta");
  synth->add_option("--out", synth_flags.image_out, "output image")->required();
  synth->add_option("--mask-out", synth_flags.mask_out, "output ground-truth mask");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*detect) {
      return cmd_detect(detect_image, detect_flags, mask_out, trace_out, summary_out,
                        keypoints_out, matches_out);
    }
    if (*eval) return cmd_eval(manifest_path, out_dir, eval_flags, workers);
    if (*coverage) return cmd_coverage(coverage_image, scales, window, min_count);
    if (*synth) return cmd_synth(synth_flags);
  } catch (const cmfd::IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const cmfd::FormatError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const cmfd::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const cmfd::SpecError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const cmfd::PreconditionError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const cmfd::InputTooSmallError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitUsage;
}
