#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cmfd/geometry.hpp"
#include "cmfd/imaging.hpp"
#include "cmfd/keypoints.hpp"
#include "cmfd/localization.hpp"
#include "cmfd/matching.hpp"

namespace cmfd {

/// Every tunable of the detector.
struct PipelineConfig {
  SiftParams sift;
  MatchOptions match;
  RansacParams ransac;
  LocalizationParams localization;
  int min_pixels = 1;
  std::uint64_t rng_seed = 0;
  int scale_override = 0;  // 0 selects the factor from the image size
  std::size_t max_pixels = kDefaultMaxPixels;

  void validate() const;
};

/// Overlays the keys of a flat JSON object onto `config`. Unknown keys and
/// ill-typed values throw ConfigError; the result is validated.
void apply_config_json(PipelineConfig& config, const std::string& json_text);
PipelineConfig load_config(const std::filesystem::path& path);
/// Flat JSON document holding every key accepted by apply_config_json.
std::string config_to_json(const PipelineConfig& config);

/// Comma-separated subset of {gray, entropy, lexicographic}; listed stages
/// are disabled. Throws ConfigError on unknown names.
MatchStages parse_ablation(const std::string& list);

struct DetectionResult {
  TamperMask mask;
  bool decision = false;
  int scale = 1;
  std::size_t n_keypoints = 0;
  std::size_t n_matches = 0;
  std::size_t accepted_models = 0;
  std::vector<IterationTrace> traces;
  MatchStats match_stats;
  double runtime_ms = 0.0;
};

/// Optional intermediate outputs, in upscaled coordinates.
struct DetectionArtifacts {
  KeypointSet keypoints;
  MatchSet matches;
};

DetectionResult run_detection(const RasterImage& image,
                              const PipelineConfig& config,
                              DetectionArtifacts* artifacts = nullptr);

/// {"schema":1, decision, n_keypoints, n_matches, iterations,
/// accepted_models, runtime_ms}, pretty-printed.
std::string summary_json(const DetectionResult& result);

}  // namespace cmfd
