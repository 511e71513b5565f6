#include "cmfd/pipeline.hpp"

#include <chrono>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "cmfd/error.hpp"
#include "cmfd/eval.hpp"
#include "json.hpp"

namespace cmfd {

namespace {

using nlohmann::json;

template <typename T>
T read_value(const json& v, const std::string& key) {
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(key + ": expected a boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError(key + ": expected an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0) {
          throw ConfigError(key + ": expected a non-negative integer");
        }
      }
    } else {
      if (!v.is_number()) throw ConfigError(key + ": expected a number");
    }
    return v.get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

using Setter = std::function<void(PipelineConfig&, const json&, const std::string&)>;
using Getter = std::function<json(const PipelineConfig&)>;

struct Field {
  Setter set;
  Getter get;
};

template <typename T, typename Access>
Field field(Access access) {
  return {[access](PipelineConfig& c, const json& v, const std::string& key) {
            access(c) = read_value<T>(v, key);
          },
          [access](const PipelineConfig& c) {
            return json(access(const_cast<PipelineConfig&>(c)));
          }};
}

#define CMFD_FIELD(T, expr) field<T>([](PipelineConfig& c) -> T& { return expr; })

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = {
      {"contrast_threshold", CMFD_FIELD(double, c.sift.contrast_threshold)},
      {"edge_threshold", CMFD_FIELD(double, c.sift.edge_threshold)},
      {"step1", CMFD_FIELD(double, c.match.cluster.step1)},
      {"step2", CMFD_FIELD(double, c.match.cluster.step2)},
      {"step3", CMFD_FIELD(double, c.match.cluster.step3)},
      {"step4", CMFD_FIELD(double, c.match.cluster.step4)},
      {"step5", CMFD_FIELD(int, c.match.group.step5)},
      {"beta", CMFD_FIELD(double, c.match.group.beta)},
      {"t_match", CMFD_FIELD(double, c.match.t_match)},
      {"min_spatial", CMFD_FIELD(double, c.match.min_spatial)},
      {"use_gray_clusters", CMFD_FIELD(bool, c.match.stages.gray)},
      {"use_entropy_clusters", CMFD_FIELD(bool, c.match.stages.entropy)},
      {"use_lexicographic_groups", CMFD_FIELD(bool, c.match.stages.lexicographic)},
      {"t_in", CMFD_FIELD(double, c.ransac.t_in)},
      {"ransac_max_iters", CMFD_FIELD(int, c.ransac.max_iters)},
      {"confidence", CMFD_FIELD(double, c.ransac.confidence)},
      {"theta_tol", CMFD_FIELD(double, c.ransac.theta_tol)},
      {"r_sam", CMFD_FIELD(double, c.localization.r_sam)},
      {"n_in", CMFD_FIELD(int, c.localization.n_in)},
      {"region_gamma", CMFD_FIELD(double, c.localization.region_gamma)},
      {"max_iters", CMFD_FIELD(int, c.localization.max_iters)},
      {"refine_rounds", CMFD_FIELD(int, c.localization.refine_rounds)},
      {"morphology", CMFD_FIELD(bool, c.localization.morphology)},
      {"morph_radius", CMFD_FIELD(int, c.localization.morph_radius)},
      {"min_pixels", CMFD_FIELD(int, c.min_pixels)},
      {"rng_seed", CMFD_FIELD(std::uint64_t, c.rng_seed)},
      {"scale_override", CMFD_FIELD(int, c.scale_override)},
      {"max_pixels", CMFD_FIELD(std::size_t, c.max_pixels)},
  };
  return table;
}

#undef CMFD_FIELD

}  // namespace

void PipelineConfig::validate() const {
  if (!(sift.contrast_threshold >= 0.0)) {
    throw ConfigError("contrast_threshold must be non-negative");
  }
  if (!(sift.edge_threshold > 0.0)) throw ConfigError("edge_threshold must be positive");
  try {
    match.validate();
    ransac.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  localization.validate();
  if (min_pixels < 1) throw ConfigError("min_pixels must be at least 1");
  if (scale_override < 0 || scale_override > 8) {
    throw ConfigError("scale_override must lie in [0, 8]");
  }
  if (max_pixels == 0) throw ConfigError("max_pixels must be positive");
}

void apply_config_json(PipelineConfig& config, const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  PipelineConfig next = config;
  for (const auto& [key, value] : doc.items()) {
    const auto it = fields().find(key);
    if (it == fields().end()) throw ConfigError("unknown config key: " + key);
    it->second.set(next, value, key);
  }
  next.validate();
  config = next;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  PipelineConfig config;
  apply_config_json(config, buf.str());
  return config;
}

std::string config_to_json(const PipelineConfig& config) {
  json doc = json::object();
  for (const auto& [key, f] : fields()) doc[key] = f.get(config);
  return doc.dump(2);
}

MatchStages parse_ablation(const std::string& list) {
  MatchStages stages;
  std::stringstream in(list);
  std::string name;
  while (std::getline(in, name, ',')) {
    if (name.empty()) continue;
    if (name == "gray") {
      stages.gray = false;
    } else if (name == "entropy") {
      stages.entropy = false;
    } else if (name == "lexicographic" || name == "lg") {
      stages.lexicographic = false;
    } else {
      throw ConfigError("unknown ablation stage: " + name);
    }
  }
  return stages;
}

DetectionResult run_detection(const RasterImage& image,
                              const PipelineConfig& config,
                              DetectionArtifacts* artifacts) {
  const auto start = std::chrono::steady_clock::now();
  config.validate();

  const GrayImage original = to_gray(image);
  DetectionResult result;
  result.scale = config.scale_override > 0
                     ? config.scale_override
                     : scaling_factor(original.height, original.width);
  const GrayImage gray = resize_bicubic(original, result.scale, config.max_pixels);

  KeypointSet kps = detect_keypoints(gray, config.sift);
  const EntropyMap emap = entropy_map(gray);
  MatchSet matches = match_pipeline(kps, gray, emap, config.match, &result.match_stats);

  LocalizationResult loc =
      localize(matches, kps, gray, config.ransac, config.localization,
               result.scale, original.width, original.height, config.rng_seed);

  result.n_keypoints = kps.size();
  result.n_matches = matches.size();
  result.accepted_models = loc.accepted_models;
  result.traces = std::move(loc.traces);
  result.mask = std::move(loc.mask);
  result.decision =
      image_level_decision(result.mask, static_cast<std::size_t>(config.min_pixels));
  if (artifacts) {
    artifacts->keypoints = std::move(kps);
    artifacts->matches = std::move(matches);
  }
  result.runtime_ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - start)
                          .count();
  return result;
}

std::string summary_json(const DetectionResult& result) {
  json doc;
  doc["schema"] = 1;
  doc["decision"] = result.decision;
  doc["n_keypoints"] = result.n_keypoints;
  doc["n_matches"] = result.n_matches;
  doc["iterations"] = result.traces.size();
  doc["accepted_models"] = result.accepted_models;
  doc["runtime_ms"] = std::llround(result.runtime_ms);
  return doc.dump(2);
}

}  // namespace cmfd
