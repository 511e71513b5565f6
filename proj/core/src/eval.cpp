#include "cmfd/eval.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

#include "cmfd/error.hpp"
#include "json.hpp"

namespace cmfd {

namespace {

using nlohmann::json;

std::optional<double> ratio(std::uint64_t num, std::uint64_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

json optional_json(const std::optional<double>& v) {
  return v ? json(*v) : json(nullptr);
}

json metrics_json(const MetricsReport& m) {
  return {{"level", m.level == MetricLevel::image ? "image" : "pixel"},
          {"tpr", optional_json(m.tpr)},
          {"fpr", optional_json(m.fpr)},
          {"f1", optional_json(m.f1)}};
}

json confusion_json(const ConfusionCounts& c) {
  return {{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"tn", c.tn}};
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + '"';
}

DatasetRow process_entry(const ManifestEntry& entry, const PipelineConfig& config) {
  DatasetRow row;
  row.image_path = entry.image_path;
  row.is_tampered = entry.is_tampered;
  try {
    const RasterImage image = load_image(entry.image_path);
    const DetectionResult det = run_detection(image, config);
    row.decision = det.decision;
    row.runtime_ms = det.runtime_ms;
    if (entry.is_tampered) {
      const TamperMask truth = load_mask(*entry.mask_path);
      row.confusion = pixel_confusion(det.mask, truth);
      row.f1 = f1_score(*row.confusion);
    }
  } catch (const std::exception& e) {
    row.error = e.what();
    if (row.error.empty()) row.error = "unknown error";
  }
  return row;
}

}  // namespace

std::optional<double> f1_score(const ConfusionCounts& c) {
  return ratio(2 * c.tp, 2 * c.tp + c.fn + c.fp);
}

MetricsReport compute_metrics(const ConfusionCounts& c, MetricLevel level) {
  MetricsReport m;
  m.level = level;
  m.tpr = ratio(c.tp, c.tp + c.fn);
  m.fpr = ratio(c.fp, c.tn + c.fp);
  m.f1 = f1_score(c);
  return m;
}

ConfusionCounts pixel_confusion(const TamperMask& predicted,
                                const TamperMask& truth) {
  if (predicted.width != truth.width || predicted.height != truth.height) {
    throw ShapeError("mask sizes differ: " + std::to_string(predicted.width) + "x" +
                     std::to_string(predicted.height) + " vs " +
                     std::to_string(truth.width) + "x" + std::to_string(truth.height));
  }
  ConfusionCounts c;
  for (std::size_t i = 0; i < predicted.bits.size(); ++i) {
    const bool p = predicted.bits[i] != 0;
    const bool t = truth.bits[i] != 0;
    if (p && t) {
      ++c.tp;
    } else if (p) {
      ++c.fp;
    } else if (t) {
      ++c.fn;
    } else {
      ++c.tn;
    }
  }
  return c;
}

bool image_level_decision(const TamperMask& mask, std::size_t min_pixels) {
  if (min_pixels < 1) throw PreconditionError("min_pixels must be at least 1");
  return mask.count() >= min_pixels;
}

FScores aggregate_f_scores(std::span<const ConfusionCounts> per_image) {
  if (per_image.empty()) throw EmptyInputError("no images to aggregate");
  ConfusionCounts sum;
  double f1_sum = 0.0;
  std::size_t defined = 0;
  for (const auto& c : per_image) {
    sum += c;
    if (auto f = f1_score(c)) {
      f1_sum += *f;
      ++defined;
    }
  }
  FScores out;
  out.f_p = f1_score(sum);
  if (defined > 0) out.f_measure = f1_sum / static_cast<double>(defined);
  return out;
}

DatasetManifest parse_manifest(const std::string& json_text,
                               const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("manifest is not valid JSON: ") + e.what());
  }
  if (!doc.is_array()) throw FormatError("manifest must be a JSON array");

  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
  };

  DatasetManifest manifest;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& e = doc[i];
    const std::string where = "manifest entry " + std::to_string(i);
    if (!e.is_object()) throw FormatError(where + " is not an object");
    for (const auto& [key, value] : e.items()) {
      if (key != "image_path" && key != "ground_truth_mask_path" &&
          key != "is_tampered") {
        throw FormatError(where + ": unknown key " + key);
      }
    }
    if (!e.contains("image_path") || !e["image_path"].is_string()) {
      throw FormatError(where + ": image_path must be a string");
    }
    if (!e.contains("is_tampered") || !e["is_tampered"].is_boolean()) {
      throw FormatError(where + ": is_tampered must be a boolean");
    }
    ManifestEntry entry;
    entry.image_path = resolve(e["image_path"].get<std::string>());
    entry.is_tampered = e["is_tampered"].get<bool>();
    const bool has_mask =
        e.contains("ground_truth_mask_path") && !e["ground_truth_mask_path"].is_null();
    if (has_mask) {
      if (!e["ground_truth_mask_path"].is_string()) {
        throw FormatError(where + ": ground_truth_mask_path must be a string");
      }
      entry.mask_path = resolve(e["ground_truth_mask_path"].get<std::string>());
    }
    if (entry.is_tampered && !has_mask) {
      throw SpecError(where + ": tampered entry without a mask");
    }
    if (!entry.is_tampered && has_mask) {
      throw SpecError(where + ": authentic entry with a mask");
    }
    manifest.entries.push_back(std::move(entry));
  }
  return manifest;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_manifest(buf.str(), path.parent_path());
}

DatasetReport run_dataset(const DatasetManifest& manifest,
                          const PipelineConfig& config, unsigned workers) {
  config.validate();
  DatasetReport report;
  report.config_json = config_to_json(config);
  const std::size_t n = manifest.entries.size();
  report.rows.resize(n);

  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(n, 1)));

  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      report.rows[i] = process_entry(manifest.entries[i], config);
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
  }

  std::vector<ConfusionCounts> tampered;
  for (const auto& row : report.rows) {
    if (!row.error.empty()) {
      ++report.errors;
      continue;
    }
    auto& ic = report.image_confusion;
    if (row.is_tampered) {
      ++(row.decision ? ic.tp : ic.fn);
      report.pixel_confusion += *row.confusion;
      tampered.push_back(*row.confusion);
    } else {
      ++(row.decision ? ic.fp : ic.tn);
    }
  }
  report.image_metrics = compute_metrics(report.image_confusion, MetricLevel::image);
  report.pixel_metrics = compute_metrics(report.pixel_confusion, MetricLevel::pixel);
  report.f_i = report.image_metrics.f1;
  if (!tampered.empty()) {
    const FScores f = aggregate_f_scores(tampered);
    report.f_p = f.f_p;
    report.f_measure = f.f_measure;
  }
  return report;
}

void write_report_csv(const std::filesystem::path& path,
                      const DatasetReport& report) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string());
  out << "image_path,is_tampered,decision,tp,fp,fn,tn,f1,runtime_ms,error\n";
  out << std::setprecision(6);
  for (const auto& r : report.rows) {
    out << csv_escape(r.image_path.string()) << ',' << (r.is_tampered ? 1 : 0) << ','
        << (r.decision ? 1 : 0) << ',';
    if (r.confusion) {
      out << r.confusion->tp << ',' << r.confusion->fp << ',' << r.confusion->fn << ','
          << r.confusion->tn << ',';
    } else {
      out << ",,,,";
    }
    if (r.f1) out << *r.f1;
    out << ',' << std::llround(r.runtime_ms) << ',' << csv_escape(r.error) << '\n';
  }
}

void write_report_json(const std::filesystem::path& path,
                       const DatasetReport& report) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string());
  json doc;
  doc["schema"] = 1;
  doc["entries"] = report.rows.size();
  doc["errors"] = report.errors;
  doc["image_confusion"] = confusion_json(report.image_confusion);
  doc["pixel_confusion"] = confusion_json(report.pixel_confusion);
  doc["image"] = metrics_json(report.image_metrics);
  doc["pixel"] = metrics_json(report.pixel_metrics);
  doc["f_i"] = optional_json(report.f_i);
  doc["f_p"] = optional_json(report.f_p);
  doc["f_measure"] = optional_json(report.f_measure);
  doc["config"] = json::parse(report.config_json);
  out << doc.dump(2) << '\n';
}

}  // namespace cmfd
