#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cmfd/localization.hpp"
#include "cmfd/pipeline.hpp"

namespace cmfd {

struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;

  std::uint64_t total() const { return tp + fp + fn + tn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
  bool operator==(const ConfusionCounts&) const = default;
};

enum class MetricLevel { image, pixel };

/// Ratios with a zero denominator are absent.
struct MetricsReport {
  std::optional<double> tpr;
  std::optional<double> fpr;
  std::optional<double> f1;
  MetricLevel level = MetricLevel::pixel;
};

MetricsReport compute_metrics(const ConfusionCounts& c, MetricLevel level);
std::optional<double> f1_score(const ConfusionCounts& c);

/// Throws ShapeError when the masks differ in size.
ConfusionCounts pixel_confusion(const TamperMask& predicted,
                                const TamperMask& truth);

/// True iff at least min_pixels pixels are marked. min_pixels must be >= 1.
bool image_level_decision(const TamperMask& mask, std::size_t min_pixels = 1);

struct FScores {
  std::optional<double> f_p;        // F1 of the summed counts
  std::optional<double> f_measure;  // mean of the defined per-image F1
};

/// Throws EmptyInputError for an empty list.
FScores aggregate_f_scores(std::span<const ConfusionCounts> per_image);

struct ManifestEntry {
  std::filesystem::path image_path;
  std::optional<std::filesystem::path> mask_path;
  bool is_tampered = false;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
};

/// JSON array of {image_path, ground_truth_mask_path?, is_tampered}.
/// Relative paths resolve against base_dir. Throws FormatError on malformed
/// documents and SpecError when mask presence contradicts is_tampered.
DatasetManifest parse_manifest(const std::string& json_text,
                               const std::filesystem::path& base_dir = {});
DatasetManifest load_manifest(const std::filesystem::path& path);

struct DatasetRow {
  std::filesystem::path image_path;
  bool is_tampered = false;
  bool decision = false;
  std::optional<ConfusionCounts> confusion;  // tampered entries only
  std::optional<double> f1;
  double runtime_ms = 0.0;
  std::string error;  // non-empty when the entry failed
};

struct DatasetReport {
  std::vector<DatasetRow> rows;  // manifest order
  ConfusionCounts image_confusion;
  ConfusionCounts pixel_confusion;  // summed over processed tampered entries
  MetricsReport image_metrics;
  MetricsReport pixel_metrics;
  std::optional<double> f_i;
  std::optional<double> f_p;
  std::optional<double> f_measure;
  std::size_t errors = 0;
  std::string config_json;
};

/// Runs the detector on every entry with up to `workers` threads (0 picks
/// the hardware concurrency). Failures are recorded per row.
DatasetReport run_dataset(const DatasetManifest& manifest,
                          const PipelineConfig& config,
                          unsigned workers = 0);

/// image_path,is_tampered,decision,tp,fp,fn,tn,f1,runtime_ms,error
void write_report_csv(const std::filesystem::path& path,
                      const DatasetReport& report);
/// Aggregates plus the configuration used.
void write_report_json(const std::filesystem::path& path,
                       const DatasetReport& report);

}  // namespace cmfd
