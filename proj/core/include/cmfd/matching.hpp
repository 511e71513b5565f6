#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "cmfd/imaging.hpp"
#include "cmfd/keypoints.hpp"

namespace cmfd {

using IndexSet = std::vector<std::size_t>;

/// Overlapping gray-level and entropy clustering steps.
struct ClusterParams {
  double step1 = 40.0;  // gray window width
  double step2 = 10.0;  // gray overlap
  double step3 = 1.0;   // entropy window width (bits)
  double step4 = 0.0;   // entropy overlap (bits)
  static constexpr double kEntropyMax = 7.0;

  void validate() const;
};

/// Lexicographic grouping: window size and overlap factor.
struct GroupParams {
  int step5 = 500;
  double beta = 1.1;

  void validate() const;
};

struct KeypointGroup {
  IndexSet members;
};

/// A match between two keypoints stored in canonical orientation: the left
/// keypoint precedes the right one in (y, x) order, ties broken by index.
struct DirectedMatch {
  std::size_t left = 0;
  std::size_t right = 0;

  auto operator<=>(const DirectedMatch&) const = default;
};

struct MatchSet {
  std::vector<DirectedMatch> matches;

  std::size_t size() const { return matches.size(); }
  bool empty() const { return matches.empty(); }
};

/// Orders (a, b) canonically using the keypoint positions.
DirectedMatch canonical_match(std::size_t a, std::size_t b,
                              const KeypointSet& kps);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double v) const { return v >= lo && v <= hi; }
};

/// Closed gray ranges of the overlapping gray clustering, including the
/// appended top range when the regular ranges stop short of 255.
std::vector<Interval> gray_cluster_ranges(const ClusterParams& p);

/// Closed entropy ranges of the overlapping entropy clustering.
std::vector<Interval> entropy_cluster_ranges(const ClusterParams& p);

/// Keypoints by gray value at their rounded position.
std::vector<IndexSet> gray_clusters(const KeypointSet& kps,
                                    const GrayImage& gray,
                                    const ClusterParams& p);

/// Splits one cluster by local entropy at the rounded keypoint position.
std::vector<IndexSet> entropy_clusters(const IndexSet& cluster,
                                       const KeypointSet& kps,
                                       const EntropyMap& emap,
                                       const ClusterParams& p);

/// 1-based inclusive sorted-position windows for a cluster of n features.
std::vector<std::pair<std::size_t, std::size_t>> group_windows(
    std::size_t n, const GroupParams& p);

/// Sorts the cluster lexicographically by descriptor (components quantised
/// to 3 decimals) and cuts it into overlapping windows.
std::vector<KeypointGroup> lexicographic_groups(
    const IndexSet& cluster, std::span<const Descriptor> descriptors,
    const GroupParams& p);

/// Generalised 2NN test inside one group. For each member, neighbours
/// closer in space than min_spatial are skipped; the remaining neighbours
/// are accepted in distance order while d(j)/d(j+1) < t_match, stopping at
/// the first failure. When comparisons is non-null it is incremented by the
/// number of descriptor pairs evaluated.
std::vector<DirectedMatch> g2nn_match(const KeypointGroup& group,
                                      const KeypointSet& kps, double t_match,
                                      double min_spatial,
                                      std::uint64_t* comparisons = nullptr);

/// Union of per-group matches; canonical, duplicate-free, sorted.
MatchSet assemble_matches(
    std::span<const std::vector<DirectedMatch>> all_group_matches);

/// Stage toggles for ablation. A disabled stage passes its input through
/// as a single cluster or group; disabling all three is brute force.
struct MatchStages {
  bool gray = true;
  bool entropy = true;
  bool lexicographic = true;
};

struct MatchOptions {
  ClusterParams cluster;
  GroupParams group;
  double t_match = 0.5;
  double min_spatial = 10.0;
  MatchStages stages;

  void validate() const;
};

struct MatchStats {
  std::uint64_t comparisons = 0;
  std::size_t groups = 0;
  std::size_t largest_group = 0;
};

MatchSet match_pipeline(const KeypointSet& kps, const GrayImage& gray,
                        const EntropyMap& emap, const MatchOptions& options,
                        MatchStats* stats = nullptr);

/// left_x,left_y,right_x,right_y per row.
void write_matches_csv(const std::filesystem::path& path,
                       const MatchSet& matches, const KeypointSet& kps);

}  // namespace cmfd
