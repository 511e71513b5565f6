#include "cmfd/matching.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <string>

#include "cmfd/error.hpp"

namespace cmfd {

void ClusterParams::validate() const {
  if (!(step1 > step2 && step2 >= 0.0)) {
    throw ConfigError("cluster params: require step1 > step2 >= 0");
  }
  if (!(step3 > step4 && step4 >= 0.0)) {
    throw ConfigError("cluster params: require step3 > step4 >= 0");
  }
}

void GroupParams::validate() const {
  if (step5 < 1) throw ConfigError("group params: step5 must be >= 1");
  if (!(beta >= 1.0 && beta <= 2.0)) {
    throw ConfigError("group params: beta must lie in [1, 2]");
  }
}

void MatchOptions::validate() const {
  cluster.validate();
  group.validate();
  if (!(t_match > 0.0 && t_match < 1.0)) {
    throw ConfigError("t_match must lie in (0, 1)");
  }
  if (min_spatial < 0.0) throw ConfigError("min_spatial must be >= 0");
}

DirectedMatch canonical_match(std::size_t a, std::size_t b,
                              const KeypointSet& kps) {
  const Keypoint& ka = kps.keypoints[a];
  const Keypoint& kb = kps.keypoints[b];
  bool a_first;
  if (ka.y != kb.y) {
    a_first = ka.y < kb.y;
  } else if (ka.x != kb.x) {
    a_first = ka.x < kb.x;
  } else {
    a_first = a < b;
  }
  return a_first ? DirectedMatch{a, b} : DirectedMatch{b, a};
}

namespace {

std::size_t pixel_index(const Keypoint& kp, int width, int height) {
  const long x = std::clamp(std::lround(kp.x), 0L, static_cast<long>(width - 1));
  const long y = std::clamp(std::lround(kp.y), 0L, static_cast<long>(height - 1));
  return static_cast<std::size_t>(y) * width + static_cast<std::size_t>(x);
}

}  // namespace

std::vector<Interval> gray_cluster_ranges(const ClusterParams& p) {
  p.validate();
  const double stride = p.step1 - p.step2;
  const int n = std::max(1, static_cast<int>(std::ceil((255.0 - p.step1) / stride)));
  std::vector<Interval> ranges;
  ranges.reserve(static_cast<std::size_t>(n) + 1);
  for (int u = 1; u <= n; ++u) {
    const double lo = (u - 1) * stride;
    ranges.push_back({lo, std::min(lo + p.step1, 255.0)});
  }
  if (ranges.back().hi < 255.0) {
    ranges.push_back({std::max(0.0, 255.0 - p.step1), 255.0});
  }
  return ranges;
}

std::vector<Interval> entropy_cluster_ranges(const ClusterParams& p) {
  p.validate();
  constexpr double emax = ClusterParams::kEntropyMax;
  const int n = std::max(1, static_cast<int>(std::ceil((emax - p.step4) / p.step3)));
  std::vector<Interval> ranges;
  ranges.reserve(static_cast<std::size_t>(n));
  for (int v = 1; v <= n; ++v) {
    ranges.push_back({std::max(0.0, (v - 1) * p.step3 - p.step4),
                      std::min(emax, v * p.step3 + p.step4)});
  }
  return ranges;
}

std::vector<IndexSet> gray_clusters(const KeypointSet& kps,
                                    const GrayImage& gray,
                                    const ClusterParams& p) {
  const auto ranges = gray_cluster_ranges(p);
  std::vector<IndexSet> clusters(ranges.size());
  for (std::size_t i = 0; i < kps.size(); ++i) {
    const double g = gray.data[pixel_index(kps.keypoints[i], gray.width, gray.height)];
    for (std::size_t u = 0; u < ranges.size(); ++u) {
      if (ranges[u].contains(g)) clusters[u].push_back(i);
    }
  }
  return clusters;
}

std::vector<IndexSet> entropy_clusters(const IndexSet& cluster,
                                       const KeypointSet& kps,
                                       const EntropyMap& emap,
                                       const ClusterParams& p) {
  const auto ranges = entropy_cluster_ranges(p);
  std::vector<IndexSet> out(ranges.size());
  for (std::size_t i : cluster) {
    const double e = emap.data[pixel_index(kps.keypoints[i], emap.width, emap.height)];
    for (std::size_t v = 0; v < ranges.size(); ++v) {
      if (ranges[v].contains(e)) out[v].push_back(i);
    }
  }
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> group_windows(
    std::size_t n, const GroupParams& p) {
  p.validate();
  std::vector<std::pair<std::size_t, std::size_t>> windows;
  if (n == 0) return windows;
  const std::size_t count = (n + static_cast<std::size_t>(p.step5) - 1) /
                            static_cast<std::size_t>(p.step5);
  windows.reserve(count);
  for (std::size_t w = 1; w <= count; ++w) {
    const double lo_real = (static_cast<double>(w) - p.beta) * p.step5;
    const double hi_real = static_cast<double>(w) * p.step5;
    const auto lo = static_cast<std::size_t>(std::max(1.0, std::round(lo_real)));
    const auto hi = std::min(n, static_cast<std::size_t>(std::round(hi_real)));
    windows.emplace_back(lo, hi);
  }
  return windows;
}

std::vector<KeypointGroup> lexicographic_groups(
    const IndexSet& cluster, std::span<const Descriptor> descriptors,
    const GroupParams& p) {
  std::vector<KeypointGroup> groups;
  if (cluster.empty()) return groups;

  const std::size_t n = cluster.size();
  std::vector<std::int16_t> quant(n * kDescriptorSize);
  for (std::size_t i = 0; i < n; ++i) {
    const Descriptor& d = descriptors[cluster[i]];
    for (int k = 0; k < kDescriptorSize; ++k) {
      quant[i * kDescriptorSize + k] =
          static_cast<std::int16_t>(std::lround(d[k] * 1000.0f));
    }
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const std::int16_t* qa = &quant[a * kDescriptorSize];
    const std::int16_t* qb = &quant[b * kDescriptorSize];
    for (int k = 0; k < kDescriptorSize; ++k) {
      if (qa[k] != qb[k]) return qa[k] < qb[k];
    }
    return cluster[a] < cluster[b];
  });

  for (const auto& [lo, hi] : group_windows(n, p)) {
    KeypointGroup g;
    g.members.reserve(hi - lo + 1);
    for (std::size_t pos = lo; pos <= hi; ++pos) g.members.push_back(cluster[order[pos - 1]]);
    groups.push_back(std::move(g));
  }
  return groups;
}

namespace {

float descriptor_distance(const Descriptor& a, const Descriptor& b) {
  float acc = 0.0f;
  for (int k = 0; k < kDescriptorSize; ++k) {
    const float d = a[k] - b[k];
    acc += d * d;
  }
  return std::sqrt(acc);
}

}  // namespace

std::vector<DirectedMatch> g2nn_match(const KeypointGroup& group,
                                      const KeypointSet& kps, double t_match,
                                      double min_spatial,
                                      std::uint64_t* comparisons) {
  std::vector<DirectedMatch> out;
  const std::size_t g = group.members.size();
  if (g < 2) return out;

  // Small groups share one symmetric distance table; large ones (brute force
  // ablation) compute each row on demand.
  constexpr std::size_t kTableLimit = 2048;
  const bool use_table = g <= kTableLimit;
  std::vector<float> dist;
  if (use_table) {
    dist.assign(g * g, 0.0f);
    for (std::size_t i = 0; i < g; ++i) {
      const Descriptor& di = kps.descriptors[group.members[i]];
      for (std::size_t j = i + 1; j < g; ++j) {
        const float d = descriptor_distance(di, kps.descriptors[group.members[j]]);
        dist[i * g + j] = d;
        dist[j * g + i] = d;
      }
    }
  }
  if (comparisons) *comparisons += static_cast<std::uint64_t>(g) * (g - 1) / 2;

  const double min_sq = min_spatial * min_spatial;
  std::vector<std::pair<float, std::size_t>> cand;
  cand.reserve(g);
  for (std::size_t i = 0; i < g; ++i) {
    const Keypoint& ki = kps.keypoints[group.members[i]];
    const Descriptor& di = kps.descriptors[group.members[i]];
    cand.clear();
    for (std::size_t j = 0; j < g; ++j) {
      if (j == i) continue;
      const Keypoint& kj = kps.keypoints[group.members[j]];
      const double dx = ki.x - kj.x;
      const double dy = ki.y - kj.y;
      if (dx * dx + dy * dy < min_sq) continue;
      const float d = use_table
                          ? dist[i * g + j]
                          : descriptor_distance(di, kps.descriptors[group.members[j]]);
      cand.emplace_back(d, group.members[j]);
    }
    if (cand.size() < 2) continue;

    // Most points stop after one or two neighbours; sort lazily.
    std::size_t sorted = std::min<std::size_t>(cand.size(), 8);
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(sorted),
                      cand.end());
    for (std::size_t j = 0; j + 1 < cand.size(); ++j) {
      if (j + 1 >= sorted) {
        std::sort(cand.begin() + static_cast<std::ptrdiff_t>(sorted), cand.end());
        sorted = cand.size();
      }
      const float d0 = cand[j].first;
      const float d1 = cand[j + 1].first;
      const bool pass = d1 == 0.0f || static_cast<double>(d0) / d1 < t_match;
      if (!pass) break;
      out.push_back(canonical_match(group.members[i], cand[j].second, kps));
    }
  }
  return out;
}

MatchSet assemble_matches(
    std::span<const std::vector<DirectedMatch>> all_group_matches) {
  MatchSet set;
  std::size_t total = 0;
  for (const auto& v : all_group_matches) total += v.size();
  set.matches.reserve(total);
  for (const auto& v : all_group_matches) {
    set.matches.insert(set.matches.end(), v.begin(), v.end());
  }
  std::sort(set.matches.begin(), set.matches.end());
  set.matches.erase(std::unique(set.matches.begin(), set.matches.end()),
                    set.matches.end());
  return set;
}

MatchSet match_pipeline(const KeypointSet& kps, const GrayImage& gray,
                        const EntropyMap& emap, const MatchOptions& options,
                        MatchStats* stats) {
  options.validate();
  if (kps.keypoints.size() != kps.descriptors.size()) {
    throw PreconditionError("match_pipeline: keypoint/descriptor count mismatch");
  }
  MatchStats local;
  std::vector<std::vector<DirectedMatch>> per_group;
  if (kps.empty()) {
    if (stats) *stats = local;
    return {};
  }

  std::vector<IndexSet> level1;
  if (options.stages.gray) {
    level1 = gray_clusters(kps, gray, options.cluster);
  } else {
    IndexSet all(kps.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    level1.push_back(std::move(all));
  }

  for (const IndexSet& c1 : level1) {
    if (c1.size() < 2) continue;
    std::vector<IndexSet> level2;
    if (options.stages.entropy) {
      level2 = entropy_clusters(c1, kps, emap, options.cluster);
    } else {
      level2.push_back(c1);
    }
    for (const IndexSet& c2 : level2) {
      if (c2.size() < 2) continue;
      std::vector<KeypointGroup> groups;
      if (options.stages.lexicographic) {
        groups = lexicographic_groups(c2, kps.descriptors, options.group);
      } else {
        groups.push_back(KeypointGroup{c2});
      }
      for (const KeypointGroup& g : groups) {
        ++local.groups;
        local.largest_group = std::max(local.largest_group, g.members.size());
        auto m = g2nn_match(g, kps, options.t_match, options.min_spatial,
                            &local.comparisons);
        if (!m.empty()) per_group.push_back(std::move(m));
      }
    }
  }
  if (stats) *stats = local;
  return assemble_matches(per_group);
}

void write_matches_csv(const std::filesystem::path& path,
                       const MatchSet& matches, const KeypointSet& kps) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "left_x,left_y,right_x,right_y\n";
  char buf[160];
  for (const DirectedMatch& m : matches.matches) {
    const Keypoint& l = kps.keypoints[m.left];
    const Keypoint& r = kps.keypoints[m.right];
    std::snprintf(buf, sizeof buf, "%.4f,%.4f,%.4f,%.4f\n", l.x, l.y, r.x, r.y);
    out << buf;
  }
}

}  // namespace cmfd
