#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "cmfd/geometry.hpp"
#include "cmfd/imaging.hpp"
#include "cmfd/keypoints.hpp"
#include "cmfd/matching.hpp"
#include "cmfd/synthetic.hpp"

using namespace cmfd;

namespace {

GrayImage texture_gray(int side, int s) {
  return upscale(to_gray(synthetic_texture(side, side, 7)), s);
}

// Keypoints of a small forged texture at the pipeline's x4 upscale.
struct MatchFixture {
  GrayImage gray;
  EntropyMap emap;
  KeypointSet kps;
};

const MatchFixture& match_fixture() {
  static const MatchFixture f = [] {
    SyntheticForgerySpec spec;
    spec.patch = {10, 10, 48, 48};
    spec.copies = {{90, 80, 0, 1}};
    MatchFixture m;
    m.gray = upscale(to_gray(generate_forgery(synthetic_texture(160, 160, 3), spec, 0).image), 4);
    m.emap = entropy_map(m.gray);
    m.kps = detect_keypoints(m.gray);
    return m;
  }();
  return f;
}

void BM_EntropyMap(benchmark::State& state) {
  const GrayImage g = texture_gray(static_cast<int>(state.range(0)), 4);
  for (auto _ : state) benchmark::DoNotOptimize(entropy_map(g));
  state.SetItemsProcessed(state.iterations() * g.width * g.height);
}
BENCHMARK(BM_EntropyMap)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_Upscale(benchmark::State& state) {
  const GrayImage g = to_gray(synthetic_texture(static_cast<int>(state.range(0)),
                                                static_cast<int>(state.range(0)), 7));
  for (auto _ : state) benchmark::DoNotOptimize(upscale(g, 4));
}
BENCHMARK(BM_Upscale)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_DetectKeypoints(benchmark::State& state) {
  const GrayImage g = texture_gray(static_cast<int>(state.range(0)), 4);
  std::size_t n = 0;
  for (auto _ : state) {
    const auto kps = detect_keypoints(g);
    n = kps.size();
    benchmark::DoNotOptimize(kps);
  }
  state.counters["keypoints"] = static_cast<double>(n);
}
BENCHMARK(BM_DetectKeypoints)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void run_matching(benchmark::State& state, MatchStages stages) {
  const MatchFixture& f = match_fixture();
  MatchOptions o;
  o.stages = stages;
  MatchStats stats;
  for (auto _ : state) {
    stats = {};
    benchmark::DoNotOptimize(match_pipeline(f.kps, f.gray, f.emap, o, &stats));
  }
  state.counters["keypoints"] = static_cast<double>(f.kps.size());
  state.counters["comparisons"] = static_cast<double>(stats.comparisons);
}

void BM_MatchGrouped(benchmark::State& state) { run_matching(state, {true, true, true}); }
BENCHMARK(BM_MatchGrouped)->Unit(benchmark::kMillisecond);

void BM_MatchGrayEntropy(benchmark::State& state) { run_matching(state, {true, true, false}); }
BENCHMARK(BM_MatchGrayEntropy)->Unit(benchmark::kMillisecond);

void BM_MatchBruteForce(benchmark::State& state) { run_matching(state, {false, false, false}); }
BENCHMARK(BM_MatchBruteForce)->Unit(benchmark::kMillisecond);

void BM_Ransac(benchmark::State& state) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 500.0);
  const Homography h = Homography::similarity(25, 1.1, 40, -30);
  std::vector<Correspondence> corr;
  for (int i = 0; i < state.range(0); ++i) {
    const Point2 p{u(rng), u(rng)};
    corr.push_back({p, i % 5 == 4 ? Point2{u(rng), u(rng)} : h.apply(p)});
  }
  for (auto _ : state) benchmark::DoNotOptimize(ransac_homography(corr, RansacParams{}, 3));
}
BENCHMARK(BM_Ransac)->Arg(25)->Arg(200)->Arg(2000);

}  // namespace

BENCHMARK_MAIN();
