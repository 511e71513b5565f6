#include <gtest/gtest.h>

#include <fstream>
#include <queue>

#include "cmfd/error.hpp"
#include "cmfd/eval.hpp"
#include "cmfd/synthetic.hpp"
#include "support.hpp"

using namespace cmfd;
using cmfd::test::rect_mask;

namespace {

int connected_components(const TamperMask& m) {
  std::vector<int> label(m.bits.size(), 0);
  int count = 0;
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * m.width + x;
      if (!m.bits[i] || label[i]) continue;
      ++count;
      std::queue<std::pair<int, int>> q;
      q.push({x, y});
      label[i] = count;
      while (!q.empty()) {
        auto [cx, cy] = q.front();
        q.pop();
        for (auto [dx, dy] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) {
          const int nx = cx + dx, ny = cy + dy;
          if (!m.contains(nx, ny)) continue;
          const std::size_t j = static_cast<std::size_t>(ny) * m.width + nx;
          if (m.bits[j] && !label[j]) {
            label[j] = count;
            q.push({nx, ny});
          }
        }
      }
    }
  }
  return count;
}

void write(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

}  // namespace

TEST(PixelConfusion, Identical) {
  const TamperMask all = rect_mask(10, 10, 0, 0, 10, 10);
  const ConfusionCounts c = pixel_confusion(all, all);
  EXPECT_EQ(c, (ConfusionCounts{100, 0, 0, 0}));
}

TEST(PixelConfusion, AllMissed) {
  const ConfusionCounts c = pixel_confusion(TamperMask(10, 10), rect_mask(10, 10, 0, 0, 10, 10));
  EXPECT_EQ(c, (ConfusionCounts{0, 0, 100, 0}));
}

TEST(PixelConfusion, ShapeMismatch) {
  EXPECT_THROW(pixel_confusion(TamperMask(10, 10), TamperMask(10, 11)), ShapeError);
}

TEST(PixelConfusion, SumsToPixelCount) {
  std::mt19937 rng(2);
  for (int t = 0; t < 20; ++t) {
    TamperMask a(17, 13), b(17, 13);
    for (auto& v : a.bits) v = rng() & 1;
    for (auto& v : b.bits) v = rng() & 1;
    EXPECT_EQ(pixel_confusion(a, b).total(), 17u * 13u);
  }
}

TEST(Metrics, Substitution) {
  const MetricsReport m = compute_metrics({80, 10, 20, 90}, MetricLevel::pixel);
  EXPECT_DOUBLE_EQ(*m.tpr, 0.8);
  EXPECT_DOUBLE_EQ(*m.fpr, 0.1);
  EXPECT_DOUBLE_EQ(*m.f1, 160.0 / 190.0);
  EXPECT_NEAR(*m.f1, 0.8421, 1e-4);
}

TEST(Metrics, UndefinedRatiosAreAbsent) {
  const MetricsReport m = compute_metrics({0, 0, 0, 50}, MetricLevel::image);
  EXPECT_FALSE(m.tpr.has_value());
  EXPECT_TRUE(m.fpr.has_value());
  EXPECT_FALSE(m.f1.has_value());
}

TEST(ImageDecision, Examples) {
  EXPECT_FALSE(image_level_decision(TamperMask(8, 8)));
  TamperMask one(8, 8);
  one.set(3, 3);
  EXPECT_TRUE(image_level_decision(one, 1));
  EXPECT_FALSE(image_level_decision(rect_mask(8, 8, 0, 0, 5, 1), 10));
  EXPECT_THROW(image_level_decision(one, 0), PreconditionError);
}

TEST(AggregateF, Homogeneous) {
  const std::vector<ConfusionCounts> c{{40, 10, 10, 0}, {40, 10, 10, 0}};
  const FScores f = aggregate_f_scores(c);
  EXPECT_DOUBLE_EQ(*f.f_p, 0.8);
  EXPECT_DOUBLE_EQ(*f.f_measure, 0.8);
}

TEST(AggregateF, PerfectAndMissed) {
  const std::vector<ConfusionCounts> c{{100, 0, 0, 0}, {0, 0, 100, 0}};
  const FScores f = aggregate_f_scores(c);
  EXPECT_DOUBLE_EQ(*f.f_p, 200.0 / 300.0);
  EXPECT_DOUBLE_EQ(*f.f_measure, 0.5);
}

TEST(AggregateF, SingletonAndSkipping) {
  const std::vector<ConfusionCounts> one{{30, 5, 7, 100}};
  const FScores f = aggregate_f_scores(one);
  EXPECT_DOUBLE_EQ(*f.f_p, *f.f_measure);
  EXPECT_DOUBLE_EQ(*f.f_measure, *f1_score(one[0]));
  // Undefined per-image F1 is skipped, not averaged in as 0.
  const std::vector<ConfusionCounts> mixed{{30, 5, 7, 100}, {0, 0, 0, 200}};
  EXPECT_DOUBLE_EQ(*aggregate_f_scores(mixed).f_measure, *f1_score(one[0]));
  EXPECT_THROW(aggregate_f_scores(std::vector<ConfusionCounts>{}), EmptyInputError);
}

TEST(GenerateForgery, TranslationFootprint) {
  const RasterImage src = synthetic_texture(256, 160, 4);
  SyntheticForgerySpec spec;
  spec.patch = {20, 30, 64, 64};
  spec.copies = {{100, 0, 0, 1}};
  const auto f = generate_forgery(src, spec, 0);
  for (int y = 0; y < src.height; ++y) {
    for (int x = 0; x < src.width; ++x) {
      const bool in_paste = x >= 120 && x < 184 && y >= 30 && y < 94;
      bool differs = false;
      for (int c = 0; c < 3; ++c) differs |= f.image.at(x, y, c) != src.at(x, y, c);
      if (!in_paste) EXPECT_FALSE(differs) << x << "," << y;
      if (in_paste) EXPECT_EQ(f.image.at(x, y, 0), src.at(x - 100, y, 0));
      const bool in_src = x >= 20 && x < 84 && y >= 30 && y < 94;
      EXPECT_EQ(f.mask.at(x, y), in_paste || in_src);
    }
  }
}

TEST(GenerateForgery, RotationConservesArea) {
  const RasterImage src = synthetic_texture(300, 300, 5);
  SyntheticForgerySpec spec;
  spec.patch = {20, 20, 80, 80};
  spec.copies = {{150, 150, 90, 1}};
  const auto f = generate_forgery(src, spec, 0);
  const double pasted = static_cast<double>(f.mask.count()) - 80.0 * 80.0;
  EXPECT_NEAR(pasted / (80.0 * 80.0), 1.0, 0.02);
}

TEST(GenerateForgery, RotatedFootprintAreaWithinTolerance) {
  const RasterImage src = synthetic_texture(300, 300, 6);
  for (double angle : {10.0, 30.0, 50.0}) {
    SyntheticForgerySpec spec;
    spec.patch = {20, 20, 80, 80};
    spec.copies = {{150, 150, angle, 1}};
    const auto f = generate_forgery(src, spec, 0);
    const double pasted = static_cast<double>(f.mask.count()) - 80.0 * 80.0;
    EXPECT_NEAR(pasted / (80.0 * 80.0), 1.0, 0.02) << angle;
  }
}

TEST(GenerateForgery, TwoCopiesGiveThreeRegions) {
  const RasterImage src = synthetic_texture(300, 300, 7);
  SyntheticForgerySpec spec;
  spec.patch = {10, 10, 60, 60};
  spec.copies = {{150, 0, 0, 1}, {0, 150, 0, 1}};
  const auto f = generate_forgery(src, spec, 0);
  EXPECT_EQ(connected_components(f.mask), 3);
  EXPECT_GE(f.mask.count(), 60u * 60u);
}

TEST(GenerateForgery, OutOfBounds) {
  const RasterImage src = synthetic_texture(100, 100, 8);
  SyntheticForgerySpec spec;
  spec.patch = {10, 10, 40, 40};
  spec.copies = {{60, 0, 0, 1}};
  EXPECT_THROW(generate_forgery(src, spec, 0), SpecError);
  spec.copies = {{20, 20, 0, 3.0}};
  EXPECT_THROW(generate_forgery(src, spec, 0), SpecError);
  spec.copies.clear();
  EXPECT_THROW(generate_forgery(src, spec, 0), SpecError);
  spec.copies = {{10, 0, 0, 1}};
  spec.patch = {80, 80, 40, 40};
  EXPECT_THROW(generate_forgery(src, spec, 0), SpecError);
}

TEST(GenerateForgery, PostProcessingIsSeeded) {
  const RasterImage src = synthetic_texture(120, 120, 9);
  SyntheticForgerySpec spec;
  spec.patch = {10, 10, 30, 30};
  spec.copies = {{50, 50, 0, 1}};
  PostProcess p;
  p.noise_sigma = 3;
  p.brightness = 10;
  p.contrast = std::pair{20, 230};
  p.color_levels = 64;
  spec.post_process = p;
  const auto a = generate_forgery(src, spec, 1);
  const auto b = generate_forgery(src, spec, 1);
  const auto c = generate_forgery(src, spec, 2);
  EXPECT_EQ(a.image.data, b.image.data);
  EXPECT_NE(a.image.data, c.image.data);
  EXPECT_EQ(a.mask.bits, c.mask.bits);
}

TEST(Facade, DeterministicPerSeed) {
  const RasterImage a = synthetic_facade(256, 240, 9);
  const RasterImage b = synthetic_facade(256, 240, 9);
  const RasterImage c = synthetic_facade(256, 240, 10);
  EXPECT_EQ(a.width, 256);
  EXPECT_EQ(a.height, 240);
  EXPECT_EQ(a.channels, 3);
  EXPECT_EQ(a.data, b.data);
  EXPECT_NE(a.data, c.data);
}

TEST(Facade, TooSmall) {
  EXPECT_THROW(synthetic_facade(40, 300, 1), PreconditionError);
}

TEST(Manifest, ParseAndValidate) {
  const DatasetManifest m = parse_manifest(
      R"([{"image_path":"a.png","ground_truth_mask_path":"am.png","is_tampered":true},
          {"image_path":"/abs/b.png","is_tampered":false}])",
      "/base");
  ASSERT_EQ(m.entries.size(), 2u);
  EXPECT_EQ(m.entries[0].image_path, std::filesystem::path("/base/a.png"));
  EXPECT_EQ(*m.entries[0].mask_path, std::filesystem::path("/base/am.png"));
  EXPECT_EQ(m.entries[1].image_path, std::filesystem::path("/abs/b.png"));
  EXPECT_FALSE(m.entries[1].mask_path.has_value());

  EXPECT_THROW(parse_manifest(R"([{"image_path":"a.png","is_tampered":true}])"), SpecError);
  EXPECT_THROW(parse_manifest(
                   R"([{"image_path":"a.png","ground_truth_mask_path":"m","is_tampered":false}])"),
               SpecError);
  EXPECT_THROW(parse_manifest("{}"), FormatError);
  EXPECT_THROW(parse_manifest("[{\"image_path\":1,\"is_tampered\":false}]"), FormatError);
  EXPECT_THROW(parse_manifest("not json"), FormatError);
  EXPECT_TRUE(parse_manifest("[]").entries.empty());
}

TEST(RunDataset, EmptyManifest) {
  const DatasetReport r = run_dataset(DatasetManifest{}, PipelineConfig{}, 1);
  EXPECT_TRUE(r.rows.empty());
  EXPECT_EQ(r.errors, 0u);
  EXPECT_FALSE(r.f_i.has_value());
}

TEST(RunDataset, SyntheticFixtures) {
  cmfd::test::TempDir dir("dataset");
  std::string json = "[";
  for (int i = 0; i < 2; ++i) {
    const RasterImage base = synthetic_texture(160, 160, 300 + i);
    SyntheticForgerySpec spec;
    spec.patch = {12, 14, 56, 56};
    spec.copies = {{80, 76, 0, 1}};
    const auto f = generate_forgery(base, spec, 0);
    const std::string img = "f" + std::to_string(i) + ".png";
    const std::string mask = "m" + std::to_string(i) + ".png";
    save_image(dir / img, f.image);
    save_mask(dir / mask, f.mask);
    json += R"({"image_path":")" + img + R"(","ground_truth_mask_path":")" + mask +
            R"(","is_tampered":true},)";
    const std::string auth = "a" + std::to_string(i) + ".png";
    save_image(dir / auth, synthetic_texture(160, 160, 400 + i));
    json += R"({"image_path":")" + auth + R"(","is_tampered":false},)";
  }
  json += R"({"image_path":"missing.png","is_tampered":false}])";
  write(dir / "manifest.json", json);

  const DatasetManifest manifest = load_manifest(dir / "manifest.json");
  const PipelineConfig config;
  const DatasetReport r = run_dataset(manifest, config, 2);
  ASSERT_EQ(r.rows.size(), 5u);
  EXPECT_EQ(r.errors, 1u);
  EXPECT_FALSE(r.rows[4].error.empty());
  EXPECT_DOUBLE_EQ(*r.image_metrics.tpr, 1.0);
  EXPECT_DOUBLE_EQ(*r.image_metrics.fpr, 0.0);

  ConfusionCounts sum;
  for (const auto& row : r.rows) {
    if (row.confusion) sum += *row.confusion;
  }
  EXPECT_EQ(sum, r.pixel_confusion);

  // Rows follow manifest order and the report is reproducible.
  EXPECT_EQ(r.rows[0].image_path.filename(), "f0.png");
  const DatasetReport again = run_dataset(manifest, config, 1);
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    EXPECT_EQ(r.rows[i].decision, again.rows[i].decision);
    EXPECT_EQ(r.rows[i].confusion, again.rows[i].confusion);
  }

  write_report_csv(dir / "r.csv", r);
  write_report_json(dir / "r.json", r);
  std::ifstream csv(dir / "r.csv");
  std::string line;
  int lines = 0;
  while (std::getline(csv, line)) ++lines;
  EXPECT_EQ(lines, 6);
}
