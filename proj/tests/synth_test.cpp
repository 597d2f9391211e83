#include "reefmap/synth.hpp"

#include <cstring>
#include <functional>
#include <set>

#include <gtest/gtest.h>

#include "reefmap/metrics.hpp"

namespace reefmap {
namespace {

SynthParams params(std::uint64_t seed, double extent = 20.0, double noise = 0.0) {
  SynthParams p;
  p.seed = seed;
  p.extent = extent;
  p.noise = noise;
  return p;
}

std::size_t argmax(const std::vector<double>& v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

TEST(Synth, NoiselessArgmaxIsTrueClass) {
  const auto s = synth_scene(params(1));
  for (const auto& [id, pts] : s.survey.sessions)
    for (const auto& p : pts) EXPECT_EQ(argmax(p.probs), s.truth_at(p.x, p.y));
}

TEST(Synth, SameSeedIsBitIdentical) {
  const auto a = synth_scene(params(7, 15.0, 0.1)), b = synth_scene(params(7, 15.0, 0.1));
  EXPECT_EQ(format_point_predictions(a.survey), format_point_predictions(b.survey));
  EXPECT_EQ(a.ground_truth.data, b.ground_truth.data);
  const auto c = synth_scene(params(8, 15.0, 0.1));
  EXPECT_NE(format_point_predictions(a.survey), format_point_predictions(c.survey));
}

TEST(Synth, SmallNoiseRarelyFlipsArgmax) {
  const auto s = synth_scene(params(3, 40.0, 0.05));
  std::size_t flips = 0, total = 0;
  for (const auto& [id, pts] : s.survey.sessions)
    for (const auto& p : pts) {
      flips += argmax(p.probs) != s.truth_at(p.x, p.y);
      ++total;
    }
  EXPECT_GE(total, 10000u);
  EXPECT_LE(static_cast<double>(flips) / static_cast<double>(total), 0.02);
}

TEST(Synth, TransectGeometry) {
  auto p = params(2, 10.0);
  p.transect_spacing = 0.7;
  p.point_step = 0.25;
  const auto s = synth_scene(p);
  ASSERT_EQ(s.survey.sessions.size(), 1u);
  const auto& pts = s.survey.sessions.at("synth");
  std::set<double> ys;
  for (const auto& q : pts) ys.insert(q.y);
  std::vector<double> lines(ys.begin(), ys.end());
  for (std::size_t i = 1; i < lines.size(); ++i) EXPECT_NEAR(lines[i] - lines[i - 1], 0.7, 1e-9);
  EXPECT_NEAR(median_consecutive_spacing(pts), 0.25, 1e-9);
  // Serpentine: the turn keeps x fixed.
  const auto per_line = pts.size() / lines.size();
  EXPECT_EQ(pts[per_line - 1].x, pts[per_line].x);
}

TEST(Synth, EveryClassIsRepresentedAndFeaturesAreLarge) {
  const auto s = synth_scene(params(5, 50.0));
  std::vector<int> seen(5, 0);
  for (auto c : s.seed_class) seen[c] = 1;
  for (int v : seen) EXPECT_EQ(v, 1);
  EXPECT_GE(s.min_seed_separation, 10.0 * s.params.point_step);
}

TEST(Synth, BadParameters) {
  for (auto mutate : std::vector<std::function<void(SynthParams&)>>{
           [](SynthParams& p) { p.extent = 0; }, [](SynthParams& p) { p.transect_spacing = -1; },
           [](SynthParams& p) { p.point_step = 0; }, [](SynthParams& p) { p.noise = -0.1; },
           [](SynthParams& p) { p.sessions = 0; }}) {
    auto p = params(1);
    mutate(p);
    try {
      synth_scene(p);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::BadParameters);
    }
  }
}

TEST(Pipeline, NoiselessSceneRecoversTruthAwayFromBoundaries) {
  const auto s = synth_scene(params(11, 30.0));
  const auto coarse = coarse_annotation(s.survey);
  ASSERT_EQ(coarse.labels.grid, s.ground_truth.grid);
  const auto& g = s.ground_truth.grid;
  std::size_t hit = 0, total = 0;
  for (std::int64_t row = 1; row + 1 < g.height; ++row)
    for (std::int64_t col = 1; col + 1 < g.width; ++col) {
      const auto t = s.ground_truth.at(col, row);
      bool edge = false;
      for (int dr = -1; dr <= 1; ++dr)
        for (int dc = -1; dc <= 1; ++dc) edge |= s.ground_truth.at(col + dc, row + dr) != t;
      const auto l = coarse.labels.at(col, row);
      if (edge || l == kUnlabeled) continue;
      hit += l == t;
      ++total;
    }
  EXPECT_GT(total, 5000u);
  EXPECT_GE(static_cast<double>(hit) / static_cast<double>(total), 0.95);
}

TEST(Pipeline, MultipleSessionsMergeAndWorkersAgree) {
  auto p = params(12, 12.0, 0.1);
  p.sessions = 3;
  const auto s = synth_scene(p);
  EXPECT_EQ(s.survey.sessions.size(), 3u);
  CoarseOptions one, four;
  one.workers = 1;
  four.workers = 4;
  const auto a = coarse_annotation(s.survey, one), b = coarse_annotation(s.survey, four);
  EXPECT_EQ(a.labels.data, b.labels.data);
  for (std::size_t c = 0; c < a.merged.size(); ++c) {
    ASSERT_EQ(a.merged[c].data.size(), b.merged[c].data.size());
    EXPECT_EQ(0, std::memcmp(a.merged[c].data.data(), b.merged[c].data.data(), a.merged[c].data.size() * sizeof(double)));
  }
  EXPECT_GT(evaluate(s.ground_truth, a.labels, s.survey.catalog).accuracy, 0.7);
}

}  // namespace
}  // namespace reefmap
