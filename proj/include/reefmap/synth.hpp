#pragma once

// Synthetic survey scenes: a Voronoi class map as ground truth and point
// predictions sampled along serpentine transects.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "reefmap/core.hpp"
#include "reefmap/ingest.hpp"
#include "reefmap/pipeline.hpp"

namespace reefmap {

struct SynthParams {
  std::uint64_t seed = 0;
  double extent = 50.0;            // square side, meters
  double transect_spacing = 0.5;   // between transect lines
  double point_step = 0.3;         // along a transect
  double noise = 0.0;              // sigma of the Gaussian added to each probability
  ClassCatalog catalog = ClassCatalog::default_catalog(false);
  int sessions = 1;                // transects are split into this many contiguous sessions
  std::optional<double> truth_spacing;  // defaults to the survey spacing
};

struct SyntheticScene {
  SynthParams params;
  std::vector<Point2> seeds;
  std::vector<ClassId> seed_class;
  double min_seed_separation = 0.0;
  PointPredictionSet survey;
  LabelRaster ground_truth;

  /// Class of the nearest seed; ties go to the lower seed index.
  ClassId truth_at(double x, double y) const {
    std::size_t best = 0;
    double best_d = INFINITY;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      const double dx = seeds[i].x - x, dy = seeds[i].y - y;
      const double d = dx * dx + dy * dy;
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    return seed_class[best];
  }

  LabelRaster truth_raster(const GridSpec& grid) const {
    LabelRaster out = make_label_raster(grid);
    for (std::int64_t row = 0; row < grid.height; ++row)
      for (std::int64_t col = 0; col < grid.width; ++col) {
        const auto c = pixel_center(grid, col, row);
        out.at(col, row) = truth_at(c.x, c.y);
      }
    return out;
  }
};

inline SyntheticScene synth_scene(const SynthParams& p) {
  auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
  if (!positive(p.extent) || !positive(p.transect_spacing) || !positive(p.point_step))
    throw Error(Errc::BadParameters, "extent and spacings must be positive");
  if (!(p.noise >= 0.0) || !std::isfinite(p.noise)) throw Error(Errc::BadParameters, "noise sigma must be >= 0");
  if (p.transect_spacing > p.extent || p.point_step > p.extent)
    throw Error(Errc::BadParameters, "spacings must not exceed the extent");
  if (p.sessions < 1) throw Error(Errc::BadParameters, "sessions must be >= 1");
  if (p.truth_spacing && !positive(*p.truth_spacing)) throw Error(Errc::BadParameters, "truth spacing must be positive");
  const double lines_d = std::floor(p.extent / p.transect_spacing - 0.5) + 1.0;
  const double steps_d = std::floor(p.extent / p.point_step - 0.5) + 1.0;
  if (lines_d * steps_d > 5e7) throw Error(Errc::BadParameters, "scene would exceed 5e7 points");

  SyntheticScene scene;
  scene.params = p;
  std::mt19937_64 rng(p.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  // Seeds at least r apart keep every Voronoi cell at least r/2 across in
  // the seed's neighbourhood, well above ten point steps.
  const double r = std::max(20.0 * p.point_step, p.extent / 10.0);
  scene.min_seed_separation = r;
  int misses = 0;
  while (misses < 2000) {
    const Point2 c{unit(rng) * p.extent, unit(rng) * p.extent};
    bool ok = true;
    for (const auto& s : scene.seeds)
      if ((s.x - c.x) * (s.x - c.x) + (s.y - c.y) * (s.y - c.y) < r * r) {
        ok = false;
        break;
      }
    if (ok) {
      scene.seeds.push_back(c);
      misses = 0;
    } else {
      ++misses;
    }
  }

  // Balanced assignment: every class gets a near-equal share of cells.
  const std::size_t n_classes = p.catalog.size();
  std::vector<std::size_t> order(scene.seeds.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  scene.seed_class.assign(scene.seeds.size(), 0);
  for (std::size_t k = 0; k < order.size(); ++k) scene.seed_class[order[k]] = static_cast<ClassId>(k % n_classes);

  // Serpentine transects.
  scene.survey.catalog = p.catalog;
  const auto n_lines = static_cast<std::int64_t>(lines_d);
  const auto n_steps = static_cast<std::int64_t>(steps_d);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::int64_t seq = 0;
  for (std::int64_t k = 0; k < n_lines; ++k) {
    const auto session_idx = k * p.sessions / n_lines;
    const std::string sid = p.sessions == 1 ? "synth" : "synth_" + std::to_string(session_idx);
    auto& pts = scene.survey.sessions[sid];
    const double y = (static_cast<double>(k) + 0.5) * p.transect_spacing;
    for (std::int64_t i = 0; i < n_steps; ++i) {
      const std::int64_t j = k % 2 == 0 ? i : n_steps - 1 - i;
      const double x = (static_cast<double>(j) + 0.5) * p.point_step;
      PointPrediction pp{sid, seq++, x, y, std::vector<double>(n_classes, 0.0)};
      pp.probs[scene.truth_at(x, y)] = 1.0;
      if (p.noise > 0.0)
        for (auto& v : pp.probs) v = std::clamp(v + p.noise * gauss(rng), 0.0, 1.0);
      pts.push_back(std::move(pp));
    }
  }

  scene.ground_truth = scene.truth_raster(survey_grid(scene.survey, p.truth_spacing));
  return scene;
}

}  // namespace reefmap
