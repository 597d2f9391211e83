#pragma once

// Coarse annotation from point predictions: per-session triangulation and
// interpolation, session merge, per-class normalization, argmax.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "reefmap/annotate.hpp"
#include "reefmap/delaunay.hpp"
#include "reefmap/ingest.hpp"
#include "reefmap/rasterize.hpp"

namespace reefmap {

inline constexpr const char* kLocalCrs = "local";

/// Grid over the bounding box of all points. Spacing defaults to the median
/// consecutive-point spacing of the survey.
inline GridSpec survey_grid(const PointPredictionSet& set, std::optional<double> spacing = std::nullopt,
                            std::string crs_tag = kLocalCrs) {
  if (set.point_count() == 0) throw Error(Errc::TooFewPoints, "no points");
  const double s = spacing ? *spacing : survey_spacing(set);
  double min_x = INFINITY, min_y = INFINITY, max_x = -INFINITY, max_y = -INFINITY;
  for (const auto& [id, pts] : set.sessions)
    for (const auto& p : pts) {
      min_x = std::min(min_x, p.x);
      max_x = std::max(max_x, p.x);
      min_y = std::min(min_y, p.y);
      max_y = std::max(max_y, p.y);
    }
  return grid_from_extent(min_x, min_y, max_x, max_y, s, std::move(crs_tag));
}

struct SessionRasters {
  std::string session_id;
  std::vector<ProbabilityRaster> classes;  // one per catalog class
};

inline SessionRasters rasterize_session(const std::string& session_id, std::span<const PointPrediction> pts,
                                        const ClassCatalog& catalog, const GridSpec& grid, unsigned workers = 0) {
  std::vector<Point2> xy;
  xy.reserve(pts.size());
  for (const auto& p : pts) xy.push_back({p.x, p.y});
  const auto tri = delaunay_triangulate(xy);
  const auto loc = locate_pixels(tri, grid, workers);
  SessionRasters out{session_id, {}};
  std::vector<double> values(pts.size());
  for (std::size_t c = 0; c < catalog.size(); ++c) {
    for (std::size_t i = 0; i < pts.size(); ++i) values[i] = pts[i].probs[c];
    const auto vv = gather_vertex_values<double>(tri, values);
    out.classes.push_back(interpolate_with_locator(loc, tri, vv, static_cast<ClassId>(c), workers));
  }
  return out;
}

inline std::vector<SessionRasters> rasterize_sessions(const PointPredictionSet& set, const GridSpec& grid,
                                                      unsigned workers = 0) {
  std::vector<SessionRasters> out;
  for (const auto& [id, pts] : set.sessions) out.push_back(rasterize_session(id, pts, set.catalog, grid, workers));
  return out;
}

inline std::vector<ProbabilityRaster> merge_sessions(const std::vector<SessionRasters>& sessions, std::size_t num_classes,
                                                     unsigned workers = 0) {
  if (sessions.empty()) throw Error(Errc::EmptyList, "no sessions");
  std::vector<ProbabilityRaster> merged;
  for (std::size_t c = 0; c < num_classes; ++c) {
    std::vector<ProbabilityRaster> per;
    for (const auto& s : sessions) per.push_back(s.classes.at(c));
    merged.push_back(merge_session_rasters(per, workers));
  }
  return merged;
}

inline std::vector<ProbabilityRaster> normalize_rasters(const std::vector<ProbabilityRaster>& merged,
                                                        const NormalizationParams& params, unsigned workers = 0) {
  std::vector<ProbabilityRaster> out;
  for (const auto& r : merged) {
    if (r.class_id >= params.classes.size()) throw Error(Errc::ClassMismatch, "no statistics for class " + std::to_string(r.class_id));
    out.push_back(normalize_raster(r, params.classes[r.class_id], params.epsilon, workers));
  }
  return out;
}

struct CoarseOptions {
  std::optional<double> grid_spacing;
  std::optional<GridSpec> grid;  // overrides grid_spacing when set
  double p_low = 0.01;
  double p_high = 0.99;
  double epsilon = 1e-6;
  unsigned workers = 0;
};

struct CoarseAnnotation {
  GridSpec grid;
  std::vector<SessionRasters> sessions;
  std::vector<ProbabilityRaster> merged;
  NormalizationParams params;
  std::vector<ProbabilityRaster> normalized;
  LabelRaster labels;
};

inline CoarseAnnotation coarse_annotation(const PointPredictionSet& set, const CoarseOptions& opt = {}) {
  CoarseAnnotation out;
  out.grid = opt.grid ? *opt.grid : survey_grid(set, opt.grid_spacing);
  out.sessions = rasterize_sessions(set, out.grid, opt.workers);
  out.merged = merge_sessions(out.sessions, set.catalog.size(), opt.workers);
  out.params = fit_normalization(set, opt.p_low, opt.p_high, opt.epsilon);
  out.normalized = normalize_rasters(out.merged, out.params, opt.workers);
  out.labels = argmax_label(out.normalized, set.catalog, opt.workers);
  return out;
}

}  // namespace reefmap
