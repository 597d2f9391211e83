#pragma once

// Coarse annotation from interpolated class probabilities:
//
//   p_hat_c = clip((p_c - q_low(c)) / (q_high(c) - q_low(c) + eps), 0, 1)
//   L       = argmax_c p_hat_c
//
// q_low/q_high are empirical percentiles (1st and 99th by default) of the
// point-level teacher probabilities for class c pooled over all sessions.
// They rescale each class to its own dynamic range before the argmax, so
// rare classes whose probabilities never reach high values are not swamped
// by confident common ones.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include <json.hpp>

#include "reefmap/core.hpp"
#include "reefmap/ingest.hpp"
#include "reefmap/parallel.hpp"

namespace reefmap {

struct QuantileStats {
  ClassId class_id = 0;
  double q_low = 0.0;
  double q_high = 0.0;
  std::size_t sample_count = 0;
};

struct NormalizationParams {
  double p_low = 0.01;
  double p_high = 0.99;
  double epsilon = 1e-6;
  std::vector<QuantileStats> classes;  // one per catalog class, in order
};

/// Empirical percentiles by linear interpolation between the order
/// statistics around rank h = (n - 1) * p.
inline QuantileStats quantile_stats(std::span<const double> values, double p_low = 0.01, double p_high = 0.99,
                                    ClassId class_id = 0) {
  if (values.empty()) throw Error(Errc::EmptyValues, "no values for class " + std::to_string(class_id));
  if (!(p_low >= 0.0) || !(p_high <= 1.0) || !(p_low < p_high))
    throw Error(Errc::BadPercentilePair, std::to_string(p_low) + "," + std::to_string(p_high));

  std::vector<double> v(values.begin(), values.end());
  const std::size_t n = v.size();
  auto at = [&](double p) {
    const double h = static_cast<double>(n - 1) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(lo), v.end());
    const double x_lo = v[lo];
    if (lo + 1 >= n) return x_lo;
    const double x_hi = *std::min_element(v.begin() + static_cast<std::ptrdiff_t>(lo) + 1, v.end());
    return x_lo + (h - static_cast<double>(lo)) * (x_hi - x_lo);
  };
  QuantileStats s;
  s.class_id = class_id;
  s.q_low = at(p_low);
  s.q_high = at(p_high);
  s.sample_count = n;
  return s;
}

/// Per-class percentiles of the pooled point predictions.
inline NormalizationParams fit_normalization(const PointPredictionSet& set, double p_low = 0.01, double p_high = 0.99,
                                             double epsilon = 1e-6) {
  if (!(epsilon > 0.0)) throw Error(Errc::NonPositiveEpsilon, std::to_string(epsilon));
  NormalizationParams params{p_low, p_high, epsilon, {}};
  for (std::size_t c = 0; c < set.catalog.size(); ++c) {
    const auto values = pool_class_values(set, static_cast<ClassId>(c));
    params.classes.push_back(quantile_stats(values, p_low, p_high, static_cast<ClassId>(c)));
  }
  return params;
}

inline double normalize_value(double p, const QuantileStats& stats, double epsilon) {
  return std::clamp((p - stats.q_low) / (stats.q_high - stats.q_low + epsilon), 0.0, 1.0);
}

inline ProbabilityRaster normalize_raster(const ProbabilityRaster& raster, const QuantileStats& stats, double epsilon,
                                          unsigned workers = 0) {
  if (raster.class_id != stats.class_id)
    throw Error(Errc::ClassMismatch, "raster class " + std::to_string(raster.class_id) + " vs stats class " +
                                         std::to_string(stats.class_id));
  if (!(epsilon > 0.0)) throw Error(Errc::NonPositiveEpsilon, std::to_string(epsilon));
  ProbabilityRaster out(raster.grid, raster.class_id);
  parallel_for_blocks(raster.data.size(), workers, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i)
      if (!ProbabilityRaster::is_nodata(raster.data[i])) out.data[i] = normalize_value(raster.data[i], stats, epsilon);
  });
  return out;
}

/// Label = smallest class index attaining the maximum over the classes that
/// have data at the pixel; 255 where every class is NoData.
inline LabelRaster argmax_label(std::span<const ProbabilityRaster> normalized, const ClassCatalog& catalog,
                                unsigned workers = 0) {
  const std::size_t n = catalog.size();
  std::vector<const ProbabilityRaster*> by_class(n, nullptr);
  for (const auto& r : normalized) {
    if (!catalog.valid(r.class_id)) throw Error(Errc::ClassMismatch, "raster for unknown class " + std::to_string(r.class_id));
    if (by_class[r.class_id]) throw Error(Errc::ClassMismatch, "two rasters for class " + catalog[r.class_id].name);
    by_class[r.class_id] = &r;
  }
  for (std::size_t c = 0; c < n; ++c)
    if (!by_class[c]) throw Error(Errc::MissingClassRaster, catalog[c].name);
  const GridSpec& grid = by_class[0]->grid;
  for (const auto* r : by_class) require_same_grid(grid, r->grid, "normalized rasters must share a grid");

  LabelRaster out = make_label_raster(grid);
  parallel_for_blocks(out.data.size(), workers, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      double best = 0.0;
      std::uint8_t label = kUnlabeled;
      for (std::size_t c = 0; c < n; ++c) {
        const double v = by_class[c]->data[i];
        if (ProbabilityRaster::is_nodata(v)) continue;
        if (label == kUnlabeled || v > best) {
          best = v;
          label = static_cast<std::uint8_t>(c);
        }
      }
      out.data[i] = label;
    }
  });
  return out;
}

/// True when the destination grid is coarser than the source, i.e. the
/// "upsample" would drop information.
inline bool upsample_is_lossy(const GridSpec& src, const GridSpec& dst) { return dst.spacing > src.spacing; }

/// Nearest-neighbour resampling onto dst_grid. Ties go to the smaller row,
/// then the smaller column; destination centres outside the source extent
/// get 255.
inline LabelRaster upsample_nearest(const LabelRaster& src, const GridSpec& dst_grid, unsigned workers = 0) {
  validate_grid(dst_grid);
  const GridSpec& sg = src.grid;
  const bool overlap = dst_grid.min_x() < sg.max_x() && sg.min_x() < dst_grid.max_x() && dst_grid.min_y() < sg.max_y() &&
                       sg.min_y() < dst_grid.max_y();
  if (!overlap) throw Error(Errc::NoOverlap, "destination grid does not intersect the source extent");

  // Nearest index along one axis with ties to the lower index.
  auto nearest = [](double u, std::int64_t n) {
    const auto k = static_cast<std::int64_t>(std::ceil(u - 0.5));
    return std::clamp<std::int64_t>(k, 0, n - 1);
  };
  LabelRaster out = make_label_raster(dst_grid);
  parallel_for_blocks(static_cast<std::size_t>(dst_grid.height), workers, [&](std::size_t rb, std::size_t re) {
    for (auto row = static_cast<std::int64_t>(rb); row < static_cast<std::int64_t>(re); ++row) {
      const double y = pixel_center(dst_grid, 0, row).y;
      if (!(y <= sg.max_y() && y > sg.min_y())) continue;
      const auto src_row = nearest((sg.origin_y - y) / sg.spacing - 0.5, sg.height);
      for (std::int64_t col = 0; col < dst_grid.width; ++col) {
        const double x = pixel_center(dst_grid, col, row).x;
        if (!(x >= sg.min_x() && x < sg.max_x())) continue;
        const auto src_col = nearest((x - sg.origin_x) / sg.spacing - 0.5, sg.width);
        out.at(col, row) = src.at(src_col, src_row);
      }
    }
  });
  return out;
}

inline nlohmann::json to_json(const NormalizationParams& params, const ClassCatalog& catalog) {
  nlohmann::json classes = nlohmann::json::array();
  for (const auto& s : params.classes)
    classes.push_back({{"class_id", s.class_id},
                       {"name", catalog.valid(s.class_id) ? catalog[s.class_id].name : std::string{}},
                       {"q_low", s.q_low},
                       {"q_high", s.q_high},
                       {"sample_count", s.sample_count}});
  return {{"p_low", params.p_low}, {"p_high", params.p_high}, {"epsilon", params.epsilon}, {"classes", classes}};
}

inline NormalizationParams normalization_from_json(const nlohmann::json& j) {
  try {
    NormalizationParams p;
    p.p_low = j.at("p_low").get<double>();
    p.p_high = j.at("p_high").get<double>();
    p.epsilon = j.at("epsilon").get<double>();
    for (const auto& c : j.at("classes"))
      p.classes.push_back({c.at("class_id").get<ClassId>(), c.at("q_low").get<double>(), c.at("q_high").get<double>(),
                           c.at("sample_count").get<std::size_t>()});
    if (!(p.epsilon > 0.0)) throw Error(Errc::NonPositiveEpsilon, std::to_string(p.epsilon));
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::BadParameters, std::string("normalization parameters: ") + e.what());
  }
}

}  // namespace reefmap
