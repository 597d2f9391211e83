#pragma once

// Ecological statistics from label rasters: cover composition, connected
// instances with their longest axis, densities and point-level abundance.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "reefmap/core.hpp"
#include "reefmap/ingest.hpp"
#include "reefmap/parallel.hpp"

namespace reefmap {

struct CoverEntry {
  ClassId class_id = 0;
  std::uint64_t pixels = 0;
  double fraction = 0.0;  // of labeled pixels
  double area_m2 = 0.0;
};

inline std::vector<CoverEntry> class_cover(const LabelRaster& labels, const ClassCatalog& catalog) {
  std::vector<std::uint64_t> counts(256, 0);
  for (auto v : labels.data) ++counts[v];
  std::uint64_t labeled = 0;
  for (std::size_t v = 0; v < 255; ++v) {
    if (counts[v] && !catalog.valid(static_cast<ClassId>(v))) throw Error(Errc::LabelOutOfCatalog, "label " + std::to_string(v));
    labeled += counts[v];
  }
  if (labeled == 0) throw Error(Errc::NoLabeledPixels, "no labeled pixels");
  const double px_area = labels.grid.spacing * labels.grid.spacing;
  std::vector<CoverEntry> out;
  for (std::size_t c = 0; c < catalog.size(); ++c)
    out.push_back({static_cast<ClassId>(c), counts[c], static_cast<double>(counts[c]) / static_cast<double>(labeled),
                   static_cast<double>(counts[c]) * px_area});
  return out;
}

struct InstanceRecord {
  ClassId class_id = 0;
  std::vector<PixelIndex> pixels;  // raster-scan order
  double area_m2 = 0.0;
  double length_m = 0.0;
  Point2 centroid;
};

namespace detail {

struct IPoint {
  std::int64_t x, y;
};

inline std::int64_t cross(const IPoint& o, const IPoint& a, const IPoint& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

inline std::int64_t dist2(const IPoint& a, const IPoint& b) {
  return (a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y);
}

/// Counter-clockwise hull without collinear points (monotone chain).
inline std::vector<IPoint> convex_hull(std::vector<IPoint> pts) {
  std::sort(pts.begin(), pts.end(), [](const IPoint& a, const IPoint& b) { return a.x != b.x ? a.x < b.x : a.y < b.y; });
  pts.erase(std::unique(pts.begin(), pts.end(), [](const IPoint& a, const IPoint& b) { return a.x == b.x && a.y == b.y; }),
            pts.end());
  if (pts.size() < 3) return pts;
  std::vector<IPoint> h(2 * pts.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    while (k >= 2 && cross(h[k - 2], h[k - 1], pts[i]) <= 0) --k;
    h[k++] = pts[i];
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(h[k - 2], h[k - 1], pts[i]) <= 0) --k;
    h[k++] = pts[i];
  }
  h.resize(k - 1);
  return h;
}

/// Squared diameter of a convex polygon by rotating calipers.
inline std::int64_t hull_diameter2(const std::vector<IPoint>& h) {
  const std::size_t n = h.size();
  if (n == 1) return 0;
  if (n == 2) return dist2(h[0], h[1]);
  std::int64_t best = 0;
  std::size_t j = 1;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = h[i];
    const auto& b = h[(i + 1) % n];
    while (cross(a, b, h[(j + 1) % n]) > cross(a, b, h[j])) j = (j + 1) % n;
    best = std::max({best, dist2(a, h[j]), dist2(b, h[j])});
  }
  return best;
}

}  // namespace detail

/// Longest distance between two pixel centres plus one pixel width.
inline double instance_length(std::span<const PixelIndex> pixels, double spacing) {
  if (pixels.empty()) throw Error(Errc::EmptyInstance, "instance has no pixels");
  std::vector<detail::IPoint> pts;
  pts.reserve(pixels.size());
  for (const auto& p : pixels) pts.push_back({p.col, p.row});
  const auto d2 = detail::hull_diameter2(detail::convex_hull(std::move(pts)));
  return std::sqrt(static_cast<double>(d2)) * spacing + spacing;
}

inline double instance_length(const InstanceRecord& inst, double spacing) { return instance_length(inst.pixels, spacing); }

/// Connected components of one class. Runs of class pixels are unioned with
/// touching runs of the previous row; each component is identified by its
/// first run in raster-scan order, which also fixes the output order.
inline std::vector<InstanceRecord> connected_components(const LabelRaster& labels, const ClassCatalog& catalog,
                                                        ClassId class_id, int connectivity = 8,
                                                        std::size_t min_pixels = 4) {
  if (!catalog.valid(class_id)) throw Error(Errc::UnknownClass, "class " + std::to_string(class_id));
  if (connectivity != 4 && connectivity != 8) throw Error(Errc::BadParameters, "connectivity must be 4 or 8");
  const auto& g = labels.grid;
  const std::int64_t reach = connectivity == 8 ? 1 : 0;

  struct Run {
    std::int64_t row, c0, c1;
  };
  std::vector<Run> runs;
  std::vector<std::uint32_t> parent;
  auto find = [&](std::uint32_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  auto unite = [&](std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (a < b)
      parent[b] = a;
    else
      parent[a] = b;
  };

  std::size_t prev_begin = 0, prev_end = 0;
  for (std::int64_t row = 0; row < g.height; ++row) {
    const std::uint8_t* line = labels.data.data() + static_cast<std::size_t>(row * g.width);
    const std::size_t cur_begin = runs.size();
    for (std::int64_t col = 0; col < g.width;) {
      if (line[col] != class_id) {
        ++col;
        continue;
      }
      std::int64_t end = col;
      while (end + 1 < g.width && line[end + 1] == class_id) ++end;
      runs.push_back({row, col, end});
      parent.push_back(static_cast<std::uint32_t>(parent.size()));
      col = end + 1;
    }
    const std::size_t cur_end = runs.size();
    if (prev_end > prev_begin && runs[prev_begin].row == row - 1) {
      std::size_t p = prev_begin;
      for (std::size_t c = cur_begin; c < cur_end; ++c) {
        while (p < prev_end && runs[p].c1 + reach < runs[c].c0) ++p;
        for (std::size_t q = p; q < prev_end && runs[q].c0 <= runs[c].c1 + reach; ++q)
          unite(static_cast<std::uint32_t>(q), static_cast<std::uint32_t>(c));
      }
    }
    prev_begin = cur_begin;
    prev_end = cur_end;
  }

  std::vector<std::int64_t> slot(runs.size(), -1);
  std::vector<std::vector<std::uint32_t>> groups;
  for (std::uint32_t r = 0; r < runs.size(); ++r) {
    const auto root = find(r);
    if (slot[root] < 0) {
      slot[root] = static_cast<std::int64_t>(groups.size());
      groups.emplace_back();
    }
    groups[static_cast<std::size_t>(slot[root])].push_back(r);
  }

  std::vector<InstanceRecord> out;
  const double s = g.spacing;
  for (const auto& grp : groups) {
    std::size_t count = 0;
    for (auto r : grp) count += static_cast<std::size_t>(runs[r].c1 - runs[r].c0 + 1);
    if (count < min_pixels) continue;
    InstanceRecord inst;
    inst.class_id = class_id;
    inst.pixels.reserve(count);
    std::vector<detail::IPoint> ends;
    double sx = 0.0, sy = 0.0;
    for (auto r : grp) {
      const auto& run = runs[r];
      for (auto col = run.c0; col <= run.c1; ++col) inst.pixels.push_back({col, run.row});
      ends.push_back({run.c0, run.row});
      ends.push_back({run.c1, run.row});
      const auto n = static_cast<double>(run.c1 - run.c0 + 1);
      sx += n * (static_cast<double>(run.c0 + run.c1) / 2.0);
      sy += n * static_cast<double>(run.row);
    }
    const auto n = static_cast<double>(count);
    inst.centroid = {g.origin_x + (sx / n + 0.5) * s, g.origin_y - (sy / n + 0.5) * s};
    inst.area_m2 = n * s * s;
    inst.length_m = std::sqrt(static_cast<double>(detail::hull_diameter2(detail::convex_hull(std::move(ends))))) * s + s;
    out.push_back(std::move(inst));
  }
  return out;
}

/// Components for several classes, one class per task.
inline std::vector<std::vector<InstanceRecord>> connected_components_by_class(const LabelRaster& labels,
                                                                              const ClassCatalog& catalog,
                                                                              std::span<const ClassId> classes,
                                                                              int connectivity = 8,
                                                                              std::size_t min_pixels = 4,
                                                                              unsigned workers = 0) {
  std::vector<std::vector<InstanceRecord>> out(classes.size());
  parallel_for_blocks(classes.size(), workers, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) out[i] = connected_components(labels, catalog, classes[i], connectivity, min_pixels);
  });
  return out;
}

inline double density(std::size_t instance_count, double surveyed_area_m2) {
  if (!(surveyed_area_m2 > 0.0)) throw Error(Errc::NonPositiveArea, std::to_string(surveyed_area_m2));
  return static_cast<double>(instance_count) / surveyed_area_m2;
}

/// Area covered by labeled pixels.
inline double labeled_area(const LabelRaster& labels) {
  const auto n = static_cast<double>(labels.data.size()) -
                 static_cast<double>(std::count(labels.data.begin(), labels.data.end(), kUnlabeled));
  return n * labels.grid.spacing * labels.grid.spacing;
}

struct LengthSummary {
  double mean = 0.0;
  double standard_error = 0.0;
  std::size_t count = 0;
};

/// Mean and standard error of the mean (sample SD / sqrt(n)).
inline LengthSummary length_summary(std::span<const double> lengths) {
  if (lengths.empty()) throw Error(Errc::EmptyList, "no lengths");
  const auto n = static_cast<double>(lengths.size());
  const double mean = std::accumulate(lengths.begin(), lengths.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : lengths) ss += (v - mean) * (v - mean);
  const double se = lengths.size() > 1 ? std::sqrt(ss / (n - 1.0)) / std::sqrt(n) : 0.0;
  return {mean, se, lengths.size()};
}

/// "19.6 ± 0.24 cm" from lengths in meters.
inline std::string format_length_summary(const LengthSummary& s) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1f ± %.2f cm", s.mean * 100.0, s.standard_error * 100.0);
  return buf;
}

/// Per class, the fraction of points whose probability reaches the threshold.
inline std::vector<double> relative_abundance(const PointPredictionSet& set, double threshold = 0.5) {
  const std::size_t total = set.point_count();
  if (total == 0) throw Error(Errc::EmptySet, "no points");
  std::vector<std::size_t> hits(set.catalog.size(), 0);
  for (const auto& [id, pts] : set.sessions)
    for (const auto& p : pts)
      for (std::size_t c = 0; c < hits.size(); ++c)
        if (p.probs[c] >= threshold) ++hits[c];
  std::vector<double> out;
  for (auto h : hits) out.push_back(static_cast<double>(h) / static_cast<double>(total));
  return out;
}

inline std::string instances_csv(std::span<const InstanceRecord> instances, const ClassCatalog& catalog) {
  std::ostringstream os;
  os << "class,centroid_x,centroid_y,area_m2,length_m\n";
  char buf[160];
  for (const auto& i : instances) {
    std::snprintf(buf, sizeof buf, ",%.6f,%.6f,%.8f,%.6f\n", i.centroid.x, i.centroid.y, i.area_m2, i.length_m);
    os << catalog[i.class_id].name << buf;
  }
  return os.str();
}

inline nlohmann::json instances_geojson(std::span<const InstanceRecord> instances, const ClassCatalog& catalog,
                                        const std::string& crs_tag = "") {
  nlohmann::json features = nlohmann::json::array();
  for (const auto& i : instances)
    features.push_back({{"type", "Feature"},
                        {"geometry", {{"type", "Point"}, {"coordinates", {i.centroid.x, i.centroid.y}}}},
                        {"properties",
                         {{"class", catalog[i.class_id].name},
                          {"class_id", i.class_id},
                          {"area_m2", i.area_m2},
                          {"length_m", i.length_m},
                          {"pixels", i.pixels.size()}}}});
  nlohmann::json fc = {{"type", "FeatureCollection"}, {"features", features}};
  if (!crs_tag.empty()) fc["crs"] = {{"type", "name"}, {"properties", {{"name", crs_tag}}}};
  return fc;
}

inline nlohmann::json cover_json(std::span<const CoverEntry> cover, const ClassCatalog& catalog) {
  nlohmann::json classes = nlohmann::json::array();
  for (const auto& c : cover)
    classes.push_back({{"class_id", c.class_id},
                       {"name", catalog[c.class_id].name},
                       {"color", rgb_to_hex(catalog[c.class_id].color)},
                       {"pixels", c.pixels},
                       {"fraction", c.fraction},
                       {"area_m2", c.area_m2}});
  return {{"classes", classes}};
}

}  // namespace reefmap
