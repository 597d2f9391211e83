#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "reefmap/core.hpp"
#include "reefmap/delaunay.hpp"
#include "reefmap/parallel.hpp"
#include "reefmap/predicates.hpp"

namespace reefmap {

/// For every pixel centre, the index of the lowest-numbered triangle that
/// contains it (closed test), or -1 outside the convex hull. Computing this
/// once lets all classes of a session share the point-location work.
struct PixelLocator {
  GridSpec grid;
  std::vector<std::int32_t> triangle;
};

inline PixelLocator locate_pixels(const Triangulation& tri, const GridSpec& grid, unsigned workers = 0) {
  validate_grid(grid);
  PixelLocator loc{grid, std::vector<std::int32_t>(grid.pixel_count(), -1)};

  struct Span {
    std::int64_t c0, c1, r0, r1;
  };
  std::vector<Span> spans(tri.triangles.size());
  for (std::size_t t = 0; t < tri.triangles.size(); ++t) {
    const auto& v = tri.triangles[t];
    const Point2 &a = tri.vertices[v[0]], &b = tri.vertices[v[1]], &c = tri.vertices[v[2]];
    const double min_x = std::min({a.x, b.x, c.x}), max_x = std::max({a.x, b.x, c.x});
    const double min_y = std::min({a.y, b.y, c.y}), max_y = std::max({a.y, b.y, c.y});
    // Pad by one pixel; the exact inside test decides.
    auto clamp_col = [&](double v) { return std::clamp<double>(v, -1.0, static_cast<double>(grid.width)); };
    auto clamp_row = [&](double v) { return std::clamp<double>(v, -1.0, static_cast<double>(grid.height)); };
    spans[t].c0 = static_cast<std::int64_t>(clamp_col(std::floor((min_x - grid.origin_x) / grid.spacing - 0.5)));
    spans[t].c1 = static_cast<std::int64_t>(clamp_col(std::ceil((max_x - grid.origin_x) / grid.spacing - 0.5)));
    spans[t].r0 = static_cast<std::int64_t>(clamp_row(std::floor((grid.origin_y - max_y) / grid.spacing - 0.5)));
    spans[t].r1 = static_cast<std::int64_t>(clamp_row(std::ceil((grid.origin_y - min_y) / grid.spacing - 0.5)));
    spans[t].c0 = std::max<std::int64_t>(spans[t].c0, 0);
    spans[t].r0 = std::max<std::int64_t>(spans[t].r0, 0);
    spans[t].c1 = std::min<std::int64_t>(spans[t].c1, grid.width - 1);
    spans[t].r1 = std::min<std::int64_t>(spans[t].r1, grid.height - 1);
  }

  parallel_for_blocks(static_cast<std::size_t>(grid.height), workers, [&](std::size_t row_begin, std::size_t row_end) {
    const auto rb = static_cast<std::int64_t>(row_begin), re = static_cast<std::int64_t>(row_end);
    for (std::size_t t = 0; t < tri.triangles.size(); ++t) {
      const auto& s = spans[t];
      const auto r0 = std::max(s.r0, rb), r1 = std::min(s.r1, re - 1);
      if (r0 > r1 || s.c0 > s.c1) continue;
      const auto& v = tri.triangles[t];
      const Point2 &a = tri.vertices[v[0]], &b = tri.vertices[v[1]], &c = tri.vertices[v[2]];
      for (auto row = r0; row <= r1; ++row) {
        for (auto col = s.c0; col <= s.c1; ++col) {
          auto& slot = loc.triangle[static_cast<std::size_t>(row) * static_cast<std::size_t>(grid.width) +
                                    static_cast<std::size_t>(col)];
          if (slot >= 0) continue;
          const Point2 p = pixel_center(grid, col, row);
          if (predicates::orient(a, b, p) >= 0 && predicates::orient(b, c, p) >= 0 && predicates::orient(c, a, p) >= 0)
            slot = static_cast<std::int32_t>(t);
        }
      }
    }
  });
  return loc;
}

/// Barycentric value at p inside triangle (a, b, c), clamped to the vertex
/// value range so rounding never overshoots.
inline double barycentric_value(const Point2& a, const Point2& b, const Point2& c, double va, double vb, double vc,
                                const Point2& p) {
  const double bax = b.x - a.x, bay = b.y - a.y, cax = c.x - a.x, cay = c.y - a.y;
  const double pax = p.x - a.x, pay = p.y - a.y;
  const double det = bax * cay - bay * cax;
  const double wb = (pax * cay - pay * cax) / det;
  const double wc = (bax * pay - bay * pax) / det;
  const double v = va + wb * (vb - va) + wc * (vc - va);
  return std::clamp(v, std::min({va, vb, vc}), std::max({va, vb, vc}));
}

inline ProbabilityRaster interpolate_with_locator(const PixelLocator& loc, const Triangulation& tri,
                                                  std::span<const double> vertex_values, ClassId class_id = 0,
                                                  unsigned workers = 0) {
  if (vertex_values.size() != tri.vertices.size())
    throw Error(Errc::LengthMismatch, std::to_string(vertex_values.size()) + " values for " +
                                          std::to_string(tri.vertices.size()) + " vertices");
  ProbabilityRaster out(loc.grid, class_id);
  const auto width = loc.grid.width;
  parallel_for_blocks(static_cast<std::size_t>(loc.grid.height), workers, [&](std::size_t rb, std::size_t re) {
    for (auto row = static_cast<std::int64_t>(rb); row < static_cast<std::int64_t>(re); ++row) {
      for (std::int64_t col = 0; col < width; ++col) {
        const auto i = out.index(col, row);
        const auto t = loc.triangle[i];
        if (t < 0) continue;
        const auto& v = tri.triangles[static_cast<std::size_t>(t)];
        out.data[i] = barycentric_value(tri.vertices[v[0]], tri.vertices[v[1]], tri.vertices[v[2]], vertex_values[v[0]],
                                        vertex_values[v[1]], vertex_values[v[2]], pixel_center(loc.grid, col, row));
      }
    }
  });
  return out;
}

/// Piecewise-linear interpolation of per-vertex values over the grid. Pixel
/// centres outside the convex hull stay NoData.
inline ProbabilityRaster interpolate_linear(const Triangulation& tri, std::span<const double> vertex_values,
                                            const GridSpec& grid, ClassId class_id = 0, unsigned workers = 0) {
  if (vertex_values.size() != tri.vertices.size())
    throw Error(Errc::LengthMismatch, std::to_string(vertex_values.size()) + " values for " +
                                          std::to_string(tri.vertices.size()) + " vertices");
  return interpolate_with_locator(locate_pixels(tri, grid, workers), tri, vertex_values, class_id, workers);
}

/// Per-pixel mean of the non-NoData inputs. Values are summed in sorted order
/// so the result does not depend on the order of `rasters`.
inline ProbabilityRaster merge_session_rasters(std::span<const ProbabilityRaster> rasters, unsigned workers = 0) {
  if (rasters.empty()) throw Error(Errc::EmptyList, "no rasters to merge");
  for (const auto& r : rasters) {
    require_same_grid(rasters.front().grid, r.grid, "session rasters must share a grid");
    if (r.class_id != rasters.front().class_id) throw Error(Errc::ClassMismatch, "session rasters must share a class");
  }
  ProbabilityRaster out(rasters.front().grid, rasters.front().class_id);
  parallel_for_blocks(out.data.size(), workers, [&](std::size_t b, std::size_t e) {
    std::vector<double> vals;
    vals.reserve(rasters.size());
    for (std::size_t i = b; i < e; ++i) {
      vals.clear();
      for (const auto& r : rasters)
        if (!ProbabilityRaster::is_nodata(r.data[i])) vals.push_back(r.data[i]);
      if (vals.empty()) continue;
      std::sort(vals.begin(), vals.end());
      double sum = 0.0;
      for (double v : vals) sum += v;
      out.data[i] = sum / static_cast<double>(vals.size());
    }
  });
  return out;
}

}  // namespace reefmap
