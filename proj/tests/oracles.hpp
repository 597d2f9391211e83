#pragma once

// Brute-force reference computations. These deliberately avoid the library's
// algorithms (no predicates, no locator, no union-find) so they can check
// them independently.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <set>
#include <vector>

#include "reefmap/core.hpp"

namespace reefmap::oracle {

/// Circumcircle test in long double with a relative tolerance: reports a
/// violation only if d is clearly inside the circle through a, b, c.
inline bool clearly_inside_circumcircle(const Point2& a, const Point2& b, const Point2& c, const Point2& d) {
  using L = long double;
  const L ax = a.x, ay = a.y, bx = b.x, by = b.y, cx = c.x, cy = c.y;
  const L D = 2 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by));
  const L ux = ((ax * ax + ay * ay) * (by - cy) + (bx * bx + by * by) * (cy - ay) + (cx * cx + cy * cy) * (ay - by)) / D;
  const L uy = ((ax * ax + ay * ay) * (cx - bx) + (bx * bx + by * by) * (ax - cx) + (cx * cx + cy * cy) * (bx - ax)) / D;
  const L r2 = (ax - ux) * (ax - ux) + (ay - uy) * (ay - uy);
  const L d2 = (d.x - ux) * (d.x - ux) + (d.y - uy) * (d.y - uy);
  return d2 < r2 * (1 - 1e-9L);
}

inline long double signed_area2(const Point2& a, const Point2& b, const Point2& c) {
  return (static_cast<long double>(b.x) - a.x) * (static_cast<long double>(c.y) - a.y) -
         (static_cast<long double>(b.y) - a.y) * (static_cast<long double>(c.x) - a.x);
}

/// Closed point-in-triangle with a small tolerance on the edge functions.
inline bool in_triangle(const Point2& a, const Point2& b, const Point2& c, const Point2& p, long double tol = 1e-12L) {
  const long double area = signed_area2(a, b, c);
  const long double s = area > 0 ? 1.0L : -1.0L;
  const long double scale = std::fabs(area);
  return s * signed_area2(a, b, p) >= -tol * scale && s * signed_area2(b, c, p) >= -tol * scale &&
         s * signed_area2(c, a, p) >= -tol * scale;
}

/// Barycentric interpolation solved by Cramer's rule in long double.
inline long double barycentric(const Point2& a, const Point2& b, const Point2& c, double va, double vb, double vc,
                               const Point2& p) {
  const long double area = signed_area2(a, b, c);
  const long double la = signed_area2(p, b, c) / area;
  const long double lb = signed_area2(a, p, c) / area;
  const long double lc = signed_area2(a, b, p) / area;
  return la * va + lb * vb + lc * vc;
}

/// Quantile at rank h = (n-1) p with linear interpolation, by full sort.
inline double sorted_quantile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double h = static_cast<double>(v.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= v.size()) return v.back();
  return v[lo] + (h - static_cast<double>(lo)) * (v[lo + 1] - v[lo]);
}

/// Components of `cls` pixels by breadth-first flood fill; each component is
/// a sorted set of (row, col) pairs.
inline std::vector<std::set<std::pair<std::int64_t, std::int64_t>>> flood_fill_components(const LabelRaster& labels,
                                                                                          std::uint8_t cls,
                                                                                          int connectivity) {
  const auto w = labels.grid.width, h = labels.grid.height;
  std::vector<char> seen(labels.data.size(), 0);
  std::vector<std::set<std::pair<std::int64_t, std::int64_t>>> out;
  for (std::int64_t r = 0; r < h; ++r)
    for (std::int64_t c = 0; c < w; ++c) {
      if (labels.at(c, r) != cls || seen[labels.index(c, r)]) continue;
      std::set<std::pair<std::int64_t, std::int64_t>> comp;
      std::deque<std::pair<std::int64_t, std::int64_t>> q{{r, c}};
      seen[labels.index(c, r)] = 1;
      while (!q.empty()) {
        auto [rr, cc] = q.front();
        q.pop_front();
        comp.insert({rr, cc});
        for (int dr = -1; dr <= 1; ++dr)
          for (int dc = -1; dc <= 1; ++dc) {
            if (dr == 0 && dc == 0) continue;
            if (connectivity == 4 && dr != 0 && dc != 0) continue;
            const auto nr = rr + dr, nc = cc + dc;
            if (nr < 0 || nc < 0 || nr >= h || nc >= w) continue;
            if (labels.at(nc, nr) != cls || seen[labels.index(nc, nr)]) continue;
            seen[labels.index(nc, nr)] = 1;
            q.push_back({nr, nc});
          }
      }
      out.push_back(std::move(comp));
    }
  return out;
}

}  // namespace reefmap::oracle
