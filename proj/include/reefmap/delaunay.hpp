#pragma once

// Incremental Bowyer-Watson Delaunay triangulation with ghost triangles
// (one per convex hull edge, sharing a virtual vertex at infinity), driven by
// exact predicates.
//
// Vertices are first sorted lexicographically and exact duplicates dropped
// (the first occurrence in input order is kept), so the triangulation depends
// only on the point set, never on input order. Insertion follows a Hilbert
// curve over that canonical list; co-circular configurations are resolved by
// that fixed order.

#include <algorithm>
#include <array>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "reefmap/core.hpp"
#include "reefmap/predicates.hpp"

namespace reefmap {

struct Triangulation {
  std::vector<Point2> vertices;                       // lexicographic order, unique
  std::vector<std::size_t> source_index;              // input index each vertex came from
  std::vector<std::array<std::uint32_t, 3>> triangles;  // counter-clockwise, sorted
  std::vector<std::uint32_t> hull;                    // counter-clockwise, starts at the lowest vertex index
};

namespace detail {

inline constexpr std::uint32_t kInfVertex = 0xFFFFFFFFu;

inline std::uint64_t hilbert_index(std::uint32_t x, std::uint32_t y, unsigned order_bits) {
  const std::uint32_t n = 1u << order_bits;
  std::uint64_t d = 0;
  for (std::uint32_t s = n >> 1; s > 0; s >>= 1) {
    const std::uint32_t rx = (x & s) ? 1 : 0;
    const std::uint32_t ry = (y & s) ? 1 : 0;
    d += static_cast<std::uint64_t>(s) * s * ((3 * rx) ^ ry);
    if (ry == 0) {
      if (rx == 1) {
        x = n - 1 - x;
        y = n - 1 - y;
      }
      std::swap(x, y);
    }
  }
  return d;
}

class DelaunayBuilder {
 public:
  explicit DelaunayBuilder(const std::vector<Point2>& pts) : pts_(pts) {}

  void run(const std::vector<std::uint32_t>& order) {
    // Seed triangle: the first two points in order plus the first point not
    // collinear with them. Skipped collinear points are inserted later.
    const std::uint32_t a = order[0], b = order[1];
    std::size_t k = 2;
    while (k < order.size() && predicates::orient(pts_[a], pts_[b], pts_[order[k]]) == 0) ++k;
    if (k == order.size()) throw Error(Errc::AllCollinear, std::to_string(order.size()) + " unique points");
    std::uint32_t c = order[k];
    std::uint32_t p0 = a, p1 = b, p2 = c;
    if (predicates::orient(pts_[a], pts_[b], pts_[c]) < 0) std::swap(p1, p2);
    const std::array<std::uint32_t, 4> seed = {new_tri(p0, p1, p2), new_tri(p1, p0, kInfVertex),
                                               new_tri(p2, p1, kInfVertex), new_tri(p0, p2, kInfVertex)};
    link_by_edges(seed);
    last_ = seed[0];
    for (std::size_t i = 2; i < order.size(); ++i)
      if (i != k) insert(order[i]);
  }

  void extract(Triangulation& out) const {
    std::vector<std::uint32_t> next(pts_.size(), kInfVertex);
    for (const auto& t : tris_) {
      if (!t.alive) continue;
      if (is_ghost(t)) {
        const int g = inf_slot(t);
        const std::uint32_t ea = t.v[(g + 1) % 3], eb = t.v[(g + 2) % 3];
        next[eb] = ea;  // hull runs counter-clockwise from eb to ea
        continue;
      }
      std::array<std::uint32_t, 3> v = t.v;
      const auto m = std::min_element(v.begin(), v.end()) - v.begin();
      std::rotate(v.begin(), v.begin() + m, v.end());
      out.triangles.push_back(v);
    }
    std::sort(out.triangles.begin(), out.triangles.end());
    std::uint32_t start = kInfVertex;
    for (std::uint32_t i = 0; i < next.size(); ++i)
      if (next[i] != kInfVertex) {
        start = i;
        break;
      }
    std::uint32_t cur = start;
    do {
      out.hull.push_back(cur);
      cur = next[cur];
    } while (cur != start && out.hull.size() <= pts_.size());
  }

 private:
  struct Tri {
    std::array<std::uint32_t, 3> v;
    std::array<std::uint32_t, 3> nb;  // nb[i] lies across the edge opposite v[i]
    bool alive;
  };

  struct BoundaryEdge {
    std::uint32_t u, w, outer;
  };

  static bool is_ghost(const Tri& t) { return t.v[0] == kInfVertex || t.v[1] == kInfVertex || t.v[2] == kInfVertex; }
  static int inf_slot(const Tri& t) { return t.v[0] == kInfVertex ? 0 : (t.v[1] == kInfVertex ? 1 : 2); }

  std::uint32_t new_tri(std::uint32_t a, std::uint32_t b, std::uint32_t c) {
    const Tri t{{a, b, c}, {kInfVertex, kInfVertex, kInfVertex}, true};
    if (!free_.empty()) {
      const auto id = free_.back();
      free_.pop_back();
      tris_[id] = t;
      return id;
    }
    tris_.push_back(t);
    mark_.push_back(0);
    return static_cast<std::uint32_t>(tris_.size() - 1);
  }

  template <typename Ids>
  void link_by_edges(const Ids& ids) {
    for (auto t : ids)
      for (int i = 0; i < 3; ++i) {
        const auto u = tris_[t].v[(i + 1) % 3], w = tris_[t].v[(i + 2) % 3];
        for (auto s : ids)
          for (int j = 0; j < 3 && s != t; ++j)
            if (tris_[s].v[(j + 1) % 3] == w && tris_[s].v[(j + 2) % 3] == u) tris_[t].nb[i] = s;
      }
  }

  bool strictly_between(const Point2& a, const Point2& b, const Point2& p) const {
    if (a.x != b.x) return std::min(a.x, b.x) < p.x && p.x < std::max(a.x, b.x);
    return std::min(a.y, b.y) < p.y && p.y < std::max(a.y, b.y);
  }

  bool in_conflict(std::uint32_t id, const Point2& p) const {
    const Tri& t = tris_[id];
    if (is_ghost(t)) {
      const int g = inf_slot(t);
      const Point2& a = pts_[t.v[(g + 1) % 3]];
      const Point2& b = pts_[t.v[(g + 2) % 3]];
      const int o = predicates::orient(a, b, p);
      return o > 0 || (o == 0 && strictly_between(a, b, p));
    }
    return predicates::incircle(pts_[t.v[0]], pts_[t.v[1]], pts_[t.v[2]], p) > 0;
  }

  // Visibility walk from the last created triangle. Returns a finite triangle
  // containing p, or the ghost of a hull edge p lies strictly outside of.
  std::uint32_t locate(const Point2& p) {
    std::uint32_t t = last_;
    if (is_ghost(tris_[t])) t = tris_[t].nb[inf_slot(tris_[t])];
    unsigned rot = 0;
    for (;;) {
      const Tri& cur = tris_[t];
      std::uint32_t next = kInfVertex;
      for (unsigned k = 0; k < 3; ++k) {
        const unsigned i = (k + rot) % 3;
        if (predicates::orient(pts_[cur.v[(i + 1) % 3]], pts_[cur.v[(i + 2) % 3]], p) < 0) {
          next = cur.nb[i];
          break;
        }
      }
      rot = (rot + 1) % 3;
      if (next == kInfVertex) return t;
      t = next;
      if (is_ghost(tris_[t])) return t;
    }
  }

  void insert(std::uint32_t vi) {
    const Point2& p = pts_[vi];
    const std::uint32_t start = locate(p);
    ++stamp_;
    cavity_.clear();
    boundary_.clear();
    stack_.assign(1, start);
    mark_[start] = stamp_;
    while (!stack_.empty()) {
      const auto t = stack_.back();
      stack_.pop_back();
      cavity_.push_back(t);
      for (int i = 0; i < 3; ++i) {
        const auto n = tris_[t].nb[i];
        if (mark_[n] == stamp_) continue;
        if (in_conflict(n, p)) {
          mark_[n] = stamp_;
          stack_.push_back(n);
        } else {
          boundary_.push_back({tris_[t].v[(i + 1) % 3], tris_[t].v[(i + 2) % 3], n});
        }
      }
    }
    created_.clear();
    for (const auto& e : boundary_) {
      const auto nt = new_tri(e.u, e.w, vi);
      tris_[nt].nb[2] = e.outer;
      Tri& o = tris_[e.outer];
      for (int j = 0; j < 3; ++j)
        if (o.v[(j + 1) % 3] == e.w && o.v[(j + 2) % 3] == e.u) o.nb[j] = nt;
      created_.push_back(nt);
    }
    // New triangle (u, w, p): across (w, p) is the one starting at w, across
    // (p, u) the one ending at u.
    for (std::size_t i = 0; i < created_.size(); ++i) {
      Tri& t = tris_[created_[i]];
      for (std::size_t j = 0; j < created_.size(); ++j) {
        const Tri& s = tris_[created_[j]];
        if (s.v[0] == t.v[1]) t.nb[0] = created_[j];
        if (s.v[1] == t.v[0]) t.nb[1] = created_[j];
      }
    }
    for (auto t : cavity_) {
      tris_[t].alive = false;
      free_.push_back(t);
    }
    last_ = created_.front();
    for (auto t : created_)
      if (!is_ghost(tris_[t])) {
        last_ = t;
        break;
      }
  }

  const std::vector<Point2>& pts_;
  std::vector<Tri> tris_;
  std::vector<std::uint32_t> mark_;
  std::vector<std::uint32_t> free_;
  std::vector<std::uint32_t> cavity_, stack_, created_;
  std::vector<BoundaryEdge> boundary_;
  std::uint32_t stamp_ = 0;
  std::uint32_t last_ = 0;
};

}  // namespace detail

/// Delaunay triangulation of a planar point set. Needs at least three
/// non-collinear points.
inline Triangulation delaunay_triangulate(std::span<const Point2> points) {
  if (points.size() < 3) throw Error(Errc::TooFewPoints, "need at least 3 points, got " + std::to_string(points.size()));
  if (points.size() >= detail::kInfVertex) throw Error(Errc::BadParameters, "too many points");
  for (const auto& p : points)
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw Error(Errc::BadParameters, "non-finite coordinate");

  std::vector<std::size_t> idx(points.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (points[a].x != points[b].x) return points[a].x < points[b].x;
    if (points[a].y != points[b].y) return points[a].y < points[b].y;
    return a < b;
  });
  Triangulation out;
  for (auto i : idx) {
    if (!out.vertices.empty() && out.vertices.back() == points[i]) continue;
    out.vertices.push_back(points[i]);
    out.source_index.push_back(i);
  }
  if (out.vertices.size() < 3) throw Error(Errc::AllCollinear, "fewer than 3 distinct points");

  double min_x = out.vertices.front().x, max_x = out.vertices.back().x;
  double min_y = out.vertices.front().y, max_y = min_y;
  for (const auto& p : out.vertices) {
    min_y = std::min(min_y, p.y);
    max_y = std::max(max_y, p.y);
  }
  const double span = std::max(max_x - min_x, max_y - min_y);
  constexpr unsigned kBits = 16;
  const double scale = span > 0 ? ((1u << kBits) - 1) / span : 0.0;
  std::vector<std::pair<std::uint64_t, std::uint32_t>> keyed(out.vertices.size());
  for (std::uint32_t i = 0; i < out.vertices.size(); ++i) {
    const auto qx = static_cast<std::uint32_t>((out.vertices[i].x - min_x) * scale);
    const auto qy = static_cast<std::uint32_t>((out.vertices[i].y - min_y) * scale);
    keyed[i] = {detail::hilbert_index(qx, qy, kBits), i};
  }
  std::sort(keyed.begin(), keyed.end());
  std::vector<std::uint32_t> order(keyed.size());
  for (std::size_t i = 0; i < keyed.size(); ++i) order[i] = keyed[i].second;

  detail::DelaunayBuilder builder(out.vertices);
  builder.run(order);
  builder.extract(out);
  return out;
}

/// Reorders per-input-point values to the triangulation's vertex order.
template <typename T>
std::vector<T> gather_vertex_values(const Triangulation& tri, std::span<const T> per_point) {
  std::vector<T> out;
  out.reserve(tri.vertices.size());
  for (auto i : tri.source_index) {
    if (i >= per_point.size()) throw Error(Errc::LengthMismatch, "value list shorter than point list");
    out.push_back(per_point[i]);
  }
  return out;
}

}  // namespace reefmap
