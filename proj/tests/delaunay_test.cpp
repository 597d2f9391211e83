#include "reefmap/delaunay.hpp"

#include <algorithm>
#include <map>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"

namespace reefmap {
namespace {

std::vector<Point2> random_points(std::mt19937_64& rng, std::size_t n, double extent) {
  std::uniform_real_distribution<double> u(0.0, extent);
  std::vector<Point2> pts(n);
  for (auto& p : pts) p = {u(rng), u(rng)};
  return pts;
}

// Structural validity: CCW non-degenerate triangles, every interior edge
// shared by exactly two triangles, hull edges by one, and the
// Euler count T = 2n - h - 2.
void expect_valid_triangulation(const Triangulation& tri) {
  std::map<std::pair<std::uint32_t, std::uint32_t>, int> directed;
  for (const auto& t : tri.triangles) {
    ASSERT_GT(oracle::signed_area2(tri.vertices[t[0]], tri.vertices[t[1]], tri.vertices[t[2]]), 0.0L);
    for (int i = 0; i < 3; ++i) ++directed[{t[i], t[(i + 1) % 3]}];
  }
  for (const auto& [e, count] : directed) ASSERT_EQ(count, 1) << "edge used twice in the same direction";
  std::size_t boundary = 0;
  for (const auto& [e, count] : directed)
    if (!directed.count({e.second, e.first})) ++boundary;
  EXPECT_EQ(boundary, tri.hull.size());
  for (std::size_t i = 0; i < tri.hull.size(); ++i) {
    const auto a = tri.hull[i], b = tri.hull[(i + 1) % tri.hull.size()];
    EXPECT_TRUE(directed.count({a, b})) << "hull edge missing";
  }
  EXPECT_EQ(tri.triangles.size(), 2 * tri.vertices.size() - tri.hull.size() - 2);
}

void expect_empty_circumcircles(const Triangulation& tri) {
  for (const auto& t : tri.triangles)
    for (std::size_t v = 0; v < tri.vertices.size(); ++v) {
      if (v == t[0] || v == t[1] || v == t[2]) continue;
      ASSERT_FALSE(oracle::clearly_inside_circumcircle(tri.vertices[t[0]], tri.vertices[t[1]], tri.vertices[t[2]],
                                                       tri.vertices[v]));
    }
}

TEST(Delaunay, ThreePointsGiveOneTriangle) {
  const std::vector<Point2> pts = {{0, 0}, {1, 0}, {0, 1}};
  const auto tri = delaunay_triangulate(pts);
  ASSERT_EQ(tri.triangles.size(), 1u);
  EXPECT_EQ(tri.hull.size(), 3u);
  expect_valid_triangulation(tri);
}

TEST(Delaunay, UnitSquareGivesTwoTriangles) {
  const std::vector<Point2> pts = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  const auto tri = delaunay_triangulate(pts);
  ASSERT_EQ(tri.triangles.size(), 2u);
  long double area = 0;
  for (const auto& t : tri.triangles) area += oracle::signed_area2(tri.vertices[t[0]], tri.vertices[t[1]], tri.vertices[t[2]]) / 2;
  EXPECT_DOUBLE_EQ(static_cast<double>(area), 1.0);
  expect_valid_triangulation(tri);
}

TEST(Delaunay, RandomSetsHaveEmptyCircumcircles) {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    const auto tri = delaunay_triangulate(random_points(rng, 50, 10.0));
    expect_valid_triangulation(tri);
    expect_empty_circumcircles(tri);
  }
}

TEST(Delaunay, CocircularLatticeIsValidAndDeterministic) {
  // Integer lattice: every unit square is cocircular.
  std::vector<Point2> pts;
  for (int y = 0; y < 12; ++y)
    for (int x = 0; x < 9; ++x) pts.push_back({static_cast<double>(x), static_cast<double>(y)});
  const auto tri = delaunay_triangulate(pts);
  expect_valid_triangulation(tri);
  expect_empty_circumcircles(tri);
  EXPECT_EQ(tri.triangles.size(), 2u * 8 * 11);

  std::mt19937_64 rng(3);
  std::shuffle(pts.begin(), pts.end(), rng);
  const auto again = delaunay_triangulate(pts);
  EXPECT_EQ(again.vertices, tri.vertices);
  EXPECT_EQ(again.triangles, tri.triangles);
}

TEST(Delaunay, CollinearPointsOnHullAndInside) {
  std::vector<Point2> pts;
  for (int i = 0; i <= 10; ++i) pts.push_back({static_cast<double>(i), 0.0});  // collinear bottom edge
  pts.push_back({5.0, 3.0});
  pts.push_back({2.0, 1.0});
  const auto tri = delaunay_triangulate(pts);
  expect_valid_triangulation(tri);
  expect_empty_circumcircles(tri);
}

TEST(Delaunay, NearDegenerateInputsStayValid) {
  // Points on a circle with tiny perturbations exercise the exact fallback.
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> jitter(-1e-13, 1e-13);
  std::vector<Point2> pts;
  for (int k = 0; k < 64; ++k) {
    const double a = 2 * 3.14159265358979 * k / 64;
    pts.push_back({1e3 + 5 * std::cos(a) + jitter(rng), 2e3 + 5 * std::sin(a) + jitter(rng)});
  }
  pts.push_back({1e3, 2e3});
  const auto tri = delaunay_triangulate(pts);
  expect_valid_triangulation(tri);
}

TEST(Delaunay, PermutationInvariant) {
  std::mt19937_64 rng(77);
  auto pts = random_points(rng, 300, 40.0);
  const auto tri = delaunay_triangulate(pts);
  for (int k = 0; k < 3; ++k) {
    std::shuffle(pts.begin(), pts.end(), rng);
    const auto again = delaunay_triangulate(pts);
    EXPECT_EQ(again.vertices, tri.vertices);
    EXPECT_EQ(again.triangles, tri.triangles);
    EXPECT_EQ(again.hull, tri.hull);
  }
}

TEST(Delaunay, DuplicatesCollapseFirstWins) {
  const std::vector<Point2> pts = {{0, 0}, {1, 0}, {0, 1}, {1, 0}, {1, 1}, {0, 0}};
  const auto tri = delaunay_triangulate(pts);
  ASSERT_EQ(tri.vertices.size(), 4u);
  // Lexicographic vertex order: (0,0) (0,1) (1,0) (1,1)
  EXPECT_EQ(tri.source_index, (std::vector<std::size_t>{0, 2, 1, 4}));
  const std::vector<double> values = {10, 20, 30, 40, 50, 60};
  EXPECT_EQ(gather_vertex_values<double>(tri, values), (std::vector<double>{10, 30, 20, 50}));
}

TEST(Delaunay, Errors) {
  const std::vector<Point2> two = {{0, 0}, {1, 1}};
  try {
    delaunay_triangulate(two);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::TooFewPoints);
  }
  const std::vector<Point2> line = {{0, 0}, {1, 1}, {2, 2}, {3, 3}};
  try {
    delaunay_triangulate(line);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::AllCollinear);
  }
  const std::vector<Point2> dup = {{0, 0}, {1, 1}, {0, 0}, {1, 1}};
  EXPECT_THROW(delaunay_triangulate(dup), Error);
}

TEST(Delaunay, LargeInputIsFastEnoughAndValid) {
  std::mt19937_64 rng(1);
  const auto tri = delaunay_triangulate(random_points(rng, 20000, 1000.0));
  expect_valid_triangulation(tri);
}

}  // namespace
}  // namespace reefmap
