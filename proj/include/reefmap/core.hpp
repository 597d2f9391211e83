#pragma once

// Foundational geospatial types shared by every stage: a north-up metric
// grid, scalar and label rasters on it, and the class catalog.
//
// Cell (col, row) covers
//   x in [origin_x + col*spacing, origin_x + (col+1)*spacing)
//   y in (origin_y - (row+1)*spacing, origin_y - row*spacing]
// so rows grow southward from the top-left origin.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "reefmap/error.hpp"

namespace reefmap {

using ClassId = std::uint8_t;
inline constexpr ClassId kUnlabeled = 255;

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point2&, const Point2&) = default;
};

struct PixelIndex {
  std::int64_t col = 0;
  std::int64_t row = 0;
  friend bool operator==(const PixelIndex&, const PixelIndex&) = default;
};

struct GridSpec {
  double origin_x = 0.0;
  double origin_y = 0.0;
  double spacing = 1.0;
  std::int64_t width = 1;
  std::int64_t height = 1;
  std::string crs_tag;

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }
  double min_x() const { return origin_x; }
  double max_x() const { return origin_x + static_cast<double>(width) * spacing; }
  double max_y() const { return origin_y; }
  double min_y() const { return origin_y - static_cast<double>(height) * spacing; }

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

inline void validate_grid(const GridSpec& g) {
  if (!(g.spacing > 0.0) || !std::isfinite(g.spacing))
    throw Error(Errc::NonPositiveSpacing, "spacing " + std::to_string(g.spacing));
  if (g.width < 1 || g.height < 1)
    throw Error(Errc::DegenerateExtent, std::to_string(g.width) + "x" + std::to_string(g.height));
}

/// Smallest grid of the given spacing covering the box, anchored at its
/// top-left corner (min_x, max_y).
inline GridSpec grid_from_extent(double min_x, double min_y, double max_x, double max_y, double spacing,
                                 std::string crs_tag = {}) {
  if (!(spacing > 0.0) || !std::isfinite(spacing))
    throw Error(Errc::NonPositiveSpacing, "spacing " + std::to_string(spacing));
  if (!(max_x > min_x) || !(max_y > min_y))
    throw Error(Errc::DegenerateExtent, "extent has zero area");
  GridSpec g;
  g.origin_x = min_x;
  g.origin_y = max_y;
  g.spacing = spacing;
  g.width = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil((max_x - min_x) / spacing)));
  g.height = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil((max_y - min_y) / spacing)));
  g.crs_tag = std::move(crs_tag);
  return g;
}

inline std::optional<PixelIndex> world_to_pixel(const GridSpec& g, double x, double y) {
  const double fc = std::floor((x - g.origin_x) / g.spacing);
  const double fr = std::floor((g.origin_y - y) / g.spacing);
  if (!(fc >= 0.0) || !(fr >= 0.0) || fc >= static_cast<double>(g.width) || fr >= static_cast<double>(g.height))
    return std::nullopt;
  return PixelIndex{static_cast<std::int64_t>(fc), static_cast<std::int64_t>(fr)};
}

inline Point2 pixel_center(const GridSpec& g, std::int64_t col, std::int64_t row) {
  return {g.origin_x + (static_cast<double>(col) + 0.5) * g.spacing,
          g.origin_y - (static_cast<double>(row) + 0.5) * g.spacing};
}

template <typename T>
struct Raster {
  GridSpec grid;
  std::vector<T> data;

  Raster() = default;
  Raster(GridSpec g, T fill) : grid(std::move(g)), data(grid.pixel_count(), fill) {}

  std::size_t index(std::int64_t col, std::int64_t row) const {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(grid.width) + static_cast<std::size_t>(col);
  }
  T& at(std::int64_t col, std::int64_t row) { return data[index(col, row)]; }
  const T& at(std::int64_t col, std::int64_t row) const { return data[index(col, row)]; }
};

/// Per-class probability field. NoData is a quiet NaN.
struct ProbabilityRaster : Raster<double> {
  ClassId class_id = 0;

  ProbabilityRaster() = default;
  ProbabilityRaster(GridSpec g, ClassId cls) : Raster<double>(std::move(g), nodata()), class_id(cls) {}

  static constexpr double nodata() { return std::numeric_limits<double>::quiet_NaN(); }
  static bool is_nodata(double v) { return std::isnan(v); }
};

using LabelRaster = Raster<std::uint8_t>;

inline LabelRaster make_label_raster(GridSpec g, std::uint8_t fill = kUnlabeled) { return LabelRaster(std::move(g), fill); }

inline void require_same_grid(const GridSpec& a, const GridSpec& b, const char* what) {
  if (!(a == b)) throw Error(Errc::GridMismatch, what);
}

// ---------------------------------------------------------------------------
// Class catalog

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

struct ClassInfo {
  ClassId index = 0;
  std::string name;
  Rgb color;
  friend bool operator==(const ClassInfo&, const ClassInfo&) = default;
};

class ClassCatalog {
 public:
  ClassCatalog() = default;
  explicit ClassCatalog(std::vector<ClassInfo> classes) : classes_(std::move(classes)) {
    if (classes_.empty()) throw Error(Errc::InvalidCatalog, "catalog is empty");
    if (classes_.size() >= kUnlabeled) throw Error(Errc::InvalidCatalog, "too many classes (index 255 is reserved)");
    for (std::size_t i = 0; i < classes_.size(); ++i) {
      if (classes_[i].index != i)
        throw Error(Errc::InvalidCatalog, "indices must be 0..N-1 in order; got " +
                                              std::to_string(classes_[i].index) + " at position " + std::to_string(i));
      if (classes_[i].name.empty()) throw Error(Errc::InvalidCatalog, "empty class name");
      for (std::size_t j = 0; j < i; ++j)
        if (classes_[j].name == classes_[i].name) throw Error(Errc::InvalidCatalog, "duplicate name " + classes_[i].name);
    }
  }

  /// Sand, Acropora Branching, Acropora Tabular, Non-acropora Massive, Other
  /// Corals, and optionally Sea Cucumber.
  static ClassCatalog default_catalog(bool with_sea_cucumber = false) {
    std::vector<ClassInfo> c = {
        {0, "Sand", {237, 216, 160}},
        {1, "Acropora Branching", {214, 39, 40}},
        {2, "Acropora Tabular", {255, 127, 14}},
        {3, "Non-acropora Massive", {148, 103, 189}},
        {4, "Other Corals", {44, 160, 44}},
    };
    if (with_sea_cucumber) c.push_back({5, "Sea Cucumber", {31, 119, 180}});
    return ClassCatalog(std::move(c));
  }

  std::size_t size() const { return classes_.size(); }
  const std::vector<ClassInfo>& classes() const { return classes_; }
  const ClassInfo& operator[](std::size_t i) const { return classes_.at(i); }
  bool valid(ClassId id) const { return id < classes_.size(); }

  std::optional<ClassId> find(const std::string& name) const {
    for (const auto& c : classes_)
      if (c.name == name || column_token(c.name) == name) return c.index;
    return std::nullopt;
  }

  ClassId require(const std::string& name) const {
    if (auto id = find(name)) return *id;
    throw Error(Errc::UnknownClass, name);
  }

  /// File/column-safe form of a class name ("Other Corals" -> "Other_Corals").
  static std::string column_token(const std::string& name) {
    std::string out = name;
    for (auto& ch : out)
      if (ch == ' ' || ch == '/' || ch == '\\' || ch == ',') ch = '_';
    return out;
  }

  friend bool operator==(const ClassCatalog&, const ClassCatalog&) = default;

 private:
  std::vector<ClassInfo> classes_;
};

inline void validate_labels(const LabelRaster& labels, const ClassCatalog& catalog) {
  for (auto v : labels.data)
    if (v != kUnlabeled && !catalog.valid(v))
      throw Error(Errc::LabelOutOfCatalog, "label " + std::to_string(v) + " with " + std::to_string(catalog.size()) + " classes");
}

// ---------------------------------------------------------------------------
// JSON forms

inline std::string rgb_to_hex(const Rgb& c) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s = "#";
  for (auto v : {c.r, c.g, c.b}) {
    s += digits[v >> 4];
    s += digits[v & 15];
  }
  return s;
}

inline Rgb rgb_from_hex(const std::string& s) {
  if (s.size() != 7 || s[0] != '#') throw Error(Errc::InvalidCatalog, "bad colour " + s);
  auto byte = [&](std::size_t i) {
    try {
      return static_cast<std::uint8_t>(std::stoul(s.substr(i, 2), nullptr, 16));
    } catch (const std::exception&) {
      throw Error(Errc::InvalidCatalog, "bad colour " + s);
    }
  };
  return {byte(1), byte(3), byte(5)};
}

inline nlohmann::json to_json(const ClassCatalog& catalog) {
  nlohmann::json classes = nlohmann::json::array();
  for (const auto& c : catalog.classes())
    classes.push_back({{"index", c.index}, {"name", c.name}, {"color", rgb_to_hex(c.color)}});
  return {{"classes", classes}};
}

inline ClassCatalog catalog_from_json(const nlohmann::json& j) {
  try {
    std::vector<ClassInfo> classes;
    for (const auto& c : j.at("classes")) {
      const int idx = c.at("index").get<int>();
      if (idx < 0 || idx >= kUnlabeled) throw Error(Errc::InvalidCatalog, "index out of range");
      classes.push_back({static_cast<ClassId>(idx), c.at("name").get<std::string>(),
                         c.contains("color") ? rgb_from_hex(c["color"].get<std::string>()) : Rgb{128, 128, 128}});
    }
    return ClassCatalog(std::move(classes));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidCatalog, e.what());
  }
}

inline nlohmann::json to_json(const GridSpec& g) {
  return {{"crs_tag", g.crs_tag}, {"origin_x", g.origin_x}, {"origin_y", g.origin_y},
          {"spacing", g.spacing}, {"width", g.width},       {"height", g.height}};
}

inline GridSpec grid_from_json(const nlohmann::json& j) {
  try {
    GridSpec g;
    g.crs_tag = j.value("crs_tag", std::string{});
    g.origin_x = j.at("origin_x").get<double>();
    g.origin_y = j.at("origin_y").get<double>();
    g.spacing = j.at("spacing").get<double>();
    g.width = j.at("width").get<std::int64_t>();
    g.height = j.at("height").get<std::int64_t>();
    validate_grid(g);
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::MalformedRaster, std::string("grid description: ") + e.what());
  }
}

}  // namespace reefmap
