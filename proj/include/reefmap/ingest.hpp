#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "reefmap/core.hpp"
#include "reefmap/grf.hpp"

namespace reefmap {

/// One classified underwater image. Probabilities come from a multi-label
/// classifier, so they need not sum to one.
struct PointPrediction {
  std::string session_id;
  std::int64_t seq = 0;
  double x = 0.0;
  double y = 0.0;
  std::vector<double> probs;
};

struct PointPredictionSet {
  ClassCatalog catalog;
  std::map<std::string, std::vector<PointPrediction>> sessions;  // ordered by seq

  std::size_t point_count() const {
    std::size_t n = 0;
    for (const auto& [id, pts] : sessions) n += pts.size();
    return n;
  }
};

struct LatLon {
  double lat = 0.0;
  double lon = 0.0;
};

inline constexpr double kEarthRadiusM = 6371000.0;

/// Equirectangular tangent-plane projection around `origin`. Only meant for
/// survey extents of a few kilometres.
inline std::vector<Point2> latlon_to_local(std::span<const LatLon> points, LatLon origin) {
  auto check = [](const LatLon& p) {
    if (!(p.lat >= -90.0 && p.lat <= 90.0) || !(p.lon >= -180.0 && p.lon <= 180.0))
      throw Error(Errc::OutOfRangeCoordinate, "(" + std::to_string(p.lat) + ", " + std::to_string(p.lon) + ")");
  };
  check(origin);
  constexpr double deg = std::numbers::pi / 180.0;
  const double cos0 = std::cos(origin.lat * deg);
  std::vector<Point2> out;
  out.reserve(points.size());
  for (const auto& p : points) {
    check(p);
    out.push_back({kEarthRadiusM * (p.lon - origin.lon) * deg * cos0, kEarthRadiusM * (p.lat - origin.lat) * deg});
  }
  return out;
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r' || s.front() == '\n')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '\n')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline std::optional<std::int64_t> parse_int(std::string_view s) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

}  // namespace detail

/// Parses point-CSV text:
///   session_id,seq,x,y,prob_<Class0>,...,prob_<ClassN-1>
/// `lat,lon` may replace `x,y`; those rows are projected around `origin`, or
/// around the first point of the first session when no origin is given.
/// prob_ columns for classes outside the catalog are ignored.
inline PointPredictionSet parse_point_predictions(std::string_view text, const ClassCatalog& catalog,
                                                  std::optional<LatLon> origin = std::nullopt) {
  std::vector<std::string_view> lines;
  {
    std::size_t start = 0;
    while (start <= text.size()) {
      const auto pos = text.find('\n', start);
      lines.push_back(text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
      if (pos == std::string_view::npos) break;
      start = pos + 1;
    }
  }
  std::size_t header_line = 0;
  while (header_line < lines.size() && detail::trim(lines[header_line]).empty()) ++header_line;
  if (header_line >= lines.size()) throw Error(Errc::EmptyFile, "no header");

  std::string_view header_text = lines[header_line];
  if (header_text.starts_with("\xEF\xBB\xBF")) header_text.remove_prefix(3);
  const auto header = detail::split_csv(header_text);
  auto column = [&](std::string_view name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    return std::nullopt;
  };
  const auto c_session = column("session_id");
  const auto c_seq = column("seq");
  if (!c_session) throw Error(Errc::MissingClassColumn, "session_id");
  if (!c_seq) throw Error(Errc::MissingClassColumn, "seq");
  auto c_x = column("x"), c_y = column("y");
  const bool geographic = !c_x || !c_y;
  if (geographic) {
    c_x = column("lon");
    c_y = column("lat");
    if (!c_x || !c_y) throw Error(Errc::MissingClassColumn, "x,y or lat,lon");
  }
  std::vector<std::size_t> class_cols;
  for (const auto& cls : catalog.classes()) {
    auto c = column("prob_" + cls.name);
    if (!c) c = column("prob_" + ClassCatalog::column_token(cls.name));
    if (!c) throw Error(Errc::MissingClassColumn, "prob_" + ClassCatalog::column_token(cls.name));
    class_cols.push_back(*c);
  }

  struct Row {
    PointPrediction p;
    std::size_t line;
  };
  std::vector<Row> rows;
  for (std::size_t li = header_line + 1; li < lines.size(); ++li) {
    if (detail::trim(lines[li]).empty()) continue;
    const auto lineno = li + 1;
    const auto fields = detail::split_csv(lines[li]);
    if (fields.size() != header.size())
      throw Error(Errc::MalformedRow, "line " + std::to_string(lineno) + ": expected " + std::to_string(header.size()) +
                                          " fields, got " + std::to_string(fields.size()));
    Row row{{}, lineno};
    row.p.session_id = std::string(fields[*c_session]);
    if (row.p.session_id.empty()) throw Error(Errc::MalformedRow, "line " + std::to_string(lineno) + ": empty session_id");
    const auto seq = detail::parse_int(fields[*c_seq]);
    const auto x = detail::parse_double(fields[*c_x]);
    const auto y = detail::parse_double(fields[*c_y]);
    if (!seq || !x || !y) throw Error(Errc::MalformedRow, "line " + std::to_string(lineno) + ": bad seq or coordinate");
    row.p.seq = *seq;
    row.p.x = *x;
    row.p.y = *y;
    row.p.probs.reserve(class_cols.size());
    for (std::size_t k = 0; k < class_cols.size(); ++k) {
      const auto v = detail::parse_double(fields[class_cols[k]]);
      if (!v) throw Error(Errc::MalformedRow, "line " + std::to_string(lineno) + ": bad value for " + catalog[k].name);
      if (*v < 0.0 || *v > 1.0)
        throw Error(Errc::ProbabilityOutOfRange,
                    "line " + std::to_string(lineno) + ", class " + catalog[k].name + ": " + std::string(fields[class_cols[k]]));
      row.p.probs.push_back(*v);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(Errc::EmptyFile, "no data rows");

  PointPredictionSet set;
  set.catalog = catalog;
  for (auto& r : rows) set.sessions[r.p.session_id].push_back(std::move(r.p));
  for (auto& [id, pts] : set.sessions) {
    std::stable_sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.seq < b.seq; });
    for (std::size_t i = 1; i < pts.size(); ++i)
      if (pts[i].seq == pts[i - 1].seq)
        throw Error(Errc::MalformedRow, "session " + id + ": duplicate seq " + std::to_string(pts[i].seq));
  }

  if (geographic) {
    const auto& first = set.sessions.begin()->second.front();
    const LatLon o = origin.value_or(LatLon{first.y, first.x});
    for (auto& [id, pts] : set.sessions) {
      std::vector<LatLon> ll;
      ll.reserve(pts.size());
      for (const auto& p : pts) ll.push_back({p.y, p.x});
      const auto xy = latlon_to_local(ll, o);
      for (std::size_t i = 0; i < pts.size(); ++i) {
        pts[i].x = xy[i].x;
        pts[i].y = xy[i].y;
      }
    }
  }
  return set;
}

inline PointPredictionSet read_point_predictions(const std::filesystem::path& path, const ClassCatalog& catalog,
                                                 std::optional<LatLon> origin = std::nullopt) {
  const auto text = read_text_file(path);
  return parse_point_predictions(text, catalog, origin);
}

/// Serializes in the projected (x,y) form. Doubles use shortest round-trip
/// formatting, so reading the file back reproduces the set exactly.
inline std::string format_point_predictions(const PointPredictionSet& set) {
  std::string out = "session_id,seq,x,y";
  for (const auto& c : set.catalog.classes()) out += ",prob_" + ClassCatalog::column_token(c.name);
  out += '\n';
  char buf[64];
  auto put = [&](double v) {
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, ptr);
  };
  for (const auto& [id, pts] : set.sessions) {
    for (const auto& p : pts) {
      out += p.session_id;
      out += ',';
      out += std::to_string(p.seq);
      out += ',';
      put(p.x);
      out += ',';
      put(p.y);
      for (double v : p.probs) {
        out += ',';
        put(v);
      }
      out += '\n';
    }
  }
  return out;
}

namespace detail {
inline double median_of(std::vector<double> v) {
  const std::size_t n = v.size();
  const std::size_t mid = n / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

inline void append_consecutive_distances(std::span<const PointPrediction> pts, std::vector<double>& out) {
  for (std::size_t i = 1; i < pts.size(); ++i) out.push_back(std::hypot(pts[i].x - pts[i - 1].x, pts[i].y - pts[i - 1].y));
}
}  // namespace detail

/// Median distance between consecutive acquisitions of one session (mean of
/// the middle pair for an even count).
inline double median_consecutive_spacing(std::span<const PointPrediction> session) {
  if (session.size() < 2) throw Error(Errc::TooFewPoints, "need at least 2 points, got " + std::to_string(session.size()));
  std::vector<double> d;
  detail::append_consecutive_distances(session, d);
  return detail::median_of(std::move(d));
}

/// Same median over the consecutive distances of every session pooled.
inline double survey_spacing(const PointPredictionSet& set) {
  std::vector<double> d;
  for (const auto& [id, pts] : set.sessions) detail::append_consecutive_distances(pts, d);
  if (d.empty()) throw Error(Errc::TooFewPoints, "no session has 2 or more points");
  return detail::median_of(std::move(d));
}

/// All values of one class across sessions, in (session_id, seq) order.
inline std::vector<double> pool_class_values(const PointPredictionSet& set, ClassId class_id) {
  if (class_id >= set.catalog.size()) throw Error(Errc::UnknownClass, "class index " + std::to_string(class_id));
  std::vector<double> out;
  out.reserve(set.point_count());
  for (const auto& [id, pts] : set.sessions)
    for (const auto& p : pts) out.push_back(p.probs[class_id]);
  return out;
}

}  // namespace reefmap
