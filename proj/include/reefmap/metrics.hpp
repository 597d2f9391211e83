#pragma once

// Segmentation evaluation: confusion counts, pixel accuracy, per-class IoU
// and mean IoU over the classes that occur in truth or prediction.

#include <array>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "reefmap/core.hpp"
#include "reefmap/parallel.hpp"

namespace reefmap {

/// Rows are true classes, columns predicted classes. Pixels with truth 255
/// are not counted; pixels with a labeled truth but prediction 255 go to
/// `unpredicted` (per true class) and are not part of `evaluated_pixels`.
struct ConfusionCounts {
  ClassCatalog catalog;
  std::vector<std::uint64_t> counts;
  std::vector<std::uint64_t> unpredicted;
  std::uint64_t evaluated_pixels = 0;

  ConfusionCounts() = default;
  explicit ConfusionCounts(ClassCatalog cat)
      : catalog(std::move(cat)), counts(catalog.size() * catalog.size(), 0), unpredicted(catalog.size(), 0) {}

  std::size_t size() const { return catalog.size(); }
  std::uint64_t& at(std::size_t t, std::size_t p) { return counts[t * size() + p]; }
  std::uint64_t at(std::size_t t, std::size_t p) const { return counts[t * size() + p]; }

  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    if (o.size() != size()) throw Error(Errc::ClassMismatch, "confusion matrices of different sizes");
    for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += o.counts[i];
    for (std::size_t i = 0; i < unpredicted.size(); ++i) unpredicted[i] += o.unpredicted[i];
    evaluated_pixels += o.evaluated_pixels;
    return *this;
  }

  static ConfusionCounts from_matrix(ClassCatalog cat, const std::vector<std::vector<std::uint64_t>>& rows) {
    ConfusionCounts c(std::move(cat));
    if (rows.size() != c.size()) throw Error(Errc::LengthMismatch, "matrix rows vs catalog size");
    for (std::size_t t = 0; t < rows.size(); ++t) {
      if (rows[t].size() != c.size()) throw Error(Errc::LengthMismatch, "matrix columns vs catalog size");
      for (std::size_t p = 0; p < rows[t].size(); ++p) {
        c.at(t, p) = rows[t][p];
        c.evaluated_pixels += rows[t][p];
      }
    }
    return c;
  }
};

inline ConfusionCounts confusion_matrix(const LabelRaster& truth, const LabelRaster& pred, const ClassCatalog& catalog,
                                        unsigned workers = 0) {
  require_same_grid(truth.grid, pred.grid, "truth and prediction must share a grid");
  const std::size_t n_pix = truth.data.size();
  const unsigned w = resolve_workers(workers);
  const std::size_t chunks = std::max<std::size_t>(1, std::min<std::size_t>(w, n_pix / 65536 + 1));

  // Per-chunk 256x256 tallies over raw byte pairs; folded into the catalog
  // matrix afterwards so the hot loop has no branches.
  using Table = std::array<std::uint64_t, 256 * 256>;
  std::vector<Table> tables(chunks);
  const std::uint8_t* t = truth.data.data();
  const std::uint8_t* p = pred.data.data();
  parallel_for_blocks(chunks, w, [&](std::size_t cb, std::size_t ce) {
    for (std::size_t c = cb; c < ce; ++c) {
      Table& tab = tables[c];
      tab.fill(0);
      const std::size_t b = n_pix * c / chunks, e = n_pix * (c + 1) / chunks;
      for (std::size_t i = b; i < e; ++i) ++tab[static_cast<std::size_t>(t[i]) << 8 | p[i]];
    }
  });

  ConfusionCounts out(catalog);
  const std::size_t n = catalog.size();
  for (std::size_t tv = 0; tv < 256; ++tv)
    for (std::size_t pv = 0; pv < 256; ++pv) {
      std::uint64_t total = 0;
      for (const auto& tab : tables) total += tab[tv << 8 | pv];
      if (total == 0 || tv == kUnlabeled) continue;
      if (tv >= n) throw Error(Errc::LabelOutOfCatalog, "truth label " + std::to_string(tv));
      if (pv == kUnlabeled) {
        out.unpredicted[tv] += total;
        continue;
      }
      if (pv >= n) throw Error(Errc::LabelOutOfCatalog, "predicted label " + std::to_string(pv));
      out.at(tv, pv) += total;
      out.evaluated_pixels += total;
    }
  return out;
}

struct NormalizedConfusion {
  std::vector<double> matrix;  // row-major, N x N
  std::vector<bool> present;   // false for all-zero rows
};

inline NormalizedConfusion normalize_confusion(const ConfusionCounts& c) {
  const std::size_t n = c.size();
  NormalizedConfusion out{std::vector<double>(n * n, 0.0), std::vector<bool>(n, false)};
  for (std::size_t t = 0; t < n; ++t) {
    std::uint64_t row = 0;
    for (std::size_t p = 0; p < n; ++p) row += c.at(t, p);
    if (row == 0) continue;
    out.present[t] = true;
    for (std::size_t p = 0; p < n; ++p)
      out.matrix[t * n + p] = static_cast<double>(c.at(t, p)) / static_cast<double>(row);
  }
  return out;
}

inline double pixel_accuracy(const ConfusionCounts& c) {
  if (c.evaluated_pixels == 0) throw Error(Errc::NoEvaluatedPixels, "nothing to evaluate");
  std::uint64_t trace = 0;
  for (std::size_t k = 0; k < c.size(); ++k) trace += c.at(k, k);
  return static_cast<double>(trace) / static_cast<double>(c.evaluated_pixels);
}

/// TP / (TP + FP + FN) per class; nullopt when the denominator is zero.
inline std::vector<std::optional<double>> iou_per_class(const ConfusionCounts& c) {
  const std::size_t n = c.size();
  std::vector<std::optional<double>> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::uint64_t row = 0, col = 0;
    for (std::size_t j = 0; j < n; ++j) {
      row += c.at(k, j);
      col += c.at(j, k);
    }
    const std::uint64_t tp = c.at(k, k);
    const std::uint64_t denom = row + col - tp;
    if (denom > 0) out[k] = static_cast<double>(tp) / static_cast<double>(denom);
  }
  return out;
}

inline double mean_iou(std::span<const std::optional<double>> ious) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& v : ious)
    if (v) {
      sum += *v;
      ++n;
    }
  if (n == 0) throw Error(Errc::NoPresentClasses, "no class has a nonzero union");
  return sum / static_cast<double>(n);
}

struct EvalReport {
  std::string zone;
  ConfusionCounts counts;
  double accuracy = 0.0;
  std::vector<std::optional<double>> iou;
  double mean_iou = 0.0;
  NormalizedConfusion normalized;
};

inline EvalReport make_report(std::string zone, ConfusionCounts counts) {
  EvalReport r;
  r.zone = std::move(zone);
  r.accuracy = pixel_accuracy(counts);
  r.iou = iou_per_class(counts);
  r.mean_iou = mean_iou(r.iou);
  r.normalized = normalize_confusion(counts);
  r.counts = std::move(counts);
  return r;
}

inline EvalReport evaluate(const LabelRaster& truth, const LabelRaster& pred, const ClassCatalog& catalog,
                           std::string zone = "zone", unsigned workers = 0) {
  return make_report(std::move(zone), confusion_matrix(truth, pred, catalog, workers));
}

/// Per-zone reports followed by a "Total" row computed from the pooled
/// pixel counts of all zones.
inline std::vector<EvalReport> evaluate_zones(const std::vector<std::pair<std::string, ConfusionCounts>>& zones) {
  if (zones.empty()) throw Error(Errc::EmptyList, "no zones");
  std::vector<EvalReport> out;
  ConfusionCounts pooled(zones.front().second.catalog);
  for (const auto& [name, counts] : zones) {
    pooled += counts;
    out.push_back(make_report(name, counts));
  }
  if (zones.size() > 1) out.push_back(make_report("Total", std::move(pooled)));
  return out;
}

inline nlohmann::json to_json(const EvalReport& r) {
  const auto& cat = r.counts.catalog;
  const std::size_t n = cat.size();
  nlohmann::json iou = nlohmann::json::object();
  for (std::size_t k = 0; k < n; ++k) iou[cat[k].name] = r.iou[k] ? nlohmann::json(*r.iou[k]) : nlohmann::json(nullptr);
  nlohmann::json counts = nlohmann::json::array(), norm = nlohmann::json::array();
  for (std::size_t t = 0; t < n; ++t) {
    counts.push_back(std::vector<std::uint64_t>(r.counts.counts.begin() + static_cast<std::ptrdiff_t>(t * n),
                                                r.counts.counts.begin() + static_cast<std::ptrdiff_t>((t + 1) * n)));
    norm.push_back(std::vector<double>(r.normalized.matrix.begin() + static_cast<std::ptrdiff_t>(t * n),
                                       r.normalized.matrix.begin() + static_cast<std::ptrdiff_t>((t + 1) * n)));
  }
  nlohmann::json names = nlohmann::json::array();
  for (const auto& c : cat.classes()) names.push_back(c.name);
  return {{"zone", r.zone},
          {"classes", names},
          {"accuracy", r.accuracy},
          {"iou", iou},
          {"mean_iou", r.mean_iou},
          {"evaluated_pixels", r.counts.evaluated_pixels},
          {"unpredicted", r.counts.unpredicted},
          {"confusion", counts},
          {"normalized_confusion", norm},
          {"row_present", r.normalized.present}};
}

inline std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

/// Plain-text results table: one row per zone, IoU per class ("/" when the
/// class is absent), accuracy, mean IoU.
inline std::string format_report_table(const std::vector<EvalReport>& reports) {
  if (reports.empty()) return "";
  const auto& cat = reports.front().counts.catalog;
  std::vector<std::string> header = {"Zone"};
  for (const auto& c : cat.classes()) header.push_back(c.name);
  header.push_back("Accuracy");
  header.push_back("Mean IoU");
  std::vector<std::vector<std::string>> rows = {header};
  for (const auto& r : reports) {
    std::vector<std::string> row = {r.zone};
    for (const auto& v : r.iou) row.push_back(v ? fixed4(*v) : "/");
    row.push_back(fixed4(r.accuracy));
    row.push_back(fixed4(r.mean_iou));
    rows.push_back(std::move(row));
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& row : rows)
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
  std::ostringstream os;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t i = 0; i < rows[r].size(); ++i) {
      if (i) os << "  ";
      os << rows[r][i] << std::string(width[i] - rows[r][i].size(), ' ');
    }
    os << '\n';
    if (r == 0) {
      std::size_t total = 0;
      for (auto w : width) total += w + 2;
      os << std::string(total - 2, '-') << '\n';
    }
  }
  bool pooled = false;
  for (const auto& r : reports) pooled |= r.zone == "Total";
  if (pooled) os << "Total pools pixels across zones; averaging per-zone metrics would weight zones equally instead.\n";
  return os.str();
}

/// Row-normalized confusion matrix as CSV with a header of class names.
inline std::string confusion_csv(const EvalReport& r) {
  const auto& cat = r.counts.catalog;
  const std::size_t n = cat.size();
  std::ostringstream os;
  os << "true\\pred";
  for (const auto& c : cat.classes()) os << ',' << c.name;
  os << '\n';
  for (std::size_t t = 0; t < n; ++t) {
    os << cat[t].name;
    for (std::size_t p = 0; p < n; ++p) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.6f", r.normalized.matrix[t * n + p]);
      os << ',' << buf;
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace reefmap
