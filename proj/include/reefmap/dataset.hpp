#pragma once

// Training-dataset rounds.
//
// Round 0 tiles a coarse label raster on a regular lattice. Each later round
// swaps every tile's labels for the (possibly externally refined) masks the
// segmentation model predicted for it, keeping tile geometry fixed. A round
// lives on disk as
//
//   round_<n>/tiles/<tile_id>.grf   label patches (uint8 GRF)
//   round_<n>/manifest.json         tile table, weights, content hashes
//   round_<n>/train_config.json     what the external trainer consumes
//   round_<n>/pred/<tile_id>.grf    predicted masks coming back
//
// and manifest n+1 records the SHA-256 of manifest n, so a round can be
// verified back to round 0.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "reefmap/core.hpp"
#include "reefmap/grf.hpp"
#include "reefmap/hash.hpp"
#include "reefmap/parallel.hpp"

namespace reefmap {

struct Tile {
  std::string id;
  std::int64_t col = 0;  // origin pixel in the source grid
  std::int64_t row = 0;
  std::int64_t size = 0;
  double labeled_fraction = 0.0;
  std::vector<std::uint64_t> class_histogram;
  std::uint64_t unlabeled_count = 0;
  int replication = 1;
  std::string split = "train";
  std::string file;  // relative to the round directory
  std::string sha256;
  std::string sidecar_sha256;
  LabelRaster patch;  // not serialized
};

struct ManifestSource {
  std::string path;  // relative to the dataset root
  std::string sha256;
};

struct TileManifest {
  int round = 0;
  ClassCatalog catalog;
  GridSpec grid;
  std::int64_t tile_size = 512;
  double min_labeled_fraction = 0.5;
  int max_replication = 10;
  double val_fraction = 0.1;
  std::vector<Tile> tiles;  // sorted by id
  std::vector<double> rare_class_weights;
  std::vector<double> class_loss_weights;
  std::vector<ManifestSource> sources;
  std::string parent_hash;  // empty for round 0
};

inline std::string tile_id_for(std::int64_t lattice_row, std::int64_t lattice_col) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "r%04lld_c%04lld", static_cast<long long>(lattice_row), static_cast<long long>(lattice_col));
  return buf;
}

/// Deterministic train/val assignment from the tile id alone.
inline std::string split_for(const std::string& tile_id, double val_fraction) {
  const auto h = sha256_hex(tile_id);
  const auto bucket = std::stoul(h.substr(0, 8), nullptr, 16) % 10000u;
  return static_cast<double>(bucket) < val_fraction * 10000.0 ? "val" : "train";
}

inline GridSpec tile_grid(const GridSpec& source, std::int64_t col, std::int64_t row, std::int64_t size) {
  GridSpec g = source;
  g.origin_x = source.origin_x + static_cast<double>(col) * source.spacing;
  g.origin_y = source.origin_y - static_cast<double>(row) * source.spacing;
  g.width = size;
  g.height = size;
  return g;
}

/// Fills histogram, unlabeled count and labeled fraction from tile.patch.
inline void recount_tile(Tile& tile, std::size_t num_classes) {
  tile.class_histogram.assign(num_classes, 0);
  tile.unlabeled_count = 0;
  for (auto v : tile.patch.data) {
    if (v == kUnlabeled)
      ++tile.unlabeled_count;
    else
      ++tile.class_histogram.at(v);
  }
  const auto total = static_cast<double>(tile.size * tile.size);
  tile.labeled_fraction = 1.0 - static_cast<double>(tile.unlabeled_count) / total;
}

/// Non-overlapping size x size tiles on the lattice anchored at the raster
/// origin. Edge tiles are padded with 255; tiles whose labeled fraction is
/// below the threshold are dropped. Returns a round-0 manifest with
/// replication 1 everywhere.
inline TileManifest extract_tiles(const LabelRaster& labels, const ClassCatalog& catalog, std::int64_t size = 512,
                                  double min_labeled_fraction = 0.5, double val_fraction = 0.1, unsigned workers = 0) {
  if (size < 32) throw Error(Errc::TileTooSmall, "tile size " + std::to_string(size) + " < 32");
  validate_labels(labels, catalog);
  const auto& g = labels.grid;
  const std::int64_t nrows = (g.height + size - 1) / size;
  const std::int64_t ncols = (g.width + size - 1) / size;
  std::vector<Tile> all(static_cast<std::size_t>(nrows * ncols));

  parallel_for_blocks(all.size(), workers, [&](std::size_t b, std::size_t e) {
    for (std::size_t k = b; k < e; ++k) {
      const auto lr = static_cast<std::int64_t>(k) / ncols, lc = static_cast<std::int64_t>(k) % ncols;
      Tile& t = all[k];
      t.id = tile_id_for(lr, lc);
      t.col = lc * size;
      t.row = lr * size;
      t.size = size;
      t.patch = make_label_raster(tile_grid(g, t.col, t.row, size));
      const auto rows = std::min(size, g.height - t.row), cols = std::min(size, g.width - t.col);
      for (std::int64_t r = 0; r < rows; ++r)
        std::copy_n(labels.data.begin() + static_cast<std::ptrdiff_t>(labels.index(t.col, t.row + r)), cols,
                    t.patch.data.begin() + static_cast<std::ptrdiff_t>(r * size));
      recount_tile(t, catalog.size());
      t.split = split_for(t.id, val_fraction);
      t.file = "tiles/" + t.id + ".grf";
    }
  });

  TileManifest m;
  m.catalog = catalog;
  m.grid = g;
  m.tile_size = size;
  m.min_labeled_fraction = min_labeled_fraction;
  m.val_fraction = val_fraction;
  for (auto& t : all)
    if (t.labeled_fraction >= min_labeled_fraction && t.labeled_fraction > 0.0) m.tiles.push_back(std::move(t));
  std::sort(m.tiles.begin(), m.tiles.end(), [](const Tile& a, const Tile& b) { return a.id < b.id; });
  return m;
}

/// w_c = median(count over present classes) / count_c; absent classes get 0.
inline std::vector<double> rare_class_weights_from_counts(const std::vector<std::uint64_t>& counts) {
  std::vector<double> present;
  for (auto c : counts)
    if (c > 0) present.push_back(static_cast<double>(c));
  if (present.empty()) throw Error(Errc::NoLabeledPixels, "no labeled pixels");
  std::sort(present.begin(), present.end());
  const std::size_t n = present.size();
  const double median = n % 2 ? present[n / 2] : 0.5 * (present[n / 2 - 1] + present[n / 2]);
  std::vector<double> w(counts.size(), 0.0);
  for (std::size_t c = 0; c < counts.size(); ++c)
    if (counts[c] > 0) w[c] = median / static_cast<double>(counts[c]);
  return w;
}

inline std::vector<std::uint64_t> class_counts(const LabelRaster& labels, const ClassCatalog& catalog) {
  std::vector<std::uint64_t> counts(catalog.size(), 0);
  for (auto v : labels.data) {
    if (v == kUnlabeled) continue;
    if (!catalog.valid(v)) throw Error(Errc::LabelOutOfCatalog, "label " + std::to_string(v));
    ++counts[v];
  }
  return counts;
}

inline std::vector<double> rare_class_weights(const LabelRaster& labels, const ClassCatalog& catalog) {
  return rare_class_weights_from_counts(class_counts(labels, catalog));
}

/// Class pixel totals over the manifest's tiles (each tile counted once).
inline std::vector<std::uint64_t> manifest_class_counts(const TileManifest& m) {
  std::vector<std::uint64_t> counts(m.catalog.size(), 0);
  for (const auto& t : m.tiles)
    for (std::size_t c = 0; c < counts.size() && c < t.class_histogram.size(); ++c) counts[c] += t.class_histogram[c];
  return counts;
}

/// replication = clamp(round(max weight over classes present in the tile), 1, max_rep).
inline TileManifest apply_replication(TileManifest m, const std::vector<double>& weights, int max_rep = 10) {
  if (max_rep < 1) throw Error(Errc::BadParameters, "max replication must be >= 1");
  for (auto& t : m.tiles) {
    double w = 0.0;
    for (std::size_t c = 0; c < t.class_histogram.size() && c < weights.size(); ++c)
      if (t.class_histogram[c] > 0) w = std::max(w, weights[c]);
    t.replication = static_cast<int>(std::clamp<long long>(std::llround(w), 1, max_rep));
  }
  m.rare_class_weights = weights;
  m.max_replication = max_rep;
  return m;
}

/// Manual labels win wherever they are not 255.
inline LabelRaster merge_manual_annotations(const LabelRaster& labels, const LabelRaster& manual) {
  require_same_grid(labels.grid, manual.grid, "manual annotations must be on the label grid");
  LabelRaster out = labels;
  for (std::size_t i = 0; i < out.data.size(); ++i)
    if (manual.data[i] != kUnlabeled) out.data[i] = manual.data[i];
  return out;
}

struct TrainingHyperparams {
  std::string loss = "weighted_dice";
  std::string optimizer = "adam";
  int batch_size = 16;
  double learning_rate = 1e-5;
  double plateau_factor = 0.1;
  int plateau_patience = 5;
  std::string emphasized_class = "Sea Cucumber";
  double emphasized_weight = 7.0;
  std::map<std::string, double> weight_overrides;  // class name -> loss weight
};

/// 1.0 per class, except the emphasized class (Sea Cucumber by default)
/// which gets its configured weight, then explicit overrides.
inline std::vector<double> class_loss_weights(const ClassCatalog& catalog, const TrainingHyperparams& hp = {}) {
  std::vector<double> w(catalog.size(), 1.0);
  if (auto id = catalog.find(hp.emphasized_class)) w[*id] = hp.emphasized_weight;
  for (const auto& [name, value] : hp.weight_overrides) w[catalog.require(name)] = value;
  for (std::size_t c = 0; c < w.size(); ++c)
    if (!(w[c] >= 0.0) || !std::isfinite(w[c]))
      throw Error(Errc::InvalidWeights, catalog[c].name + ": " + std::to_string(w[c]));
  return w;
}

inline nlohmann::json emit_training_config(const TileManifest& m, const TrainingHyperparams& hp = {}) {
  const auto weights = m.class_loss_weights.empty() ? class_loss_weights(m.catalog, hp) : m.class_loss_weights;
  for (double w : weights)
    if (!(w >= 0.0) || !std::isfinite(w)) throw Error(Errc::InvalidWeights, std::to_string(w));
  if (hp.batch_size < 1 || !(hp.learning_rate > 0.0)) throw Error(Errc::BadParameters, "batch size / learning rate");

  nlohmann::json names = nlohmann::json::array();
  for (const auto& c : m.catalog.classes()) names.push_back(c.name);
  nlohmann::json train = nlohmann::json::array(), val = nlohmann::json::array();
  for (const auto& t : m.tiles) {
    nlohmann::json entry = {{"id", t.id}, {"file", t.file}, {"col", t.col}, {"row", t.row}, {"replication", t.replication}};
    (t.split == "val" ? val : train).push_back(entry);
  }
  return {{"round", m.round},
          {"manifest", "manifest.json"},
          {"class_names", names},
          {"ignore_index", kUnlabeled},
          {"tile_size", m.tile_size},
          {"batch_size", hp.batch_size},
          {"loss", {{"type", hp.loss}, {"class_weights", weights}}},
          {"optimizer", {{"type", hp.optimizer}, {"learning_rate", hp.learning_rate}}},
          {"lr_schedule", {{"type", "reduce_on_plateau"}, {"monitor", "val_loss"}, {"factor", hp.plateau_factor},
                           {"patience", hp.plateau_patience}}},
          {"train_tiles", train},
          {"val_tiles", val}};
}

/// Validates predicted masks against the manifest: one per tile, right size,
/// labels in the catalog.
inline void check_predicted_masks(const TileManifest& m, const std::map<std::string, LabelRaster>& masks) {
  std::map<std::string, const Tile*> by_id;
  for (const auto& t : m.tiles) by_id[t.id] = &t;
  for (const auto& [id, mask] : masks)
    if (!by_id.count(id)) throw Error(Errc::ExtraMask, id);
  for (const auto& t : m.tiles) {
    auto it = masks.find(t.id);
    if (it == masks.end()) throw Error(Errc::MissingMask, t.id);
    const auto& mask = it->second;
    if (mask.grid.width != t.size || mask.grid.height != t.size || mask.data.size() != static_cast<std::size_t>(t.size * t.size))
      throw Error(Errc::SizeMismatch, t.id + ": " + std::to_string(mask.grid.width) + "x" + std::to_string(mask.grid.height) +
                                          " for tile size " + std::to_string(t.size));
    for (auto v : mask.data)
      if (v != kUnlabeled && !m.catalog.valid(v))
        throw Error(Errc::LabelOutOfCatalog, t.id + ": label " + std::to_string(v));
  }
}

/// Next round: every tile's labels replaced by its predicted mask, geometry
/// unchanged, histograms, rare-class weights and replication recomputed.
inline TileManifest distill_round(const TileManifest& m, const std::map<std::string, LabelRaster>& masks,
                                  const std::string& parent_hash) {
  check_predicted_masks(m, masks);
  TileManifest next = m;
  next.round = m.round + 1;
  next.parent_hash = parent_hash;
  for (auto& t : next.tiles) {
    const auto& mask = masks.at(t.id);
    t.patch.grid = tile_grid(m.grid, t.col, t.row, t.size);
    t.patch.data = mask.data;
    recount_tile(t, m.catalog.size());
    t.sha256.clear();
    t.sidecar_sha256.clear();
  }
  return apply_replication(std::move(next), rare_class_weights_from_counts(manifest_class_counts(next)), m.max_replication);
}

/// Stand-in for the external segmentation model: each labeled pixel is
/// replaced, with probability noise_rate, by a uniformly drawn catalog label.
/// 255 pixels (tile padding) are left alone. Each tile has its own stream
/// derived from (seed, tile id), so output does not depend on iteration order.
inline std::map<std::string, LabelRaster> mock_segment(const std::map<std::string, LabelRaster>& truth,
                                                       std::size_t num_classes, double noise_rate, std::uint64_t seed) {
  if (!(noise_rate >= 0.0 && noise_rate <= 1.0)) throw Error(Errc::BadNoiseRate, std::to_string(noise_rate));
  if (num_classes == 0 || num_classes >= kUnlabeled) throw Error(Errc::BadParameters, "class count");
  std::map<std::string, LabelRaster> out;
  for (const auto& [id, patch] : truth) {
    const auto h = sha256_hex(id);
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(std::stoul(h.substr(0, 8), nullptr, 16)),
                      static_cast<std::uint32_t>(std::stoul(h.substr(8, 8), nullptr, 16))};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::uniform_int_distribution<int> label(0, static_cast<int>(num_classes) - 1);
    LabelRaster mask = patch;
    for (auto& v : mask.data) {
      if (v == kUnlabeled) continue;
      const double u = coin(rng);
      const int l = label(rng);
      if (u < noise_rate) v = static_cast<std::uint8_t>(l);
    }
    out.emplace(id, std::move(mask));
  }
  return out;
}

inline std::map<std::string, LabelRaster> manifest_patches(const TileManifest& m) {
  std::map<std::string, LabelRaster> out;
  for (const auto& t : m.tiles) out.emplace(t.id, t.patch);
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::json to_json(const TileManifest& m) {
  nlohmann::json tiles = nlohmann::json::array();
  for (const auto& t : m.tiles)
    tiles.push_back({{"id", t.id},
                     {"col", t.col},
                     {"row", t.row},
                     {"size", t.size},
                     {"labeled_fraction", t.labeled_fraction},
                     {"class_histogram", t.class_histogram},
                     {"unlabeled_count", t.unlabeled_count},
                     {"replication", t.replication},
                     {"split", t.split},
                     {"file", t.file},
                     {"sha256", t.sha256},
                     {"sidecar_sha256", t.sidecar_sha256}});
  nlohmann::json sources = nlohmann::json::array();
  for (const auto& s : m.sources) sources.push_back({{"path", s.path}, {"sha256", s.sha256}});
  return {{"format", "reefmap-tile-manifest/1"},
          {"round", m.round},
          {"parent_hash", m.parent_hash},
          {"catalog", to_json(m.catalog)},
          {"grid", to_json(m.grid)},
          {"tile_size", m.tile_size},
          {"min_labeled_fraction", m.min_labeled_fraction},
          {"max_replication", m.max_replication},
          {"val_fraction", m.val_fraction},
          {"rare_class_weights", m.rare_class_weights},
          {"class_loss_weights", m.class_loss_weights},
          {"sources", sources},
          {"tiles", tiles}};
}

inline TileManifest manifest_from_json(const nlohmann::json& j) {
  try {
    TileManifest m;
    if (j.value("format", std::string{}) != "reefmap-tile-manifest/1")
      throw Error(Errc::MalformedManifest, "unknown manifest format");
    m.round = j.at("round").get<int>();
    m.parent_hash = j.at("parent_hash").get<std::string>();
    m.catalog = catalog_from_json(j.at("catalog"));
    m.grid = grid_from_json(j.at("grid"));
    m.tile_size = j.at("tile_size").get<std::int64_t>();
    m.min_labeled_fraction = j.at("min_labeled_fraction").get<double>();
    m.max_replication = j.at("max_replication").get<int>();
    m.val_fraction = j.at("val_fraction").get<double>();
    m.rare_class_weights = j.at("rare_class_weights").get<std::vector<double>>();
    m.class_loss_weights = j.at("class_loss_weights").get<std::vector<double>>();
    for (const auto& s : j.at("sources")) m.sources.push_back({s.at("path").get<std::string>(), s.at("sha256").get<std::string>()});
    for (const auto& tj : j.at("tiles")) {
      Tile t;
      t.id = tj.at("id").get<std::string>();
      t.col = tj.at("col").get<std::int64_t>();
      t.row = tj.at("row").get<std::int64_t>();
      t.size = tj.at("size").get<std::int64_t>();
      t.labeled_fraction = tj.at("labeled_fraction").get<double>();
      t.class_histogram = tj.at("class_histogram").get<std::vector<std::uint64_t>>();
      t.unlabeled_count = tj.at("unlabeled_count").get<std::uint64_t>();
      t.replication = tj.at("replication").get<int>();
      t.split = tj.at("split").get<std::string>();
      t.file = tj.at("file").get<std::string>();
      t.sha256 = tj.at("sha256").get<std::string>();
      t.sidecar_sha256 = tj.at("sidecar_sha256").get<std::string>();
      if (t.replication < 1) throw Error(Errc::MalformedManifest, t.id + ": replication < 1");
      m.tiles.push_back(std::move(t));
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::MalformedManifest, e.what());
  }
}

inline fs::path round_dir(const fs::path& root, int round) { return root / ("round_" + std::to_string(round)); }

/// Writes tiles, manifest.json and train_config.json for m.round, filling
/// the tile hashes. Returns the SHA-256 of the manifest file.
inline std::string write_round(const fs::path& root, TileManifest& m, const TrainingHyperparams& hp = {}) {
  const auto dir = round_dir(root, m.round);
  for (auto& t : m.tiles) {
    const auto path = dir / t.file;
    write_grf(path, t.patch);
    t.sha256 = sha256_file(path);
    t.sidecar_sha256 = sha256_file(grf_sidecar_path(path));
  }
  const std::string text = to_json(m).dump(2) + "\n";
  write_text_file(dir / "manifest.json", text);
  write_json_file(dir / "train_config.json", emit_training_config(m, hp));
  return sha256_hex(text);
}

inline TileManifest read_manifest(const fs::path& root, int round) {
  return manifest_from_json(read_json_file(round_dir(root, round) / "manifest.json"));
}

/// Manifest plus tile patches.
inline TileManifest load_round(const fs::path& root, int round) {
  auto m = read_manifest(root, round);
  const auto dir = round_dir(root, round);
  for (auto& t : m.tiles) t.patch = read_label_grf(dir / t.file);
  return m;
}

/// Highest n with round_<n>/manifest.json under root, or -1.
inline int latest_round(const fs::path& root) {
  int n = -1;
  while (fs::exists(round_dir(root, n + 1) / "manifest.json")) ++n;
  return n;
}

/// Reads round_<n>/pred/*.grf. Every manifest tile must have a mask and no
/// other .grf may be present.
inline std::map<std::string, LabelRaster> read_predicted_masks(const fs::path& root, const TileManifest& m) {
  const auto dir = round_dir(root, m.round) / "pred";
  std::map<std::string, LabelRaster> masks;
  if (fs::exists(dir)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_regular_file() && e.path().extension() == ".grf") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::map<std::string, bool> known;
    for (const auto& t : m.tiles) known[t.id] = true;
    for (const auto& f : files) {
      const auto id = f.stem().string();
      if (!known.count(id)) throw Error(Errc::ExtraMask, id);
      masks.emplace(id, read_label_grf(f));
    }
  }
  for (const auto& t : m.tiles)
    if (!masks.count(t.id)) throw Error(Errc::MissingMask, t.id);
  return masks;
}

struct VerifyReport {
  bool ok = true;
  std::vector<std::string> problems;
};

/// Recomputes every hash referenced by round n and, recursively, by its
/// ancestors.
inline VerifyReport verify_round(const fs::path& root, int round) {
  VerifyReport rep;
  auto fail = [&](std::string msg) {
    rep.ok = false;
    rep.problems.push_back(std::move(msg));
  };
  for (int r = round; r >= 0; --r) {
    const auto dir = round_dir(root, r);
    TileManifest m;
    try {
      m = read_manifest(root, r);
    } catch (const Error& e) {
      fail("round " + std::to_string(r) + ": " + e.what());
      continue;
    }
    if (m.round != r) fail("round " + std::to_string(r) + ": manifest says round " + std::to_string(m.round));
    for (const auto& t : m.tiles) {
      const auto path = dir / t.file;
      if (!fs::exists(path) || !fs::exists(grf_sidecar_path(path))) {
        fail("round " + std::to_string(r) + ": missing " + t.file);
        continue;
      }
      if (sha256_file(path) != t.sha256) fail("round " + std::to_string(r) + ": content changed: " + t.file);
      if (sha256_file(grf_sidecar_path(path)) != t.sidecar_sha256)
        fail("round " + std::to_string(r) + ": content changed: " + t.file + ".json");
    }
    for (const auto& s : m.sources) {
      const auto path = root / s.path;
      if (!fs::exists(path))
        fail("round " + std::to_string(r) + ": missing source " + s.path);
      else if (sha256_file(path) != s.sha256)
        fail("round " + std::to_string(r) + ": source changed: " + s.path);
    }
    if (r > 0) {
      const auto parent = round_dir(root, r - 1) / "manifest.json";
      if (!fs::exists(parent))
        fail("round " + std::to_string(r) + ": parent manifest missing");
      else if (sha256_file(parent) != m.parent_hash)
        fail("round " + std::to_string(r) + ": parent manifest hash mismatch");
    } else if (!m.parent_hash.empty()) {
      fail("round 0 has a parent hash");
    }
  }
  return rep;
}

}  // namespace reefmap
