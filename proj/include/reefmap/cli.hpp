#pragma once

// Command-line driver. Every subcommand reads from and writes to a work
// directory laid out as <workdir>/<stage>/..., records the hashes of its
// inputs and outputs in <stage>/stage.json, and skips itself when nothing
// changed.
//
// Exit codes: 0 ok, 1 unexpected, 2 usage, 3 invalid input, 4 inconsistent
// data, 5 I/O.

#include <cstdlib>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "reefmap/analytics.hpp"
#include "reefmap/annotate.hpp"
#include "reefmap/dataset.hpp"
#include "reefmap/grf.hpp"
#include "reefmap/hash.hpp"
#include "reefmap/ingest.hpp"
#include "reefmap/metrics.hpp"
#include "reefmap/pipeline.hpp"
#include "reefmap/png.hpp"
#include "reefmap/synth.hpp"

namespace reefmap::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitValidation = 3;
inline constexpr int kExitInconsistent = 4;
inline constexpr int kExitIo = 5;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline int exit_code(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::Validation: return kExitValidation;
    case ErrorCategory::Inconsistency: return kExitInconsistent;
    case ErrorCategory::Io: return kExitIo;
  }
  return kExitIo;
}

struct Options {
  std::string workdir;
  std::string config;
  std::string input;
  std::string catalog;
  std::string origin;  // "lat,lon"
  std::optional<double> grid_spacing;
  std::string grid;    // grid JSON for rasterize
  std::string target;  // grid JSON for upsample
  std::string percentiles = "0.01,0.99";
  double epsilon = 1e-6;
  std::int64_t tile_size = 512;
  double min_labeled = 0.5;
  int max_replication = 10;
  double val_fraction = 0.1;
  std::string manual;
  std::vector<std::string> class_weights;  // Name=weight
  int connectivity = 8;
  std::size_t min_pixels = 4;
  double threshold = 0.5;
  std::vector<std::string> classes;
  std::string points;
  std::uint64_t seed = 0;
  unsigned workers = 0;
  std::vector<std::string> truth;
  std::vector<std::string> pred;
  std::vector<std::string> zones;
  double extent = 50.0;
  double transect_spacing = 0.5;
  double point_step = 0.3;
  double noise = 0.0;
  int sessions = 1;
  bool sea_cucumber = false;
  std::optional<double> mock_noise;
  std::optional<int> round;
};

struct Context {
  fs::path workdir;
  unsigned workers = 0;
  std::ostream& out;
  std::ostream& err;
};

// ---------------------------------------------------------------------------
// Stage bookkeeping

inline std::string display_path(const Context& ctx, const fs::path& p) {
  std::error_code ec;
  const auto abs = fs::weakly_canonical(p, ec);
  const auto root = fs::weakly_canonical(ctx.workdir, ec);
  if (!ec) {
    const auto rel = abs.lexically_relative(root);
    if (!rel.empty() && *rel.begin() != "..") return rel.generic_string();
  }
  return p.generic_string();
}

class StageRun {
 public:
  StageRun(const Context& ctx, std::string name, nlohmann::json params, std::vector<fs::path> inputs)
      : ctx_(ctx), name_(std::move(name)), dir_(ctx.workdir / name_), params_(std::move(params)) {
    for (const auto& p : inputs) {
      if (!fs::exists(p)) throw Error(Errc::Io, "missing input " + p.string());
      inputs_[display_path(ctx, p)] = sha256_file(p);
      if (p.extension() == ".grf" && fs::exists(grf_sidecar_path(p)))
        inputs_[display_path(ctx, grf_sidecar_path(p))] = sha256_file(grf_sidecar_path(p));
    }
  }

  const fs::path& dir() const { return dir_; }

  bool up_to_date() const {
    const auto record = dir_ / "stage.json";
    if (!fs::exists(record)) return false;
    nlohmann::json j;
    try {
      j = read_json_file(record);
    } catch (const Error&) {
      return false;
    }
    if (j.value("params", nlohmann::json()) != params_ || j.value("inputs", nlohmann::json()) != nlohmann::json(inputs_))
      return false;
    const auto outputs = j.value("outputs", nlohmann::json::object());
    for (const auto& [rel, hash] : outputs.items()) {
      const auto p = dir_ / rel;
      if (!fs::exists(p) || sha256_file(p) != hash.get<std::string>()) return false;
    }
    ctx_.out << name_ << ": up to date\n";
    return true;
  }

  /// Clears previous outputs.
  void begin() const {
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }

  void finish() const {
    std::map<std::string, std::string> outputs;
    for (const auto& e : fs::recursive_directory_iterator(dir_))
      if (e.is_regular_file() && e.path().filename() != "stage.json")
        outputs[e.path().lexically_relative(dir_).generic_string()] = sha256_file(e.path());
    write_json_file(dir_ / "stage.json", {{"stage", name_}, {"params", params_}, {"inputs", inputs_}, {"outputs", outputs}});
  }

 private:
  const Context& ctx_;
  std::string name_;
  fs::path dir_;
  nlohmann::json params_;
  std::map<std::string, std::string> inputs_;
};

// ---------------------------------------------------------------------------
// Input resolution

inline std::string file_token(std::string s) {
  for (auto& ch : s)
    if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '-' && ch != '.') ch = '_';
  return s;
}

inline std::optional<fs::path> first_existing(std::initializer_list<fs::path> candidates) {
  for (const auto& c : candidates)
    if (fs::exists(c)) return c;
  return std::nullopt;
}

inline ClassCatalog resolve_catalog(const Context& ctx, const Options& o) {
  if (!o.catalog.empty()) return catalog_from_json(read_json_file(o.catalog));
  if (auto p = first_existing({ctx.workdir / "ingest" / "catalog.json", ctx.workdir / "synth" / "catalog.json"}))
    return catalog_from_json(read_json_file(*p));
  return ClassCatalog::default_catalog(false);
}

inline fs::path resolve_points(const Context& ctx, const Options& o) {
  if (!o.input.empty()) return o.input;
  if (auto p = first_existing({ctx.workdir / "ingest" / "points.csv", ctx.workdir / "synth" / "points.csv"})) return *p;
  throw UsageError("no point predictions: pass --input or run ingest (or synth) first");
}

inline std::optional<LatLon> parse_origin(const std::string& s) {
  if (s.empty()) return std::nullopt;
  const auto comma = s.find(',');
  if (comma == std::string::npos) throw UsageError("--origin expects lat,lon");
  auto lat = reefmap::detail::parse_double(s.substr(0, comma));
  auto lon = reefmap::detail::parse_double(s.substr(comma + 1));
  if (!lat || !lon) throw UsageError("--origin expects lat,lon");
  return LatLon{*lat, *lon};
}

inline std::pair<double, double> parse_percentiles(const std::string& s) {
  const auto comma = s.find(',');
  if (comma == std::string::npos) throw UsageError("--percentiles expects low,high");
  auto lo = reefmap::detail::parse_double(s.substr(0, comma));
  auto hi = reefmap::detail::parse_double(s.substr(comma + 1));
  if (!lo || !hi) throw UsageError("--percentiles expects two numbers");
  return {*lo, *hi};
}

inline std::vector<fs::path> class_files(const fs::path& dir, const std::string& prefix, const ClassCatalog& cat) {
  std::vector<fs::path> out;
  for (const auto& c : cat.classes()) out.push_back(dir / (prefix + ClassCatalog::column_token(c.name) + ".grf"));
  return out;
}

inline fs::path default_labels(const Context& ctx) {
  if (auto p = first_existing({ctx.workdir / "upsample" / "labels.grf", ctx.workdir / "label" / "labels.grf"})) return *p;
  throw UsageError("no label raster: pass --input or run label first");
}

// ---------------------------------------------------------------------------
// Subcommands

inline int cmd_ingest(const Context& ctx, const Options& o) {
  if (o.input.empty()) throw UsageError("ingest needs --input");
  const auto cat = resolve_catalog(ctx, o);
  StageRun st(ctx, "ingest", {{"catalog", to_json(cat)}, {"origin", o.origin}}, {o.input});
  if (st.up_to_date()) return kExitOk;
  const auto set = read_point_predictions(o.input, cat, parse_origin(o.origin));
  st.begin();
  write_text_file(st.dir() / "points.csv", format_point_predictions(set));
  write_json_file(st.dir() / "catalog.json", to_json(cat));
  nlohmann::json sessions = nlohmann::json::object();
  for (const auto& [id, pts] : set.sessions) sessions[id] = {{"points", pts.size()}};
  write_json_file(st.dir() / "summary.json", {{"points", set.point_count()}, {"sessions", sessions}});
  st.finish();
  ctx.out << "ingest: " << set.point_count() << " points in " << set.sessions.size() << " sessions\n";
  return kExitOk;
}

inline int cmd_spacing(const Context& ctx, const Options& o) {
  const auto src = resolve_points(ctx, o);
  const auto cat = resolve_catalog(ctx, o);
  StageRun st(ctx, "spacing", {{"catalog", to_json(cat)}, {"origin", o.origin}}, {src});
  if (!st.up_to_date()) {
    const auto set = read_point_predictions(src, cat, parse_origin(o.origin));
    nlohmann::json sessions = nlohmann::json::object();
    for (const auto& [id, pts] : set.sessions) sessions[id] = median_consecutive_spacing(pts);
    st.begin();
    write_json_file(st.dir() / "spacing.json", {{"sessions", sessions}, {"survey", survey_spacing(set)}});
    st.finish();
  }
  const auto j = read_json_file(st.dir() / "spacing.json");
  for (const auto& [id, v] : j["sessions"].items()) ctx.out << id << ": " << v.get<double>() << " m\n";
  ctx.out << "survey: " << j["survey"].get<double>() << " m\n";
  return kExitOk;
}

inline int cmd_rasterize(const Context& ctx, const Options& o) {
  const auto src = resolve_points(ctx, o);
  const auto cat = resolve_catalog(ctx, o);
  std::optional<GridSpec> target;
  if (!o.grid.empty()) target = grid_from_json(read_json_file(o.grid));
  StageRun st(ctx, "rasterize",
              {{"catalog", to_json(cat)},
               {"origin", o.origin},
               {"grid_spacing", o.grid_spacing ? nlohmann::json(*o.grid_spacing) : nlohmann::json(nullptr)},
               {"grid", target ? to_json(*target) : nlohmann::json(nullptr)}},
              {src});
  if (st.up_to_date()) return kExitOk;
  const auto set = read_point_predictions(src, cat, parse_origin(o.origin));
  const GridSpec grid = target ? *target : survey_grid(set, o.grid_spacing);
  st.begin();
  write_json_file(st.dir() / "grid.json", to_json(grid));
  std::vector<std::vector<ProbabilityRaster>> by_class(cat.size());
  for (const auto& [id, pts] : set.sessions) {
    auto sr = rasterize_session(id, pts, cat, grid, ctx.workers);
    for (std::size_t c = 0; c < cat.size(); ++c) {
      write_grf(st.dir() / "sessions" / (file_token(id) + "_" + ClassCatalog::column_token(cat[c].name) + ".grf"),
                sr.classes[c]);
      by_class[c].push_back(std::move(sr.classes[c]));
    }
  }
  const auto merged_files = class_files(st.dir(), "merged_", cat);
  for (std::size_t c = 0; c < cat.size(); ++c) {
    write_grf(merged_files[c], merge_session_rasters(by_class[c], ctx.workers));
    by_class[c].clear();
  }
  st.finish();
  ctx.out << "rasterize: " << set.sessions.size() << " sessions onto " << grid.width << "x" << grid.height << " @ "
          << grid.spacing << " m\n";
  return kExitOk;
}

inline int cmd_normalize(const Context& ctx, const Options& o) {
  const auto src = resolve_points(ctx, o);
  const auto cat = resolve_catalog(ctx, o);
  const auto [pl, ph] = parse_percentiles(o.percentiles);
  auto inputs = class_files(ctx.workdir / "rasterize", "merged_", cat);
  for (const auto& p : inputs)
    if (!fs::exists(p)) throw UsageError("missing " + p.string() + ": run rasterize first");
  inputs.push_back(src);
  StageRun st(ctx, "normalize",
              {{"catalog", to_json(cat)}, {"origin", o.origin}, {"percentiles", {pl, ph}}, {"epsilon", o.epsilon}}, inputs);
  if (st.up_to_date()) return kExitOk;
  const auto set = read_point_predictions(src, cat, parse_origin(o.origin));
  const auto params = fit_normalization(set, pl, ph, o.epsilon);
  st.begin();
  write_json_file(st.dir() / "params.json", to_json(params, cat));
  const auto out_files = class_files(st.dir(), "normalized_", cat);
  for (std::size_t c = 0; c < cat.size(); ++c) {
    auto merged = read_probability_grf(inputs[c]);
    if (merged.class_id != c) throw Error(Errc::ClassMismatch, inputs[c].string());
    write_grf(out_files[c], normalize_raster(merged, params.classes[c], params.epsilon, ctx.workers));
  }
  st.finish();
  ctx.out << "normalize: " << cat.size() << " classes, percentiles " << pl << "," << ph << "\n";
  return kExitOk;
}

inline int cmd_label(const Context& ctx, const Options& o) {
  const auto cat = resolve_catalog(ctx, o);
  const auto inputs = class_files(ctx.workdir / "normalize", "normalized_", cat);
  for (const auto& p : inputs)
    if (!fs::exists(p)) throw UsageError("missing " + p.string() + ": run normalize first");
  StageRun st(ctx, "label", {{"catalog", to_json(cat)}}, inputs);
  if (st.up_to_date()) return kExitOk;
  std::vector<ProbabilityRaster> normalized;
  for (const auto& p : inputs) normalized.push_back(read_probability_grf(p));
  const auto labels = argmax_label(normalized, cat, ctx.workers);
  st.begin();
  write_grf(st.dir() / "labels.grf", labels);
  write_label_png(st.dir() / "labels.png", labels, cat);
  st.finish();
  const auto unlabeled = std::count(labels.data.begin(), labels.data.end(), kUnlabeled);
  ctx.out << "label: " << labels.grid.width << "x" << labels.grid.height << ", "
          << 100.0 * static_cast<double>(unlabeled) / static_cast<double>(labels.data.size()) << "% unlabeled\n";
  return kExitOk;
}

inline int cmd_upsample(const Context& ctx, const Options& o) {
  if (o.target.empty()) throw UsageError("upsample needs --target <grid.json>");
  const fs::path src = o.input.empty() ? ctx.workdir / "label" / "labels.grf" : fs::path(o.input);
  const auto cat = resolve_catalog(ctx, o);
  StageRun st(ctx, "upsample", {{"catalog", to_json(cat)}}, {src, o.target});
  if (st.up_to_date()) return kExitOk;
  const auto dst = grid_from_json(read_json_file(o.target));
  const auto labels = read_label_grf(src);
  if (upsample_is_lossy(labels.grid, dst))
    ctx.err << "warning: target spacing " << dst.spacing << " is coarser than source " << labels.grid.spacing << "\n";
  const auto up = upsample_nearest(labels, dst, ctx.workers);
  st.begin();
  write_grf(st.dir() / "labels.grf", up);
  write_label_png(st.dir() / "labels.png", up, cat);
  st.finish();
  ctx.out << "upsample: " << up.grid.width << "x" << up.grid.height << " @ " << up.grid.spacing << " m\n";
  return kExitOk;
}

inline TrainingHyperparams hyperparams(const Options& o) {
  TrainingHyperparams hp;
  for (const auto& kv : o.class_weights) {
    const auto eq = kv.rfind('=');
    if (eq == std::string::npos) throw UsageError("--class-weight expects Name=weight");
    const auto w = reefmap::detail::parse_double(kv.substr(eq + 1));
    if (!w) throw UsageError("--class-weight expects Name=weight");
    hp.weight_overrides[kv.substr(0, eq)] = *w;
  }
  return hp;
}

inline int cmd_tile(const Context& ctx, const Options& o) {
  const fs::path src = o.input.empty() ? default_labels(ctx) : fs::path(o.input);
  const auto cat = resolve_catalog(ctx, o);
  const auto hp = hyperparams(o);
  std::vector<fs::path> inputs = {src};
  if (!o.manual.empty()) inputs.push_back(o.manual);
  StageRun st(ctx, "dataset",
              {{"catalog", to_json(cat)},
               {"tile_size", o.tile_size},
               {"min_labeled", o.min_labeled},
               {"max_replication", o.max_replication},
               {"val_fraction", o.val_fraction},
               {"class_weights", o.class_weights}},
              inputs);
  if (st.up_to_date()) return kExitOk;
  auto labels = read_label_grf(src);
  validate_labels(labels, cat);
  if (!o.manual.empty()) labels = merge_manual_annotations(labels, read_label_grf(o.manual));

  auto m = extract_tiles(labels, cat, o.tile_size, o.min_labeled, o.val_fraction, ctx.workers);
  if (!m.tiles.empty())
    m = apply_replication(std::move(m), rare_class_weights_from_counts(manifest_class_counts(m)), o.max_replication);
  m.max_replication = o.max_replication;
  m.class_loss_weights = class_loss_weights(cat, hp);

  st.begin();
  write_grf(st.dir() / "source" / "labels.grf", labels);
  for (const auto* rel : {"source/labels.grf", "source/labels.grf.json"})
    m.sources.push_back({rel, sha256_file(st.dir() / rel)});
  write_round(st.dir(), m, hp);
  st.finish();
  std::size_t copies = 0;
  for (const auto& t : m.tiles) copies += static_cast<std::size_t>(t.replication);
  ctx.out << "tile: " << m.tiles.size() << " tiles (" << copies << " with replication) in round_0\n";
  return kExitOk;
}

inline fs::path dataset_root(const Context& ctx) {
  const auto root = ctx.workdir / "dataset";
  if (latest_round(root) < 0) throw UsageError("no dataset: run tile first");
  return root;
}

inline int cmd_distill_init(const Context& ctx, const Options& o) {
  const auto root = dataset_root(ctx);
  const int n = o.round ? *o.round : latest_round(root);
  const auto m = load_round(root, n);
  const auto pred = round_dir(root, n) / "pred";
  fs::create_directories(pred);
  if (o.mock_noise) {
    const auto masks = mock_segment(manifest_patches(m), m.catalog.size(), *o.mock_noise, o.seed);
    for (const auto& [id, mask] : masks) write_grf(pred / (id + ".grf"), mask);
    ctx.out << "distill init: wrote " << masks.size() << " mock masks to " << display_path(ctx, pred) << "\n";
  } else {
    ctx.out << "distill init: place one mask per tile in " << display_path(ctx, pred) << "\n";
    for (const auto& t : m.tiles) ctx.out << "  " << t.id << ".grf\n";
  }
  return kExitOk;
}

inline int cmd_distill_next(const Context& ctx, const Options& o) {
  const auto root = dataset_root(ctx);
  int n = -1;
  if (o.round) {
    n = *o.round;
  } else {
    for (int r = latest_round(root); r >= 0; --r)
      if (fs::exists(round_dir(root, r) / "pred")) {
        n = r;
        break;
      }
    if (n < 0) throw UsageError("no round has a pred/ directory: run distill init first");
  }
  const auto m = read_manifest(root, n);
  const auto masks = read_predicted_masks(root, m);
  const auto parent = sha256_file(round_dir(root, n) / "manifest.json");
  auto next = distill_round(m, masks, parent);
  write_round(root, next, hyperparams(o));
  ctx.out << "distill next: round_" << n << " -> round_" << next.round << " (" << next.tiles.size() << " tiles)\n";
  return kExitOk;
}

inline int cmd_distill_verify(const Context& ctx, const Options& o) {
  const auto root = dataset_root(ctx);
  const int n = o.round ? *o.round : latest_round(root);
  const auto rep = verify_round(root, n);
  if (!rep.ok) {
    for (const auto& p : rep.problems) ctx.err << "  " << p << "\n";
    throw Error(Errc::VerificationFailed, "round_" + std::to_string(n) + ": " + std::to_string(rep.problems.size()) +
                                              " problem(s)");
  }
  ctx.out << "distill verify: round_" << n << " and its ancestors verified\n";
  return kExitOk;
}

inline int cmd_evaluate(const Context& ctx, const Options& o) {
  std::vector<std::string> truth = o.truth, pred = o.pred;
  if (truth.empty()) truth = {(ctx.workdir / "synth" / "truth.grf").string()};
  if (pred.empty()) pred = {default_labels(ctx).string()};
  if (truth.size() != pred.size()) throw UsageError("--truth and --pred must be given the same number of times");
  std::vector<std::string> zones = o.zones;
  if (zones.empty())
    for (std::size_t i = 0; i < truth.size(); ++i) zones.push_back(truth.size() == 1 ? "zone" : "zone" + std::to_string(i + 1));
  if (zones.size() != truth.size()) throw UsageError("--zone must be given once per truth/pred pair");
  const auto cat = resolve_catalog(ctx, o);
  std::vector<fs::path> inputs;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    inputs.push_back(truth[i]);
    inputs.push_back(pred[i]);
  }
  StageRun st(ctx, "evaluate", {{"catalog", to_json(cat)}, {"zones", zones}}, inputs);
  if (!st.up_to_date()) {
    std::vector<std::pair<std::string, ConfusionCounts>> counts;
    for (std::size_t i = 0; i < truth.size(); ++i)
      counts.emplace_back(zones[i], confusion_matrix(read_label_grf(truth[i]), read_label_grf(pred[i]), cat, ctx.workers));
    const auto reports = evaluate_zones(counts);
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : reports) j.push_back(to_json(r));
    st.begin();
    write_json_file(st.dir() / "report.json", j);
    write_text_file(st.dir() / "report.txt", format_report_table(reports));
    write_text_file(st.dir() / "confusion.csv", confusion_csv(reports.back()));
    st.finish();
  }
  ctx.out << read_text_file(st.dir() / "report.txt");
  return kExitOk;
}

inline int cmd_analyze(const Context& ctx, const Options& o) {
  const fs::path src = o.input.empty() ? default_labels(ctx) : fs::path(o.input);
  const auto cat = resolve_catalog(ctx, o);
  std::vector<ClassId> ids;
  if (o.classes.empty())
    for (const auto& c : cat.classes()) ids.push_back(c.index);
  else
    for (const auto& name : o.classes) ids.push_back(cat.require(name));
  std::optional<fs::path> points;
  if (!o.points.empty())
    points = o.points;
  else if (auto p = first_existing({ctx.workdir / "ingest" / "points.csv", ctx.workdir / "synth" / "points.csv"}))
    points = *p;
  std::vector<fs::path> inputs = {src};
  if (points) inputs.push_back(*points);
  StageRun st(ctx, "analyze",
              {{"catalog", to_json(cat)},
               {"classes", ids},
               {"connectivity", o.connectivity},
               {"min_pixels", o.min_pixels},
               {"threshold", o.threshold}},
              inputs);
  if (st.up_to_date()) return kExitOk;
  const auto labels = read_label_grf(src);
  const auto cover = class_cover(labels, cat);
  const auto per_class = connected_components_by_class(labels, cat, ids, o.connectivity, o.min_pixels, ctx.workers);
  const double area = labeled_area(labels);

  std::vector<InstanceRecord> all;
  nlohmann::json classes = nlohmann::json::array();
  for (std::size_t k = 0; k < ids.size(); ++k) {
    const auto& inst = per_class[k];
    nlohmann::json entry = {{"class", cat[ids[k]].name}, {"instances", inst.size()}, {"density_per_m2", density(inst.size(), area)}};
    if (!inst.empty()) {
      std::vector<double> lengths;
      for (const auto& i : inst) lengths.push_back(i.length_m);
      const auto s = length_summary(lengths);
      entry["length_mean_m"] = s.mean;
      entry["length_se_m"] = s.standard_error;
      entry["length_summary"] = format_length_summary(s);
    }
    classes.push_back(entry);
    all.insert(all.end(), inst.begin(), inst.end());
  }
  nlohmann::json summary = {{"surveyed_area_m2", area}, {"classes", classes}};
  if (points) {
    const auto set = read_point_predictions(*points, cat, parse_origin(o.origin));
    const auto ab = relative_abundance(set, o.threshold);
    nlohmann::json abj = nlohmann::json::object();
    for (std::size_t c = 0; c < cat.size(); ++c) abj[cat[c].name] = ab[c];
    summary["relative_abundance"] = abj;
  }
  st.begin();
  write_json_file(st.dir() / "cover.json", cover_json(cover, cat));
  write_text_file(st.dir() / "instances.csv", instances_csv(all, cat));
  write_json_file(st.dir() / "instances.geojson", instances_geojson(all, cat, labels.grid.crs_tag));
  write_json_file(st.dir() / "summary.json", summary);
  st.finish();
  for (const auto& c : classes) {
    ctx.out << c["class"].get<std::string>() << ": " << c["instances"].get<std::size_t>() << " instances";
    if (c.contains("length_summary")) ctx.out << ", length " << c["length_summary"].get<std::string>();
    ctx.out << "\n";
  }
  return kExitOk;
}

inline int cmd_synth(const Context& ctx, const Options& o) {
  SynthParams p;
  p.seed = o.seed;
  p.extent = o.extent;
  p.transect_spacing = o.transect_spacing;
  p.point_step = o.point_step;
  p.noise = o.noise;
  p.sessions = o.sessions;
  p.catalog = o.catalog.empty() ? ClassCatalog::default_catalog(o.sea_cucumber) : catalog_from_json(read_json_file(o.catalog));
  p.truth_spacing = o.grid_spacing;
  StageRun st(ctx, "synth",
              {{"seed", p.seed},
               {"extent", p.extent},
               {"transect_spacing", p.transect_spacing},
               {"point_step", p.point_step},
               {"noise", p.noise},
               {"sessions", p.sessions},
               {"catalog", to_json(p.catalog)},
               {"grid_spacing", o.grid_spacing ? nlohmann::json(*o.grid_spacing) : nlohmann::json(nullptr)}},
              {});
  if (st.up_to_date()) return kExitOk;
  const auto scene = synth_scene(p);
  st.begin();
  write_text_file(st.dir() / "points.csv", format_point_predictions(scene.survey));
  write_grf(st.dir() / "truth.grf", scene.ground_truth);
  write_json_file(st.dir() / "catalog.json", to_json(p.catalog));
  nlohmann::json seeds = nlohmann::json::array();
  for (std::size_t i = 0; i < scene.seeds.size(); ++i)
    seeds.push_back({{"x", scene.seeds[i].x}, {"y", scene.seeds[i].y}, {"class_id", scene.seed_class[i]}});
  write_json_file(st.dir() / "scene.json", {{"seeds", seeds}, {"min_seed_separation", scene.min_seed_separation}});
  st.finish();
  ctx.out << "synth: " << scene.survey.point_count() << " points, " << scene.seeds.size() << " cells, truth "
          << scene.ground_truth.grid.width << "x" << scene.ground_truth.grid.height << "\n";
  return kExitOk;
}

inline int cmd_report(const Context& ctx, const Options&) {
  std::ostringstream md;
  md << "# reefmap run report\n\n";
  const auto w = ctx.workdir;
  if (fs::exists(w / "normalize" / "params.json")) {
    const auto j = read_json_file(w / "normalize" / "params.json");
    md << "## Normalization\n\n| class | q_low | q_high | samples |\n|---|---|---|---|\n";
    for (const auto& c : j["classes"])
      md << "| " << c["name"].get<std::string>() << " | " << c["q_low"].get<double>() << " | " << c["q_high"].get<double>()
         << " | " << c["sample_count"].get<std::size_t>() << " |\n";
    md << "\n";
  }
  if (fs::exists(w / "evaluate" / "report.txt"))
    md << "## Evaluation\n\n```\n" << read_text_file(w / "evaluate" / "report.txt") << "```\n\n";
  if (fs::exists(w / "analyze" / "summary.json")) {
    const auto j = read_json_file(w / "analyze" / "summary.json");
    md << "## Instances\n\nSurveyed area: " << j["surveyed_area_m2"].get<double>() << " m2\n\n";
    md << "| class | instances | density (1/m2) | length |\n|---|---|---|---|\n";
    for (const auto& c : j["classes"])
      md << "| " << c["class"].get<std::string>() << " | " << c["instances"].get<std::size_t>() << " | "
         << c["density_per_m2"].get<double>() << " | " << c.value("length_summary", std::string("-")) << " |\n";
    md << "\n";
  }
  const auto root = w / "dataset";
  const int last = latest_round(root);
  if (last >= 0) {
    md << "## Dataset rounds\n\n";
    for (int r = 0; r <= last; ++r) {
      const auto m = read_manifest(root, r);
      md << "- round_" << r << ": " << m.tiles.size() << " tiles, manifest " << sha256_file(round_dir(root, r) / "manifest.json").substr(0, 12)
         << "\n";
    }
    md << "- chain: " << (verify_round(root, last).ok ? "verified" : "BROKEN") << "\n\n";
  }
  write_text_file(w / "report" / "report.md", md.str());
  ctx.out << md.str();
  return kExitOk;
}

// ---------------------------------------------------------------------------
// Argument handling

namespace detail {

inline void add_common(CLI::App* sub, Options& o) {
  sub->add_option("--workdir", o.workdir, "Work directory (default: $REEF_WORKDIR or ./run)");
  sub->add_option("--config", o.config, "JSON file with option values; command-line flags win");
  sub->add_option("--workers", o.workers, "Worker threads (0 = all cores)");
  sub->add_option("--catalog", o.catalog, "Class catalog JSON");
}

inline void add_points(CLI::App* sub, Options& o) {
  sub->add_option("--input", o.input, "Point-prediction CSV (default: the ingest or synth output)");
  sub->add_option("--origin", o.origin, "lat,lon origin for lat/lon input (default: first point)");
}

/// Appends "--key value" for config entries whose flag is not already on
/// the command line. Top-level keys apply to every subcommand, objects named
/// after a subcommand only to it.
inline void apply_config(std::vector<std::string>& args, CLI::App* sub, const nlohmann::json& cfg,
                         const std::vector<std::string>& path) {
  auto present = [&](const std::string& flag) {
    for (const auto& a : args)
      if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
    return false;
  };
  auto add = [&](const std::string& key, const nlohmann::json& v) {
    const std::string flag = "--" + key;
    auto* opt = sub->get_option_no_throw(flag);
    if (!opt || present(flag)) return;
    auto str = [](const nlohmann::json& x) { return x.is_string() ? x.get<std::string>() : x.dump(); };
    if (opt->get_expected_min() == 0) {
      if (v.is_boolean() && v.get<bool>()) args.push_back(flag);
      return;
    }
    if (v.is_array()) {
      for (const auto& x : v) {
        args.push_back(flag);
        args.push_back(str(x));
      }
    } else {
      args.push_back(flag);
      args.push_back(str(v));
    }
  };
  std::vector<const nlohmann::json*> scopes = {&cfg};
  const nlohmann::json* cur = &cfg;
  for (const auto& name : path) {
    if (!cur->contains(name) || !(*cur)[name].is_object()) break;
    cur = &(*cur)[name];
    scopes.push_back(cur);
  }
  // Innermost scope first so it takes precedence.
  for (auto it = scopes.rbegin(); it != scopes.rend(); ++it)
    for (const auto& [key, v] : (*it)->items())
      if (!v.is_object()) add(key, v);
}

}  // namespace detail

inline int run_cli(std::vector<std::string> args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  Options o;
  CLI::App app{"reefmap: coarse benthic annotation, training datasets and reef analytics", "reefmap"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  std::map<std::string, std::function<int(const Context&, const Options&)>> handlers;
  auto sub = [&](const std::string& name, const std::string& desc, auto fn) {
    auto* s = app.add_subcommand(name, desc);
    detail::add_common(s, o);
    handlers[name] = fn;
    return s;
  };

  auto* ingest = sub("ingest", "Validate point predictions and store them in canonical form", cmd_ingest);
  detail::add_points(ingest, o);

  auto* spacing = sub("spacing", "Median consecutive-point spacing per session", cmd_spacing);
  detail::add_points(spacing, o);

  auto* rasterize = sub("rasterize", "Interpolate per-class probabilities onto a grid and merge sessions", cmd_rasterize);
  detail::add_points(rasterize, o);
  rasterize->add_option("--grid-spacing", o.grid_spacing, "Pixel size in meters (default: median point spacing)");
  rasterize->add_option("--grid", o.grid, "Grid JSON to rasterize onto (overrides --grid-spacing)");

  auto* normalize = sub("normalize", "Per-class percentile normalization of the merged rasters", cmd_normalize);
  detail::add_points(normalize, o);
  normalize->add_option("--percentiles", o.percentiles, "Low,high percentiles")->capture_default_str();
  normalize->add_option("--epsilon", o.epsilon, "Denominator guard")->capture_default_str();

  sub("label", "Argmax of the normalized rasters into a label raster", cmd_label);

  auto* upsample = sub("upsample", "Nearest-neighbour resampling of the label raster onto a finer grid", cmd_upsample);
  upsample->add_option("--input", o.input, "Label GRF (default: label/labels.grf)");
  upsample->add_option("--target", o.target, "Destination grid JSON (a GRF sidecar works)");

  auto* tile = sub("tile", "Cut the label raster into training tiles (dataset round 0)", cmd_tile);
  tile->add_option("--input", o.input, "Label GRF (default: upsample or label output)");
  tile->add_option("--manual", o.manual, "Manual annotation GRF on the same grid; overrides where not 255");
  tile->add_option("--tile-size", o.tile_size, "Tile side in pixels")->capture_default_str();
  tile->add_option("--min-labeled", o.min_labeled, "Minimum labeled fraction to keep a tile")->capture_default_str();
  tile->add_option("--max-replication", o.max_replication, "Replication cap for rare-class tiles")->capture_default_str();
  tile->add_option("--val-fraction", o.val_fraction, "Fraction of tiles assigned to validation")->capture_default_str();
  tile->add_option("--class-weight", o.class_weights, "Loss weight override, Name=weight (repeatable)");

  auto* distill = app.add_subcommand("distill", "Self-distillation rounds over the tile dataset");
  distill->require_subcommand(1);
  auto* dinit = distill->add_subcommand("init", "Prepare round_<n>/pred/ for predicted masks");
  detail::add_common(dinit, o);
  dinit->add_option("--mock-noise", o.mock_noise, "Fill pred/ with mock predictions at this noise rate");
  dinit->add_option("--seed", o.seed, "Seed for --mock-noise");
  dinit->add_option("--round", o.round, "Round (default: latest)");
  auto* dnext = distill->add_subcommand("next", "Build the next round from round_<n>/pred/");
  detail::add_common(dnext, o);
  dnext->add_option("--round", o.round, "Source round (default: latest with a pred/ directory)");
  dnext->add_option("--class-weight", o.class_weights, "Loss weight override, Name=weight (repeatable)");
  auto* dverify = distill->add_subcommand("verify", "Check the manifest hash chain");
  detail::add_common(dverify, o);
  dverify->add_option("--round", o.round, "Round (default: latest)");

  auto* evaluate = sub("evaluate", "Confusion matrix, accuracy and IoU against reference labels", cmd_evaluate);
  evaluate->add_option("--truth", o.truth, "Reference label GRF (repeatable, one per zone)");
  evaluate->add_option("--pred", o.pred, "Predicted label GRF (repeatable, one per zone)");
  evaluate->add_option("--zone", o.zones, "Zone name (repeatable)");

  auto* analyze = sub("analyze", "Cover, instances, lengths, densities and point abundance", cmd_analyze);
  analyze->add_option("--input", o.input, "Label GRF (default: upsample or label output)");
  analyze->add_option("--class", o.classes, "Class to extract instances for (repeatable; default all)");
  analyze->add_option("--connectivity", o.connectivity, "4 or 8")->capture_default_str();
  analyze->add_option("--min-pixels", o.min_pixels, "Smallest instance kept")->capture_default_str();
  analyze->add_option("--threshold", o.threshold, "Presence threshold for relative abundance")->capture_default_str();
  analyze->add_option("--points", o.points, "Point predictions for relative abundance");
  analyze->add_option("--origin", o.origin, "lat,lon origin for lat/lon point input");

  auto* synth = sub("synth", "Generate a synthetic scene (truth raster and point predictions)", cmd_synth);
  synth->add_option("--seed", o.seed, "Random seed")->capture_default_str();
  synth->add_option("--extent", o.extent, "Scene side in meters")->capture_default_str();
  synth->add_option("--transect-spacing", o.transect_spacing, "Distance between transects")->capture_default_str();
  synth->add_option("--point-step", o.point_step, "Distance between points along a transect")->capture_default_str();
  synth->add_option("--noise", o.noise, "Gaussian sigma added to probabilities")->capture_default_str();
  synth->add_option("--sessions", o.sessions, "Number of survey sessions")->capture_default_str();
  synth->add_flag("--sea-cucumber", o.sea_cucumber, "Use the 6-class catalog");
  synth->add_option("--grid-spacing", o.grid_spacing, "Truth raster pixel size (default: point step)");

  sub("report", "Summarize the work directory", cmd_report);

  // Config file: locate --config and the subcommand path before parsing.
  std::string config_path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) config_path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) config_path = args[i].substr(9);
  }
  if (!config_path.empty()) {
    try {
      const auto cfg = read_json_file(config_path);
      std::vector<std::string> path;
      CLI::App* target = &app;
      for (std::size_t i = 1; i < args.size(); ++i) {
        if (args[i].rfind("-", 0) == 0) break;
        auto* next = target->get_subcommand_no_throw(args[i]);
        if (!next) break;
        target = next;
        path.push_back(args[i]);
      }
      if (target != &app) detail::apply_config(args, target, cfg, path);
    } catch (const Error& e) {
      err << "error: " << e.what() << "\n";
      return e.category() == ErrorCategory::Io ? kExitIo : kExitValidation;
    }
  }

  try {
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  std::string workdir = o.workdir;
  if (workdir.empty()) {
    const char* env = std::getenv("REEF_WORKDIR");
    workdir = env && *env ? env : "run";
  }
  Context ctx{workdir, o.workers, out, err};

  try {
    for (auto* s : app.get_subcommands()) {
      if (s->get_name() == "distill") {
        auto* leaf = s->get_subcommands().front();
        if (leaf->get_name() == "init") return cmd_distill_init(ctx, o);
        if (leaf->get_name() == "next") return cmd_distill_next(ctx, o);
        return cmd_distill_verify(ctx, o);
      }
      return handlers.at(s->get_name())(ctx, o);
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code(e.category());
  } catch (const fs::filesystem_error& e) {
    err << "error: Io: " << e.what() << "\n";
    return kExitIo;
  } catch (const nlohmann::json::exception& e) {
    err << "error: MalformedInput: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitUsage;
}

inline int run_cli(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return run_cli(std::vector<std::string>(argv, argv + argc), out, err);
}

}  // namespace reefmap::cli
