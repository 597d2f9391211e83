// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "reefmap/cli.hpp"
#include "reefmap/reefmap.hpp"
#include "test_util.hpp"

namespace reefmap {
namespace {

class Check {
 public:
  void expect(bool ok, const std::string& what) {
    ++checks_;
    if (!ok && failures_.size() < 5) failures_.push_back(what);
    failed_ |= !ok;
  }
  void note(const std::string& s) { notes_ += (notes_.empty() ? "" : "; ") + s; }
  bool failed() const { return failed_; }
  std::string summary() const {
    std::string s = std::to_string(checks_) + " checks";
    if (!notes_.empty()) s += "; " + notes_;
    for (const auto& f : failures_) s += "\n      " + f;
    return s;
  }

 private:
  bool failed_ = false;
  std::size_t checks_ = 0;
  std::vector<std::string> failures_;
  std::string notes_;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<Point2> random_points(std::mt19937_64& rng, std::size_t n, double extent) {
  std::uniform_real_distribution<double> u(0.0, extent);
  std::vector<Point2> pts(n);
  for (auto& p : pts) p = {u(rng), u(rng)};
  return pts;
}

std::vector<std::optional<double>> iou_row(std::initializer_list<double> v) {
  std::vector<std::optional<double>> out;
  for (double x : v) out.push_back(x < 0 ? std::nullopt : std::optional<double>(x));
  return out;
}

// ---------------------------------------------------------------------------

void mean_iou_tables(Check& c) {
  struct Row {
    const char* name;
    std::vector<std::optional<double>> iou;
    double expected;
  };
  const std::vector<Row> rows = {
      {"Trou d'eau", iou_row({0.2354, 0.3623, 0.3295, 0.3707, 0.9484}), 0.4493},
      {"Saint-Leu", iou_row({0.5641, -1, 0.4318, 0.4242, 0.8972}), 0.5793},
      {"Coarse", iou_row({0.5109, 0.2087, 0.2877, 0.4201, 0.8854}), 0.4625},
      {"Coarse 1st distillation", iou_row({0.4676, 0.1532, 0.3721, 0.4078, 0.9285}), 0.4658},
      {"Refined", iou_row({0.5175, 0.2114, 0.3395, 0.4190, 0.8852}), 0.4745},
      {"Refined 1st distillation", iou_row({0.5282, 0.2313, 0.4095, 0.4111, 0.9249}), 0.5010},
  };
  for (const auto& r : rows) {
    const double got = mean_iou(r.iou);
    c.expect(std::abs(got - r.expected) <= 1e-4, std::string(r.name) + ": " + fmt("%.6f", got));
  }
}

void interpolation_exactness(Check& c) {
  std::mt19937_64 rng(20240601);
  std::uniform_real_distribution<double> coef(-5.0, 5.0), u(0.0, 1.0);
  const auto grid = grid_from_extent(0, 0, 128, 128, 1.0);
  double worst = 0.0;
  std::size_t in_hull = 0;
  for (int field = 0; field < 20; ++field) {
    const auto pts = random_points(rng, 200, 128.0);
    const double b = coef(rng), cc = coef(rng);
    // Offset keeps the field >= 1 on the square, so relative error is well defined.
    const double a = 1.0 + 128.0 * (std::abs(b) + std::abs(cc)) + 10.0 * u(rng);
    auto f = [&](double x, double y) { return a + b * x + cc * y; };
    std::vector<double> vals;
    for (const auto& p : pts) vals.push_back(f(p.x, p.y));
    const auto tri = delaunay_triangulate(pts);
    const auto r = interpolate_linear(tri, gather_vertex_values<double>(tri, vals), grid);
    for (std::int64_t row = 0; row < grid.height; ++row)
      for (std::int64_t col = 0; col < grid.width; ++col) {
        const auto p = pixel_center(grid, col, row);
        bool inside = true;
        for (std::size_t i = 0; i < tri.hull.size() && inside; ++i) {
          const auto& h0 = tri.vertices[tri.hull[i]];
          const auto& h1 = tri.vertices[tri.hull[(i + 1) % tri.hull.size()]];
          inside = oracle::signed_area2(h0, h1, p) > 1e-9L;
        }
        const double v = r.at(col, row);
        if (inside) {
          ++in_hull;
          c.expect(!std::isnan(v), "in-hull pixel without a value");
        }
        if (std::isnan(v)) continue;
        const double expected = f(p.x, p.y);
        const double rel = std::abs(v - expected) / std::abs(expected);
        worst = std::max(worst, rel);
        c.expect(rel <= 1e-9, "relative error " + fmt("%.3g", rel));
      }
  }
  c.note(std::to_string(in_hull) + " in-hull pixels, max rel err " + fmt("%.2g", worst));
}

void delaunay_validity(Check& c) {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> count(3, 200);
  std::size_t triangles = 0;
  for (int set = 0; set < 50; ++set) {
    const auto pts = random_points(rng, static_cast<std::size_t>(count(rng)), set % 2 ? 1.0 : 100.0);
    const auto tri = delaunay_triangulate(pts);
    triangles += tri.triangles.size();
    c.expect(tri.triangles.size() == 2 * tri.vertices.size() - tri.hull.size() - 2, "triangle count");
    for (const auto& t : tri.triangles) {
      c.expect(oracle::signed_area2(tri.vertices[t[0]], tri.vertices[t[1]], tri.vertices[t[2]]) > 0, "orientation");
      for (std::size_t v = 0; v < tri.vertices.size(); ++v) {
        if (v == t[0] || v == t[1] || v == t[2]) continue;
        c.expect(!oracle::clearly_inside_circumcircle(tri.vertices[t[0]], tri.vertices[t[1]], tri.vertices[t[2]],
                                                      tri.vertices[v]),
                 "set " + std::to_string(set) + ": vertex inside a circumcircle");
      }
    }
  }
  c.note(std::to_string(triangles) + " triangles");
}

void quantile_oracle(Check& c) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int set = 0; set < 100; ++set) {
    const auto n = set < 10 ? static_cast<std::size_t>(set + 1) : static_cast<std::size_t>(1 + u(rng) * 1e5);
    std::vector<double> v(n);
    for (auto& x : v) x = set % 4 == 0 ? std::round(u(rng) * 20) / 20 : u(rng);
    const double pl = set % 2 ? 0.01 : u(rng) * 0.5, ph = set % 2 ? 0.99 : 0.5 + u(rng) * 0.5;
    const auto s = quantile_stats(v, pl, ph);
    c.expect(s.q_low == oracle::sorted_quantile(v, pl), "q_low differs for set " + std::to_string(set));
    c.expect(s.q_high == oracle::sorted_quantile(v, ph), "q_high differs for set " + std::to_string(set));
    c.expect(s.sample_count == n, "sample count");
  }
}

void metrics_oracle(Check& c) {
  const auto cat = ClassCatalog::default_catalog(false);
  std::mt19937_64 rng(5150);
  std::uniform_int_distribution<int> lab(0, 5);
  for (int pair = 0; pair < 100; ++pair) {
    LabelRaster t = make_label_raster({0, 0, 1, 64, 64, ""}), p = t;
    for (std::size_t i = 0; i < t.data.size(); ++i) {
      const int a = lab(rng), b = lab(rng);
      t.data[i] = a == 5 ? kUnlabeled : static_cast<std::uint8_t>(a);
      p.data[i] = b == 5 ? kUnlabeled : static_cast<std::uint8_t>(b);
    }
    std::uint64_t tally[256][256] = {};
    for (std::size_t i = 0; i < t.data.size(); ++i) ++tally[t.data[i]][p.data[i]];
    const auto counts = confusion_matrix(t, p, cat, static_cast<unsigned>(1 + pair % 4));
    std::uint64_t evaluated = 0, trace = 0;
    for (int a = 0; a < 5; ++a) {
      c.expect(counts.unpredicted[static_cast<std::size_t>(a)] == tally[a][255], "unpredicted tally");
      for (int b = 0; b < 5; ++b) {
        c.expect(counts.at(static_cast<std::size_t>(a), static_cast<std::size_t>(b)) == tally[a][b], "cell tally");
        evaluated += tally[a][b];
        if (a == b) trace += tally[a][b];
      }
    }
    c.expect(counts.evaluated_pixels == evaluated, "evaluated pixels");
    c.expect(pixel_accuracy(counts) == static_cast<double>(trace) / static_cast<double>(evaluated), "accuracy");
    const auto iou = iou_per_class(counts);
    for (int k = 0; k < 5; ++k) {
      std::uint64_t fp = 0, fn = 0;
      for (int j = 0; j < 5; ++j)
        if (j != k) {
          fp += tally[j][k];
          fn += tally[k][j];
        }
      const auto& got = iou[static_cast<std::size_t>(k)];
      c.expect(got && *got == static_cast<double>(tally[k][k]) / static_cast<double>(tally[k][k] + fp + fn), "IoU");
    }
  }
}

ProbabilityRaster row_raster(std::vector<double> v, ClassId cls = 0) {
  ProbabilityRaster r;
  r.grid = {0, 0, 1, static_cast<std::int64_t>(v.size()), 1, ""};
  r.class_id = cls;
  r.data = std::move(v);
  return r;
}

void normalization_and_argmax(Check& c) {
  const double nd = ProbabilityRaster::nodata();
  const QuantileStats s{0, 0.1, 0.9, 100};
  const auto out = normalize_raster(row_raster({0.1, 0.9, 0.0, 1.0, 0.5, nd}), s, 1e-6);
  c.expect(out.data[0] == 0.0, "p = q_low maps to 0");
  c.expect(std::abs(out.data[1] - 0.8 / 0.800001) < 1e-12 && out.data[1] < 1.0, "p = q_high maps just below 1");
  c.expect(out.data[2] == 0.0, "below q_low clips to 0");
  c.expect(out.data[3] == 1.0, "above q_high clips to 1");
  c.expect(std::abs(out.data[4] - 0.4 / 0.800001) < 1e-12, "interior value");
  c.expect(std::isnan(out.data[5]), "NoData preserved");

  const QuantileStats flat{0, 0.3, 0.3, 10};
  const auto deg = normalize_raster(row_raster({0.3, 0.2, 0.3000001}), flat, 1e-6);
  c.expect(deg.data[0] == 0.0 && deg.data[1] == 0.0, "constant class maps to 0");
  c.expect(std::abs(deg.data[2] - 0.1) < 1e-6, "constant class is finite above q");

  const auto cat = ClassCatalog::default_catalog(false);
  std::vector<ProbabilityRaster> stack;
  const std::vector<std::vector<double>> per_class = {
      {0.2, 0.5, nd, nd}, {0.7, 0.5, nd, nd}, {0.1, 0.1, nd, 0.05}, {0.0, 0.0, nd, nd}, {0.0, 0.0, nd, 0.01}};
  for (std::size_t k = 0; k < per_class.size(); ++k) stack.push_back(row_raster(per_class[k], static_cast<ClassId>(k)));
  const auto labels = argmax_label(stack, cat);
  c.expect(labels.data[0] == 1, "unique maximum");
  c.expect(labels.data[1] == 0, "tie goes to the lowest class index");
  c.expect(labels.data[2] == kUnlabeled, "all NoData gives 255");
  c.expect(labels.data[3] == 2, "NoData classes are ignored");
}

void components_and_lengths(Check& c) {
  const auto cat = ClassCatalog::default_catalog(true);
  auto blank = [](std::int64_t w, std::int64_t h, double spacing) {
    return make_label_raster({10.0, 20.0, spacing, w, h, "local"});
  };
  std::mt19937_64 rng(909);
  std::uniform_int_distribution<int> dim(1, 16);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int mask = 0; mask < 200; ++mask) {
    auto r = blank(dim(rng), dim(rng), 0.01);
    const double density = 0.2 + 0.6 * u(rng);
    for (auto& v : r.data) v = u(rng) < density ? 1 : (u(rng) < 0.5 ? 0 : kUnlabeled);
    const int conn = mask % 2 ? 4 : 8;
    const auto got = connected_components(r, cat, 1, conn, 1);
    const auto want = oracle::flood_fill_components(r, 1, conn);
    c.expect(got.size() == want.size(), "component count, mask " + std::to_string(mask));
    for (std::size_t k = 0; k < std::min(got.size(), want.size()); ++k) {
      std::set<std::pair<std::int64_t, std::int64_t>> s;
      for (const auto& p : got[k].pixels) s.insert({p.row, p.col});
      c.expect(s == want[k] && s.size() == got[k].pixels.size(), "component pixels, mask " + std::to_string(mask));
    }
  }

  std::uniform_int_distribution<int> coord(0, 40), count(1, 60), shift(-1000, 1000);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<PixelIndex> px(static_cast<std::size_t>(count(rng)));
    for (auto& p : px) p = {coord(rng), coord(rng)};
    const double base = instance_length(px, 0.02);
    std::vector<PixelIndex> moved = px, rotated = px;
    const int dx = shift(rng), dy = shift(rng);
    for (auto& p : moved) p = {p.col + dx, p.row + dy};
    for (auto& p : rotated) p = {-p.row, p.col};
    c.expect(instance_length(moved, 0.02) == base, "translation changes length");
    c.expect(instance_length(rotated, 0.02) == base, "rotation changes length");
  }

  const double spacing = 0.01;
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const double major = 10.0 + 50.0 * u(rng), minor = major * (0.3 + 0.6 * u(rng));
    const double theta = std::numbers::pi * u(rng), cx = 40.0 + u(rng), cy = 40.0 + u(rng);
    auto r = blank(80, 80, spacing);
    const double a = major / 2, b = minor / 2, ct = std::cos(theta), st = std::sin(theta);
    for (std::int64_t row = 0; row < 80; ++row)
      for (std::int64_t col = 0; col < 80; ++col) {
        const double x = static_cast<double>(col) + 0.5 - cx, y = static_cast<double>(row) + 0.5 - cy;
        const double p = x * ct + y * st, q = -x * st + y * ct;
        if (p * p / (a * a) + q * q / (b * b) <= 1.0) r.at(col, row) = 5;
      }
    const auto inst = connected_components(r, cat, 5);
    c.expect(inst.size() == 1, "ellipse is one component");
    if (inst.size() != 1) continue;
    const double err = std::abs(inst[0].length_m - major * spacing);
    worst = std::max(worst, err / spacing);
    c.expect(err <= 2 * spacing, "ellipse major axis off by " + fmt("%.2f", err / spacing) + " px");
  }
  c.note("ellipse max error " + fmt("%.2f", worst) + " px");
}

// Fraction of correctly labeled pixels, skipping unlabeled predictions and
// any pixel whose 3x3 truth neighbourhood holds more than one class.
double interior_accuracy(const LabelRaster& truth, const LabelRaster& pred) {
  const auto& g = truth.grid;
  std::size_t hit = 0, total = 0;
  for (std::int64_t row = 1; row + 1 < g.height; ++row)
    for (std::int64_t col = 1; col + 1 < g.width; ++col) {
      const auto t = truth.at(col, row);
      bool band = false;
      for (int dr = -1; dr <= 1; ++dr)
        for (int dc = -1; dc <= 1; ++dc) band |= truth.at(col + dc, row + dr) != t;
      const auto l = pred.at(col, row);
      if (band || l == kUnlabeled) continue;
      hit += l == t;
      ++total;
    }
  return total ? static_cast<double>(hit) / static_cast<double>(total) : 0.0;
}

void synthetic_pipeline(Check& c) {
  const std::vector<double> sigmas = {0.0, 0.1, 0.2, 0.4};
  std::vector<double> mean(sigmas.size(), 0.0);
  double worst_clean = 1.0;
  for (std::size_t k = 0; k < sigmas.size(); ++k) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      SynthParams p;
      p.seed = seed;
      p.extent = 50.0;
      p.transect_spacing = 0.5;
      p.point_step = 0.3;
      p.noise = sigmas[k];
      const auto scene = synth_scene(p);
      const auto coarse = coarse_annotation(scene.survey);
      const double acc = interior_accuracy(scene.ground_truth, coarse.labels);
      mean[k] += acc / 10.0;
      if (k == 0) {
        worst_clean = std::min(worst_clean, acc);
        c.expect(acc >= 0.95, "sigma 0, seed " + std::to_string(seed) + ": accuracy " + fmt("%.4f", acc));
      }
    }
  }
  for (std::size_t k = 1; k < sigmas.size(); ++k)
    c.expect(mean[k] <= mean[k - 1], "mean accuracy increased at sigma " + fmt("%.1f", sigmas[k]));
  std::string m = "min acc at sigma 0 " + fmt("%.4f", worst_clean) + ", means";
  for (double v : mean) m += " " + fmt("%.4f", v);
  c.note(m);
}

void distillation_round_trip(Check& c) {
  testing::TempDir dir;
  const auto cat = ClassCatalog::default_catalog(false);
  SynthParams p;
  p.seed = 3;
  p.extent = 30.0;
  const auto scene = synth_scene(p);
  const auto labels = coarse_annotation(scene.survey).labels;
  write_grf(dir / "source/labels.grf", labels);

  auto m0 = extract_tiles(labels, cat, 32, 0.5, 0.1);
  m0 = apply_replication(std::move(m0), rare_class_weights_from_counts(manifest_class_counts(m0)));
  m0.class_loss_weights = class_loss_weights(cat);
  for (const auto* rel : {"source/labels.grf", "source/labels.grf.json"}) m0.sources.push_back({rel, sha256_file(dir / rel)});
  const auto h0 = write_round(dir.path(), m0);
  auto m1 = distill_round(m0, mock_segment(manifest_patches(m0), cat.size(), 0.0, 17), h0);
  write_round(dir.path(), m1);

  c.expect(m0.tiles.size() > 4, "too few tiles");
  auto j0 = to_json(m0), j1 = to_json(m1);
  c.expect(j1["parent_hash"] == h0 && j1["round"] == 1, "round 1 header");
  j1["round"] = j0["round"];
  j1["parent_hash"] = j0["parent_hash"];
  c.expect(j0 == j1, "round 1 manifest differs from round 0");
  for (std::size_t i = 0; i < m0.tiles.size() && i < m1.tiles.size(); ++i)
    c.expect(read_file_bytes(round_dir(dir.path(), 0) / m0.tiles[i].file) ==
                 read_file_bytes(round_dir(dir.path(), 1) / m1.tiles[i].file),
             "tile annotation differs: " + m0.tiles[i].id);
  c.expect(verify_round(dir.path(), 1).ok, "chain does not verify");

  std::vector<fs::path> files = {round_dir(dir.path(), 0) / "manifest.json", round_dir(dir.path(), 1) / "manifest.json",
                                 dir / "source/labels.grf", dir / "source/labels.grf.json"};
  for (int r = 0; r < 2; ++r)
    for (const auto& t : (r ? m1 : m0).tiles) {
      files.push_back(round_dir(dir.path(), r) / t.file);
      files.push_back(grf_sidecar_path(round_dir(dir.path(), r) / t.file));
    }
  std::mt19937_64 rng(1);
  for (const auto& f : files) {
    auto bytes = read_file_bytes(f);
    const auto original = bytes;
    std::uniform_int_distribution<std::size_t> pos(0, bytes.size() - 1);
    bytes[pos(rng)] ^= 0x20;
    write_file_bytes(f, bytes.data(), bytes.size());
    c.expect(!verify_round(dir.path(), 1).ok, "flipped byte not detected in " + f.filename().string());
    write_file_bytes(f, original.data(), original.size());
  }
  c.expect(verify_round(dir.path(), 1).ok, "chain does not verify after restore");
  c.note(std::to_string(files.size()) + " files tampered");
}

std::map<std::string, std::string> tree_hashes(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[e.path().lexically_relative(root).generic_string()] = sha256_file(e.path());
  return out;
}

void determinism_and_performance(Check& c) {
  testing::TempDir a, b;
  std::size_t files = 0;
  for (const auto* w : {&a, &b}) {
    const std::string workers = w == &a ? "1" : "4";
    auto run = [&](std::vector<std::string> args) {
      args.insert(args.begin(), "reefmap");
      for (const auto& s : {"--workdir", w->path().c_str(), "--workers", workers.c_str()}) args.emplace_back(s);
      std::ostringstream out, err;
      const int code = cli::run_cli(args, out, err);
      c.expect(code == 0, args[1] + " exited " + std::to_string(code) + ": " + err.str());
    };
    auto grid = nlohmann::json();
    run({"synth", "--seed", "21", "--extent", "24", "--noise", "0.15", "--sessions", "3"});
    run({"ingest", "--input", (w->path() / "synth/points.csv").string()});
    run({"spacing"});
    run({"rasterize"});
    run({"normalize"});
    run({"label"});
    grid = read_json_file(w->path() / "rasterize/grid.json");
    grid["spacing"] = grid["spacing"].get<double>() / 3;
    grid["width"] = grid["width"].get<std::int64_t>() * 3;
    grid["height"] = grid["height"].get<std::int64_t>() * 3;
    write_json_file(w->path() / "fine.json", grid);
    run({"upsample", "--target", (w->path() / "fine.json").string()});
    run({"tile", "--tile-size", "64"});
    run({"distill", "init", "--mock-noise", "0.1", "--seed", "2"});
    run({"distill", "next"});
    run({"distill", "verify"});
    run({"evaluate", "--pred", (w->path() / "label/labels.grf").string()});
    run({"analyze"});
    run({"report"});
  }
  const auto ha = tree_hashes(a.path()), hb = tree_hashes(b.path());
  files = ha.size();
  c.expect(ha.size() == hb.size(), "different file sets");
  for (const auto& [rel, h] : ha) c.expect(hb.count(rel) && hb.at(rel) == h, "bytes differ: " + rel);

  // Evaluation of an 8192 x 8192 pair.
  const auto cat = ClassCatalog::default_catalog(false);
  LabelRaster truth = make_label_raster({0, 0, 0.01, 8192, 8192, "local"}), pred = truth;
  std::mt19937_64 rng(8);
  for (std::size_t i = 0; i < truth.data.size(); ++i) {
    const auto r = rng();
    truth.data[i] = static_cast<std::uint8_t>(r % 5);
    pred.data[i] = (r >> 8) % 10 == 0 ? static_cast<std::uint8_t>((r >> 16) % 5) : truth.data[i];
  }
  auto t0 = std::chrono::steady_clock::now();
  const auto report = evaluate(truth, pred, cat);
  const double t_eval = seconds_since(t0);
  c.expect(t_eval < 2.0, "evaluation took " + fmt("%.2f", t_eval) + " s");
  c.expect(report.counts.evaluated_pixels == truth.data.size(), "evaluated pixel count");

  // 1e5 points onto a 4-megapixel grid.
  PointPredictionSet set;
  set.catalog = cat;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto& pts = set.sessions["perf"];
  for (std::int64_t i = 0; i < 100000; ++i) {
    PointPrediction p{"perf", i, u(rng) * 200.0, u(rng) * 200.0, std::vector<double>(cat.size())};
    for (auto& v : p.probs) v = u(rng);
    pts.push_back(std::move(p));
  }
  const auto grid = grid_from_extent(0, 0, 200, 200, 0.1);
  c.expect(grid.width * grid.height == 4000000, "grid is not 4 MP");
  t0 = std::chrono::steady_clock::now();
  const auto rasters = rasterize_session("perf", pts, cat, grid);
  const double t_rast = seconds_since(t0);
  c.expect(t_rast < 5.0, "rasterizing took " + fmt("%.2f", t_rast) + " s");
  c.expect(rasters.classes.size() == cat.size(), "one raster per class");

  c.note(std::to_string(files) + " files identical, evaluate 8192^2 " + fmt("%.2f", t_eval) + " s, rasterize 1e5 pts x " +
         std::to_string(cat.size()) + " classes onto 4 MP " + fmt("%.2f", t_rast) + " s, " +
         std::to_string(std::thread::hardware_concurrency()) + " core(s)");
}

struct Criterion {
  int id;
  const char* name;
  double limit_s;  // 0 = none
  std::function<void(Check&)> run;
};

}  // namespace
}  // namespace reefmap

int main() {
  using namespace reefmap;
  const std::vector<Criterion> criteria = {
      {1, "mean IoU reproduces the published table rows", 1.0, mean_iou_tables},
      {2, "interpolation reproduces affine fields", 5.0, interpolation_exactness},
      {3, "Delaunay empty-circumcircle property", 10.0, delaunay_validity},
      {4, "quantiles match the sort oracle", 0.0, quantile_oracle},
      {5, "confusion, accuracy and IoU match brute-force tallies", 0.0, metrics_oracle},
      {6, "normalization anchors, clipping and argmax rules", 0.0, normalization_and_argmax},
      {7, "components, length invariance and ellipse axis", 0.0, components_and_lengths},
      {8, "synthetic end-to-end accuracy and noise monotonicity", 60.0, synthetic_pipeline},
      {9, "distillation round trip and hash chain", 0.0, distillation_round_trip},
      {10, "determinism across workers and performance", 0.0, determinism_and_performance},
  };
  int failed = 0;
  for (const auto& cr : criteria) {
    Check c;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      cr.run(c);
    } catch (const std::exception& e) {
      c.expect(false, std::string("exception: ") + e.what());
    }
    const double t = seconds_since(t0);
    if (cr.limit_s > 0) c.expect(t < cr.limit_s, "runtime " + fmt("%.2f", t) + " s over the " + fmt("%.0f", cr.limit_s) + " s limit");
    failed += c.failed();
    std::printf("%s  [%2d] %s (%.2f s): %s\n", c.failed() ? "FAIL" : "PASS", cr.id, cr.name, t, c.summary().c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed ? 1 : 0;
}
