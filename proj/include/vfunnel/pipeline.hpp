#pragma once

// End-to-end runners behind the command-line tool: single-pair portfolio
// generation, batches over a listing file, and ablation sweeps.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <unistd.h>
#include <vector>

#include "json.hpp"

#include "vfunnel/attention.hpp"
#include "vfunnel/dump.hpp"
#include "vfunnel/error.hpp"
#include "vfunnel/image_io.hpp"
#include "vfunnel/imaging.hpp"
#include "vfunnel/manifest.hpp"
#include "vfunnel/portfolio.hpp"
#include "vfunnel/run_config.hpp"

namespace vfunnel {

namespace fs = std::filesystem;

struct GenerateResult {
  fs::path out;
  double h_norm = 0.0;
  bool grid_degenerate = false;
  std::size_t degenerate_centers = 0;
  std::size_t crops = 0;
};

namespace detail {

inline void write_text(const fs::path &path, const std::string &text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
  f.close();
  if (!f) {
    throw std::runtime_error("failed to write " + path.string());
  }
}

inline fs::path staging_path(const fs::path &out) {
  static std::atomic<unsigned> seq{0};
  const fs::path parent = out.has_parent_path() ? out.parent_path() : fs::path(".");
  return parent / ("." + out.filename().string() + ".staging-" + std::to_string(::getpid()) +
                   "-" + std::to_string(seq.fetch_add(1)));
}

// Writes everything into a hidden sibling directory, then renames it into
// place. On failure the staging directory is removed and nothing appears at `out`.
template <typename Fill>
void publish_directory(const fs::path &out, Fill &&fill) {
  const fs::path staging = staging_path(out);
  try {
    if (out.has_parent_path()) {
      fs::create_directories(out.parent_path());
    }
    fs::create_directory(staging);
    fill(staging);
    if (fs::exists(out)) {
      fs::remove_all(out);
    }
    fs::rename(staging, out);
  } catch (...) {
    std::error_code ec;
    fs::remove_all(staging, ec);
    throw;
  }
}

} // namespace detail

/// Normalized grid and geometry for one (image, dump) pair, with the image
/// size cross-checked against the dump.
struct LoadedPair {
  RasterImage image;
  AttentionDump dump;
  AttentionGrid grid;
  GridGeometry geometry;
};

inline LoadedPair load_pair(const fs::path &image_path, const fs::path &dump_path) {
  AttentionDump dump = load_dump(dump_path);
  RasterImage image = load_image(image_path);
  if (image.width() != dump.image_width || image.height() != dump.image_height) {
    throw InvalidInput("image is " + std::to_string(image.width()) + "x" +
                       std::to_string(image.height()) + " but the attention dump declares " +
                       std::to_string(dump.image_width) + "x" + std::to_string(dump.image_height));
  }
  AttentionGrid grid = normalize(dump_grid(dump));
  GridGeometry geom = dump_geometry(dump);
  return {std::move(image), std::move(dump), std::move(grid), geom};
}

inline GenerateResult generate_portfolio(const fs::path &image_path, const fs::path &dump_path,
                                         const RunConfig &cfg) {
  cfg.validate();
  if (cfg.out.empty()) {
    throw InvalidInput("no output directory given");
  }
  const LoadedPair pair = load_pair(image_path, dump_path);
  const ManifestContext ctx{image_path.filename().string(), cfg.mode, cfg.precision,
                            pair.dump.provenance, pair.dump.flags};
  GenerateResult result;
  result.out = cfg.out;
  result.grid_degenerate = pair.grid.degenerate();

  std::string manifest;
  std::vector<RasterImage> crops;
  std::optional<RasterImage> overlay;
  if (cfg.mode.kind == Mode::TopK) {
    TopKSummary t{pair.geometry,   entropy_norm(pair.grid), pair.grid.degenerate(),
                  cfg.resolution,  cfg.topk_window(),       cfg.max_iou,
                  top_k_crops(pair.grid, pair.geometry, cfg.mode.topk, cfg.topk_window(),
                              cfg.max_iou)};
    for (const auto &c : t.crops) {
      crops.push_back(resize_to_s(extract_crop(pair.image, c.rect), cfg.resolution));
    }
    if (cfg.overlay) {
      const Portfolio empty{pair.geometry, ScaleConfig::defaults(0, cfg.resolution), t.h_norm,
                            t.grid_degenerate, {}};
      overlay = render_overlay(pair.image, empty, t.crops);
    }
    result.h_norm = t.h_norm;
    manifest = render_topk_manifest(t, ctx);
  } else {
    const Portfolio p = build_portfolio(pair.grid, pair.geometry, cfg.scale());
    for (const auto &lvl : p.levels) {
      crops.push_back(resize_to_s(extract_crop(pair.image, lvl.rect), cfg.resolution));
      result.degenerate_centers += lvl.center.degenerate ? 1 : 0;
    }
    if (cfg.overlay) {
      overlay = render_overlay(pair.image, p);
    }
    result.h_norm = p.h_norm;
    manifest = render_manifest(p, ctx);
  }
  result.crops = crops.size();

  detail::publish_directory(cfg.out, [&](const fs::path &dir) {
    for (std::size_t k = 0; k < crops.size(); ++k) {
      save_png(crops[k], dir / crop_file_name(k));
    }
    detail::write_text(dir / "manifest.json", manifest);
    if (overlay) {
      save_png(*overlay, dir / "overlay.png");
    }
  });
  return result;
}

// ---------------------------------------------------------------------------
// Batch

struct BatchPair {
  fs::path image;
  fs::path attn;
  std::string name;
};

/// Reads a listing: either a JSON array of {"image", "attn", "name"?}
/// objects or an object holding that array under "pairs". Relative paths
/// resolve against the listing's directory.
inline std::vector<BatchPair> load_listing(const fs::path &path) {
  std::ifstream in(path);
  if (!in) {
    throw InvalidInput("cannot open listing " + path.string());
  }
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error &e) {
    throw InvalidInput("listing " + path.string() + " is not valid JSON: " + e.what());
  }
  const nlohmann::json *entries = &doc;
  if (doc.is_object() && doc.contains("pairs")) {
    entries = &doc["pairs"];
  }
  if (!entries->is_array()) {
    throw InvalidInput("listing: expected an array of pairs");
  }
  const fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");
  std::vector<BatchPair> pairs;
  std::vector<std::string> seen;
  for (std::size_t k = 0; k < entries->size(); ++k) {
    const auto &e = (*entries)[k];
    const std::string where = "listing entry " + std::to_string(k);
    if (!e.is_object() || !e.contains("image") || !e["image"].is_string() ||
        !e.contains("attn") || !e["attn"].is_string()) {
      throw InvalidInput(where + ": expected {\"image\": path, \"attn\": path}");
    }
    BatchPair p;
    p.image = base / e["image"].get<std::string>();
    p.attn = base / e["attn"].get<std::string>();
    if (e.contains("name")) {
      if (!e["name"].is_string()) {
        throw InvalidInput(where + ": name must be a string");
      }
      p.name = e["name"].get<std::string>();
    } else {
      char idx[32];
      std::snprintf(idx, sizeof(idx), "%03zu_", k);
      p.name = idx + p.image.stem().string();
    }
    if (p.name.empty() || p.name == "." || p.name == ".." ||
        p.name.find_first_of("/\\") != std::string::npos) {
      throw InvalidInput(where + ": name '" + p.name + "' is not a plain directory name");
    }
    if (std::find(seen.begin(), seen.end(), p.name) != seen.end()) {
      throw InvalidInput(where + ": duplicate name '" + p.name + "'");
    }
    seen.push_back(p.name);
    pairs.push_back(std::move(p));
  }
  return pairs;
}

struct BatchOutcome {
  std::string name;
  bool ok = false;
  std::string error;
  GenerateResult result;
};

struct BatchSummary {
  std::vector<BatchOutcome> outcomes;

  std::size_t count() const { return outcomes.size(); }
  std::size_t succeeded() const {
    return static_cast<std::size_t>(
        std::count_if(outcomes.begin(), outcomes.end(), [](const auto &o) { return o.ok; }));
  }
  std::size_t failed() const { return count() - succeeded(); }

  /// 0 when every pair succeeded (including an empty batch), 1 when all
  /// failed, 2 for a partial failure.
  int exit_code() const {
    if (failed() == 0) {
      return 0;
    }
    return succeeded() == 0 ? 1 : 2;
  }
};

inline std::string render_batch_summary(const BatchSummary &s, int precision) {
  std::vector<double> h;
  std::size_t grid_degenerate = 0;
  std::size_t center_degenerate = 0;
  for (const auto &o : s.outcomes) {
    if (o.ok) {
      h.push_back(o.result.h_norm);
      grid_degenerate += o.result.grid_degenerate ? 1 : 0;
      center_degenerate += o.result.degenerate_centers;
    }
  }
  JsonText w(precision);
  w.begin_object();
  w.key("count").value(s.count());
  w.key("ok").value(s.succeeded());
  w.key("failed").value(s.failed());
  w.key("degenerate").begin_object();
  w.key("grid").value(grid_degenerate);
  w.key("center").value(center_degenerate);
  w.end_object();
  w.key("h_norm");
  if (h.empty()) {
    w.null();
  } else {
    std::vector<double> sorted = h;
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(h.size());
    const double mean = std::accumulate(h.begin(), h.end(), 0.0) / n;
    double var = 0.0;
    for (double v : h) {
      var += (v - mean) * (v - mean);
    }
    const std::size_t mid = sorted.size() / 2;
    const double median =
        sorted.size() % 2 == 1 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
    w.begin_object();
    w.key("min").value(sorted.front());
    w.key("max").value(sorted.back());
    w.key("mean").value(mean);
    w.key("median").value(median);
    w.key("stddev").value(std::sqrt(var / n));
    w.end_object();
  }
  w.key("pairs").begin_array();
  for (std::size_t k = 0; k < s.outcomes.size(); ++k) {
    const auto &o = s.outcomes[k];
    w.begin_object(true);
    w.key("index").value(k);
    w.key("name").value(o.name);
    w.key("status").value(o.ok ? "ok" : "failed");
    if (o.ok) {
      w.key("h_norm").value(o.result.h_norm);
      w.key("crops").value(o.result.crops);
    } else {
      w.key("error").value(o.error);
    }
    w.end_object();
  }
  w.end_array();
  w.end_object();
  return w.str();
}

/// Generates one portfolio per pair under cfg.out/<name>/ using up to
/// `jobs` worker threads, then writes cfg.out/summary.json. Per-pair
/// failures are recorded, never thrown.
inline BatchSummary run_batch(const std::vector<BatchPair> &pairs, const RunConfig &cfg,
                              unsigned jobs) {
  cfg.validate();
  if (cfg.out.empty()) {
    throw InvalidInput("no output directory given");
  }
  fs::create_directories(cfg.out);
  BatchSummary summary;
  summary.outcomes.resize(pairs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next.fetch_add(1); k < pairs.size(); k = next.fetch_add(1)) {
      BatchOutcome &o = summary.outcomes[k];
      o.name = pairs[k].name;
      RunConfig pair_cfg = cfg;
      pair_cfg.out = cfg.out / pairs[k].name;
      try {
        o.result = generate_portfolio(pairs[k].image, pairs[k].attn, pair_cfg);
        o.ok = true;
      } catch (const std::exception &e) {
        o.error = e.what();
      }
    }
  };
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(pairs.size(), 1))));
  std::vector<std::jthread> pool;
  for (unsigned t = 1; t < jobs; ++t) {
    pool.emplace_back(worker);
  }
  worker();
  pool.clear();
  detail::write_text(cfg.out / "summary.json", render_batch_summary(summary, cfg.precision));
  return summary;
}

// ---------------------------------------------------------------------------
// Sweep

struct SweepRow {
  std::string label;
  Portfolio portfolio;
};

inline std::vector<SweepRow> run_sweep(const fs::path &image_path, const fs::path &dump_path,
                                       const std::vector<std::string> &labels,
                                       std::int64_t resolution) {
  std::vector<ScaleConfig> configs;
  for (const auto &l : labels) {
    configs.push_back(sweep_preset(l, resolution));
  }
  const LoadedPair pair = load_pair(image_path, dump_path);
  std::vector<SweepRow> rows;
  for (std::size_t k = 0; k < labels.size(); ++k) {
    rows.push_back({labels[k], build_portfolio(pair.grid, pair.geometry, configs[k])});
  }
  return rows;
}

/// One CSV row per configuration; per-level columns are padded with empty
/// cells up to the deepest configuration in the sweep.
inline std::string render_sweep_csv(const std::vector<SweepRow> &rows, int precision) {
  std::size_t depth = 0;
  for (const auto &r : rows) {
    depth = std::max(depth, r.portfolio.levels.size());
  }
  std::ostringstream out;
  out << "label,levels,h_norm";
  for (std::size_t k = 0; k < depth; ++k) {
    out << ",alpha_" << k << ",side_" << k << ",width_" << k << ",center_x_" << k << ",center_y_"
        << k;
  }
  out << '\n';
  for (const auto &r : rows) {
    const Portfolio &p = r.portfolio;
    out << r.label << ',' << p.config.levels << ',' << format_fixed(p.h_norm, precision);
    for (std::size_t k = 0; k < depth; ++k) {
      if (k < p.levels.size()) {
        const auto &lvl = p.levels[k];
        out << ',' << format_fixed(lvl.alpha, precision) << ',' << lvl.requested_side << ','
            << lvl.rect.bounds.width() << ',' << format_fixed(lvl.center.point.x, precision)
            << ',' << format_fixed(lvl.center.point.y, precision);
      } else {
        out << ",,,,,";
      }
    }
    out << '\n';
  }
  return out.str();
}

} // namespace vfunnel
