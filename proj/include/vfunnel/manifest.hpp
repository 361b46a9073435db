#pragma once

// manifest.json rendering. Keys are emitted in a fixed order and every real
// number uses fixed-point notation at the configured precision, so that
// identical inputs always give byte-identical files.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "vfunnel/dump.hpp"
#include "vfunnel/portfolio.hpp"
#include "vfunnel/run_config.hpp"

namespace vfunnel {

/// Fixed-point rendering without a negative sign on values that round to zero.
inline std::string format_fixed(double v, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", precision, v);
  std::string s = buf;
  if (s.front() == '-' && s.find_first_not_of("-0.") == std::string::npos) {
    s.erase(0, 1);
  }
  return s;
}

/// Streaming JSON text writer with two-space indentation. Containers opened
/// with `inline_layout` stay on one line.
class JsonText {
public:
  explicit JsonText(int precision) : precision_(precision) {}

  JsonText &begin_object(bool inline_layout = false) { return open('{', inline_layout); }
  JsonText &end_object() { return close('}'); }
  JsonText &begin_array(bool inline_layout = false) { return open('[', inline_layout); }
  JsonText &end_array() { return close(']'); }

  JsonText &key(std::string_view k) {
    separator();
    out_ += nlohmann::json(std::string(k)).dump();
    out_ += ": ";
    pending_key_ = true;
    return *this;
  }

  JsonText &value(double v) { return scalar(format_fixed(v, precision_)); }
  JsonText &value(std::int64_t v) { return scalar(std::to_string(v)); }
  JsonText &value(std::size_t v) { return scalar(std::to_string(v)); }
  JsonText &value(int v) { return scalar(std::to_string(v)); }
  JsonText &value(bool v) { return scalar(v ? "true" : "false"); }
  JsonText &value(std::string_view v) { return scalar(nlohmann::json(std::string(v)).dump()); }
  JsonText &value(const char *v) { return value(std::string_view(v)); }
  JsonText &null() { return scalar("null"); }

  JsonText &bounds(const PixelBounds &b) {
    begin_array(true);
    value(b.left).value(b.top).value(b.right).value(b.bottom);
    return end_array();
  }
  JsonText &point(const Point &p) {
    begin_array(true);
    value(p.x).value(p.y);
    return end_array();
  }

  std::string str() const { return out_ + "\n"; }

private:
  struct Frame {
    bool inline_layout;
    bool first = true;
  };

  bool is_inline() const { return !stack_.empty() && stack_.back().inline_layout; }

  void newline() {
    out_ += '\n';
    out_.append(stack_.size() * 2, ' ');
  }

  void separator() {
    if (pending_key_) {
      pending_key_ = false;
      return;
    }
    if (stack_.empty()) {
      return;
    }
    Frame &f = stack_.back();
    if (!f.first) {
      out_ += ',';
      if (f.inline_layout) {
        out_ += ' ';
      }
    }
    if (!f.inline_layout) {
      newline();
    }
    f.first = false;
  }

  JsonText &scalar(const std::string &text) {
    separator();
    out_ += text;
    return *this;
  }

  JsonText &open(char c, bool inline_layout) {
    separator();
    out_ += c;
    stack_.push_back({inline_layout || is_inline()});
    return *this;
  }

  JsonText &close(char c) {
    const Frame f = stack_.back();
    stack_.pop_back();
    if (!f.inline_layout && !f.first) {
      newline();
    }
    out_ += c;
    return *this;
  }

  int precision_;
  std::string out_;
  std::vector<Frame> stack_;
  bool pending_key_ = false;
};

struct ManifestContext {
  std::string image_file;
  RunMode mode;
  int precision = 9;
  std::optional<DumpProvenance> provenance;
  std::vector<std::string> dump_flags;
};

inline std::string crop_file_name(std::size_t index) {
  return "crop_" + std::to_string(index) + ".png";
}

namespace detail {

inline void write_header(JsonText &w, const ManifestContext &ctx, const GridGeometry &geom,
                         bool grid_degenerate, double h_norm) {
  w.key("format").value("vfunnel-portfolio");
  w.key("version").value(1);
  w.key("mode").value(ctx.mode.label());
  w.key("image").begin_object();
  w.key("file").value(ctx.image_file);
  w.key("width").value(geom.image_width());
  w.key("height").value(geom.image_height());
  w.end_object();
  w.key("grid").begin_object();
  w.key("rows").value(geom.rows());
  w.key("cols").value(geom.cols());
  w.key("degenerate").value(grid_degenerate);
  w.end_object();
  if (ctx.provenance) {
    w.key("provenance").begin_object();
    w.key("model").value(ctx.provenance->model);
    w.key("prompt").value(ctx.provenance->prompt);
    w.key("question").value(ctx.provenance->question);
    w.end_object();
  }
  w.key("dump_flags").begin_array(true);
  for (const auto &f : ctx.dump_flags) {
    w.value(f);
  }
  w.end_array();
  w.key("h_norm").value(h_norm);
}

} // namespace detail

/// Manifest for an entropy-scaled portfolio (funnel or static mode).
inline std::string render_manifest(const Portfolio &p, const ManifestContext &ctx) {
  JsonText w(ctx.precision);
  w.begin_object();
  detail::write_header(w, ctx, p.geometry, p.grid_degenerate, p.h_norm);

  w.key("config").begin_object();
  w.key("resolution").value(p.config.input_resolution);
  w.key("levels").value(p.config.levels);
  w.key("params").begin_array();
  for (std::size_t k = 0; k < p.config.params.size(); ++k) {
    const LevelParams &lp = p.config.params[k];
    w.begin_object(true);
    w.key("level").value(k + 1);
    w.key("beta").value(lp.beta);
    w.key("gamma").value(lp.gamma);
    w.key("extrapolated").value(lp.extrapolated);
    w.end_object();
  }
  w.end_array();
  w.end_object();

  w.key("alphas").begin_array(true);
  for (std::size_t k = 1; k < p.levels.size(); ++k) {
    w.value(p.levels[k].alpha);
  }
  w.end_array();

  w.key("token_order").begin_array(true);
  w.value("original");
  for (const auto &lvl : p.levels) {
    w.value(lvl.label());
  }
  w.end_array();

  std::vector<std::size_t> degenerate_levels;
  std::vector<std::size_t> fallback_levels;
  std::vector<std::size_t> distorted;
  w.key("crops").begin_array();
  for (std::size_t k = 0; k < p.levels.size(); ++k) {
    const PortfolioLevel &lvl = p.levels[k];
    const bool aspect = lvl.rect.bounds.width() != lvl.rect.bounds.height();
    if (lvl.center.degenerate) {
      degenerate_levels.push_back(k);
    }
    if (lvl.center.nearest_fallback) {
      fallback_levels.push_back(k);
    }
    if (aspect) {
      distorted.push_back(k);
    }
    w.begin_object();
    w.key("index").value(k);
    w.key("level").value(lvl.level);
    w.key("label").value(lvl.label());
    w.key("file").value(crop_file_name(k));
    w.key("parent").bounds(lvl.parent.bounds);
    w.key("center").point(lvl.center.point);
    w.key("alpha").value(lvl.alpha);
    w.key("requested_side").value(lvl.requested_side);
    w.key("bounds").bounds(lvl.rect.bounds);
    w.key("center_degenerate").value(lvl.center.degenerate);
    w.key("center_fallback").value(lvl.center.nearest_fallback);
    w.key("aspect_distorted").value(aspect);
    w.end_object();
  }
  w.end_array();

  auto index_list = [&w](const char *name, const std::vector<std::size_t> &items) {
    w.key(name).begin_array(true);
    for (auto v : items) {
      w.value(v);
    }
    w.end_array();
  };
  std::vector<std::size_t> extrapolated;
  for (std::size_t k = 0; k < p.config.params.size(); ++k) {
    if (p.config.params[k].extrapolated) {
      extrapolated.push_back(k + 1);
    }
  }
  w.key("flags").begin_object();
  w.key("grid_degenerate").value(p.grid_degenerate);
  index_list("center_degenerate_levels", degenerate_levels);
  index_list("center_fallback_levels", fallback_levels);
  index_list("extrapolated_levels", extrapolated);
  index_list("aspect_distorted_crops", distorted);
  w.end_object();

  w.end_object();
  return w.str();
}

struct TopKSummary {
  GridGeometry geometry;
  double h_norm = 0.0;
  bool grid_degenerate = false;
  std::int64_t resolution = 0;
  double window_side = 0.0;
  double max_iou = 0.0;
  std::vector<ScoredCrop> crops;
};

/// Manifest for the unstructured Top-K baseline.
inline std::string render_topk_manifest(const TopKSummary &t, const ManifestContext &ctx) {
  JsonText w(ctx.precision);
  w.begin_object();
  detail::write_header(w, ctx, t.geometry, t.grid_degenerate, t.h_norm);

  w.key("config").begin_object();
  w.key("resolution").value(t.resolution);
  w.key("k").value(ctx.mode.topk);
  w.key("window_side").value(t.window_side);
  w.key("max_iou").value(t.max_iou);
  w.key("anchoring").value("block-center");
  w.end_object();

  w.key("token_order").begin_array(true);
  w.value("original");
  for (std::size_t k = 0; k < t.crops.size(); ++k) {
    w.value("topk_" + std::to_string(k + 1));
  }
  w.end_array();

  std::vector<std::size_t> distorted;
  w.key("crops").begin_array();
  for (std::size_t k = 0; k < t.crops.size(); ++k) {
    const ScoredCrop &c = t.crops[k];
    const bool aspect = c.rect.bounds.width() != c.rect.bounds.height();
    if (aspect) {
      distorted.push_back(k);
    }
    w.begin_object();
    w.key("index").value(k);
    w.key("label").value("topk_" + std::to_string(k + 1));
    w.key("file").value(crop_file_name(k));
    w.key("anchor").begin_array(true).value(c.anchor.row).value(c.anchor.col).end_array();
    w.key("center").point(c.rect.center);
    w.key("score").value(c.score);
    w.key("bounds").bounds(c.rect.bounds);
    w.key("aspect_distorted").value(aspect);
    w.end_object();
  }
  w.end_array();

  w.key("flags").begin_object();
  w.key("grid_degenerate").value(t.grid_degenerate);
  w.key("aspect_distorted_crops").begin_array(true);
  for (auto v : distorted) {
    w.value(v);
  }
  w.end_array();
  w.end_object();

  w.end_object();
  return w.str();
}

} // namespace vfunnel
