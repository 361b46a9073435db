#pragma once

// Entropy-scaled multi-scale crop portfolios and the unstructured Top-K
// baseline, both driven by a normalized attention grid.
//
// A portfolio of K levels is built as follows. Level 0 is an S x S crop
// around the attention centroid of the whole image. Each level k >= 1 takes
// the finalized rect of level k-1 as its parent region, recomputes the
// attention centroid restricted to that region and places a square of side
// round(alpha_k * S) there, where alpha_k = beta_k + gamma_k * H_norm.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vfunnel/attention.hpp"
#include "vfunnel/error.hpp"
#include "vfunnel/geometry.hpp"

namespace vfunnel {

/// Expansion parameters of one context level: alpha = beta + gamma * H_norm.
struct LevelParams {
  double beta = 1.0;
  double gamma = 0.0;
  // No published value exists for this level; the numbers are an extension
  // of the default progression.
  bool extrapolated = false;

  friend bool operator==(const LevelParams &, const LevelParams &) = default;
};

struct ScaleConfig {
  std::int64_t input_resolution = 336;
  std::size_t levels = 3;
  // params[k-1] configures level k, so params.size() == levels - 1.
  std::vector<LevelParams> params;

  static constexpr std::size_t kMaxDefaultLevels = 4;

  /// Default (beta, gamma) per context level, indexed by level - 1.
  static LevelParams default_level(std::size_t level) {
    switch (level) {
    case 1:
      return {1.2, 0.6, false};
    case 2:
      return {1.6, 1.2, false};
    case 3:
      return {2.0, 1.6, true};
    default:
      throw InvalidInput("no default expansion parameters for level " + std::to_string(level));
    }
  }

  static ScaleConfig defaults(std::size_t levels = 3, std::int64_t resolution = 336) {
    ScaleConfig cfg;
    cfg.input_resolution = resolution;
    cfg.levels = levels;
    for (std::size_t k = 1; k < levels; ++k) {
      cfg.params.push_back(default_level(k));
    }
    return cfg;
  }

  void validate() const {
    if (input_resolution < 1) {
      throw InvalidInput("scale config: input resolution must be at least 1");
    }
    const std::size_t expected = levels > 0 ? levels - 1 : 0;
    if (params.size() != expected) {
      throw InvalidInput("scale config: " + std::to_string(levels) + " levels need " +
                         std::to_string(expected) + " (beta, gamma) pairs, got " +
                         std::to_string(params.size()));
    }
    for (std::size_t k = 0; k < params.size(); ++k) {
      const LevelParams &p = params[k];
      if (!std::isfinite(p.beta) || p.beta < 1.0) {
        throw InvalidInput("scale config: beta_" + std::to_string(k + 1) + " must be >= 1");
      }
      if (!std::isfinite(p.gamma) || p.gamma < 0.0) {
        throw InvalidInput("scale config: gamma_" + std::to_string(k + 1) + " must be >= 0");
      }
    }
  }

  friend bool operator==(const ScaleConfig &, const ScaleConfig &) = default;
};

/// Decimal resolution of expansion factors and refined centers.
inline constexpr int kAlphaDigits = 12;
inline constexpr int kCenterDigits = 9;

inline double expansion_factor(std::size_t level, double h_norm, const ScaleConfig &cfg) {
  if (level < 1 || level >= cfg.levels || level > cfg.params.size()) {
    throw InvalidInput("expansion_factor: level " + std::to_string(level) +
                       " outside [1, " + std::to_string(cfg.levels) + ")");
  }
  if (!(h_norm >= 0.0 && h_norm <= 1.0)) {
    throw InvalidInput("expansion_factor: entropy must lie in [0, 1]");
  }
  const LevelParams &p = cfg.params[level - 1];
  return snap_decimal(p.beta + p.gamma * h_norm, kAlphaDigits);
}

/// Integer side length for a level with expansion factor `alpha`, rounding halves up.
inline std::int64_t scaled_side(double alpha, std::int64_t resolution) {
  return static_cast<std::int64_t>(std::floor(alpha * static_cast<double>(resolution) + 0.5));
}

struct RefinedCenter {
  Point point;
  // Region held no attention mass; point is the region's geometric center.
  bool degenerate = false;
  // No block center lay inside the region; the nearest block stood in and
  // its center was projected onto the region.
  bool nearest_fallback = false;

  friend bool operator==(const RefinedCenter &, const RefinedCenter &) = default;
};

namespace detail {

inline void require_grid_matches(const AttentionGrid &grid, const GridGeometry &geom,
                                 const char *who) {
  if (!grid.normalized()) {
    throw InvalidInput(std::string(who) + ": attention grid is not normalized");
  }
  if (grid.rows() != geom.rows() || grid.cols() != geom.cols()) {
    throw InvalidInput(std::string(who) + ": grid is " + std::to_string(grid.rows()) + "x" +
                       std::to_string(grid.cols()) + " but geometry expects " +
                       std::to_string(geom.rows()) + "x" + std::to_string(geom.cols()));
  }
}

} // namespace detail

/// Attention-weighted mean of the block centers covered by `region`.
inline RefinedCenter refine_center(const AttentionGrid &grid, const CropRect &region,
                                   const GridGeometry &geom) {
  detail::require_grid_matches(grid, geom, "refine_center");
  const std::vector<BlockIndex> blocks = blocks_in_rect(region, geom);
  double sw = 0.0;
  double sx = 0.0;
  double sy = 0.0;
  for (const BlockIndex &b : blocks) {
    const double w = grid.at(b.row, b.col);
    const Point c = block_center(geom, b.row, b.col);
    sw += w;
    sx += w * c.x;
    sy += w * c.y;
  }
  const PixelBounds &r = region.bounds;
  if (sw <= 0.0) {
    return {r.center(), true, false};
  }
  RefinedCenter out{{snap_decimal(sx / sw, kCenterDigits), snap_decimal(sy / sw, kCenterDigits)},
                    false, false};
  if (blocks.size() == 1 && !r.contains(block_center(geom, blocks[0].row, blocks[0].col))) {
    out.nearest_fallback = true;
    out.point.x = std::clamp(out.point.x, static_cast<double>(r.left), static_cast<double>(r.right));
    out.point.y = std::clamp(out.point.y, static_cast<double>(r.top), static_cast<double>(r.bottom));
  }
  return out;
}

inline std::string level_label(std::size_t level) {
  switch (level) {
  case 0:
    return "focal";
  case 1:
    return "immediate";
  case 2:
    return "broader";
  case 3:
    return "global";
  default:
    return "level_" + std::to_string(level);
  }
}

struct PortfolioLevel {
  std::size_t level = 0;
  // Region the center was refined in: the whole image for level 0,
  // otherwise the finalized rect of the previous level.
  CropRect parent;
  RefinedCenter center;
  double alpha = 1.0;
  std::int64_t requested_side = 0;
  CropRect rect;

  std::string label() const { return level_label(level); }

  friend bool operator==(const PortfolioLevel &, const PortfolioLevel &) = default;
};

struct Portfolio {
  GridGeometry geometry;
  ScaleConfig config;
  double h_norm = 0.0;
  bool grid_degenerate = false;
  std::vector<PortfolioLevel> levels;

  std::size_t crop_count() const { return levels.size(); }

  friend bool operator==(const Portfolio &, const Portfolio &) = default;
};

inline Portfolio build_portfolio(const AttentionGrid &grid, const GridGeometry &geom,
                                 const ScaleConfig &cfg) {
  cfg.validate();
  detail::require_grid_matches(grid, geom, "build_portfolio");

  Portfolio out{geom, cfg, entropy_norm(grid), grid.degenerate(), {}};
  CropRect parent = CropRect::full_image(geom);
  for (std::size_t k = 0; k < cfg.levels; ++k) {
    PortfolioLevel lvl;
    lvl.level = k;
    lvl.parent = parent;
    lvl.center = refine_center(grid, parent, geom);
    lvl.alpha = k == 0 ? 1.0 : expansion_factor(k, out.h_norm, cfg);
    lvl.requested_side = k == 0 ? cfg.input_resolution : scaled_side(lvl.alpha, cfg.input_resolution);
    lvl.rect = clamp_square(lvl.center.point, static_cast<double>(lvl.requested_side), geom);
    parent = lvl.rect;
    out.levels.push_back(lvl);
  }
  return out;
}

struct ScoredCrop {
  BlockIndex anchor;
  CropRect rect;
  double score = 0.0;

  friend bool operator==(const ScoredCrop &, const ScoredCrop &) = default;
};

/// Mean grid value over the blocks a window covers.
inline double window_score(const AttentionGrid &grid, const CropRect &window,
                           const GridGeometry &geom) {
  const std::vector<BlockIndex> blocks = blocks_in_rect(window, geom);
  double sum = 0.0;
  for (const BlockIndex &b : blocks) {
    sum += grid.at(b.row, b.col);
  }
  return sum / static_cast<double>(blocks.size());
}

/// True when two selected windows may not coexist. With `max_iou` == 0 any
/// positive-area intersection conflicts.
inline bool windows_conflict(const PixelBounds &a, const PixelBounds &b, double max_iou) {
  if (max_iou <= 0.0) {
    return intersection_area(a, b) > 0;
  }
  return intersection_over_union(a, b) > max_iou;
}

/// Greedy selection of the k best-scoring mutually non-overlapping windows
/// anchored at block centers. Ties go to the smaller (row, col) anchor.
inline std::vector<ScoredCrop> top_k_crops(const AttentionGrid &grid, const GridGeometry &geom,
                                           std::size_t k, double window_side,
                                           double max_iou = 0.0) {
  detail::require_grid_matches(grid, geom, "top_k_crops");
  if (k < 1) {
    throw InvalidInput("top_k_crops: k must be at least 1");
  }
  if (!(max_iou >= 0.0 && max_iou < 1.0)) {
    throw InvalidInput("top_k_crops: overlap threshold must lie in [0, 1)");
  }

  std::vector<ScoredCrop> candidates;
  candidates.reserve(geom.rows() * geom.cols());
  for (std::size_t i = 0; i < geom.rows(); ++i) {
    for (std::size_t j = 0; j < geom.cols(); ++j) {
      const CropRect rect = clamp_square(block_center(geom, i, j), window_side, geom);
      candidates.push_back({{i, j}, rect, window_score(grid, rect, geom)});
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const ScoredCrop &a, const ScoredCrop &b) { return a.score > b.score; });

  std::vector<ScoredCrop> picked;
  for (const ScoredCrop &c : candidates) {
    if (picked.size() == k) {
      break;
    }
    const bool clash = std::any_of(picked.begin(), picked.end(), [&](const ScoredCrop &p) {
      return windows_conflict(p.rect.bounds, c.rect.bounds, max_iou);
    });
    if (!clash) {
      picked.push_back(c);
    }
  }
  return picked;
}

} // namespace vfunnel
