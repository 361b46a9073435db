#pragma once

// Patch-grid <-> pixel-space mapping and square crop rectangles.
//
// Pixel origin is the top-left corner, x grows rightward and y downward.
// Integer bounds are half-open: a rect covers [left, right) x [top, bottom).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "vfunnel/error.hpp"
#include "vfunnel/numeric.hpp"

namespace vfunnel {

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point &, const Point &) = default;
};

struct BlockIndex {
  std::size_t row = 0;
  std::size_t col = 0;

  friend auto operator<=>(const BlockIndex &, const BlockIndex &) = default;
};

struct PixelBounds {
  std::int64_t left = 0;
  std::int64_t top = 0;
  std::int64_t right = 0;
  std::int64_t bottom = 0;

  std::int64_t width() const { return right - left; }
  std::int64_t height() const { return bottom - top; }
  std::int64_t area() const { return width() * height(); }
  Point center() const {
    return {0.5 * static_cast<double>(left + right), 0.5 * static_cast<double>(top + bottom)};
  }
  bool contains(Point p) const {
    return p.x >= static_cast<double>(left) && p.x < static_cast<double>(right) &&
           p.y >= static_cast<double>(top) && p.y < static_cast<double>(bottom);
  }

  friend bool operator==(const PixelBounds &, const PixelBounds &) = default;
};

/// Area of the intersection of two rects (0 when they only touch).
inline std::int64_t intersection_area(const PixelBounds &a, const PixelBounds &b) {
  const std::int64_t w = std::min(a.right, b.right) - std::max(a.left, b.left);
  const std::int64_t h = std::min(a.bottom, b.bottom) - std::max(a.top, b.top);
  return (w > 0 && h > 0) ? w * h : 0;
}

inline double intersection_over_union(const PixelBounds &a, const PixelBounds &b) {
  const std::int64_t inter = intersection_area(a, b);
  const std::int64_t uni = a.area() + b.area() - inter;
  return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

/// Image size plus the attention patch grid laid over it. Blocks need not
/// be integral in pixel size.
class GridGeometry {
public:
  GridGeometry(std::int64_t image_width, std::int64_t image_height, std::size_t rows,
               std::size_t cols)
      : width_(image_width), height_(image_height), rows_(rows), cols_(cols) {
    if (width_ < 1 || height_ < 1) {
      throw InvalidInput("geometry: image dimensions must be at least 1x1");
    }
    if (rows_ < 1 || cols_ < 1) {
      throw InvalidInput("geometry: grid dimensions must be at least 1x1");
    }
  }

  std::int64_t image_width() const { return width_; }
  std::int64_t image_height() const { return height_; }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double block_width() const { return static_cast<double>(width_) / static_cast<double>(cols_); }
  double block_height() const { return static_cast<double>(height_) / static_cast<double>(rows_); }
  PixelBounds image_bounds() const { return {0, 0, width_, height_}; }

  friend bool operator==(const GridGeometry &, const GridGeometry &) = default;

private:
  std::int64_t width_;
  std::int64_t height_;
  std::size_t rows_;
  std::size_t cols_;
};

/// A crop request (center, side) together with its finalized integer bounds.
struct CropRect {
  Point center;
  double side = 0.0;
  PixelBounds bounds;

  /// The whole image as a region; not square in general.
  static CropRect full_image(const GridGeometry &geom) {
    const PixelBounds b = geom.image_bounds();
    return {b.center(),
            static_cast<double>(std::max(geom.image_width(), geom.image_height())), b};
  }

  friend bool operator==(const CropRect &, const CropRect &) = default;
};

inline Point block_center(const GridGeometry &geom, std::size_t i, std::size_t j) {
  if (i >= geom.rows() || j >= geom.cols()) {
    throw InvalidInput("block_center: block (" + std::to_string(i) + "," + std::to_string(j) +
                       ") outside " + std::to_string(geom.rows()) + "x" +
                       std::to_string(geom.cols()) + " grid");
  }
  return {(static_cast<double>(j) + 0.5) * static_cast<double>(geom.image_width()) /
              static_cast<double>(geom.cols()),
          (static_cast<double>(i) + 0.5) * static_cast<double>(geom.image_height()) /
              static_cast<double>(geom.rows())};
}

namespace detail {

// Places an integer span of `len` as close as possible to being centered on
// `center`, then slides it into [0, limit].
inline std::int64_t place_span(double center, std::int64_t len, std::int64_t limit) {
  const double start = std::floor(center - 0.5 * static_cast<double>(len) + 0.5);
  const double hi = static_cast<double>(limit - len);
  return static_cast<std::int64_t>(std::clamp(start, 0.0, hi));
}

} // namespace detail

/// Square window of the requested side around `center`, kept inside the image.
/// The side shrinks only when it exceeds an image dimension; otherwise the
/// window slides inward so its context width is preserved.
inline CropRect clamp_square(Point center, double side, const GridGeometry &geom) {
  if (!(side > 0.0) || !std::isfinite(side)) {
    throw InvalidInput("clamp_square: side must be positive and finite");
  }
  if (!std::isfinite(center.x) || !std::isfinite(center.y)) {
    throw InvalidInput("clamp_square: center must be finite");
  }
  const double limit = static_cast<double>(std::min(geom.image_width(), geom.image_height()));
  const auto len = static_cast<std::int64_t>(std::ceil(std::min(side, limit)));
  const std::int64_t left = detail::place_span(center.x, len, geom.image_width());
  const std::int64_t top = detail::place_span(center.y, len, geom.image_height());
  return {center, side, {left, top, left + len, top + len}};
}

/// Blocks whose centers fall inside `bounds`, in row-major order. When no
/// center is covered, the single block nearest the rect center is returned.
inline std::vector<BlockIndex> blocks_in_rect(const PixelBounds &bounds, const GridGeometry &geom) {
  std::vector<BlockIndex> out;
  for (std::size_t i = 0; i < geom.rows(); ++i) {
    for (std::size_t j = 0; j < geom.cols(); ++j) {
      if (bounds.contains(block_center(geom, i, j))) {
        out.push_back({i, j});
      }
    }
  }
  if (!out.empty()) {
    return out;
  }
  const Point target = bounds.center();
  BlockIndex best{};
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < geom.rows(); ++i) {
    for (std::size_t j = 0; j < geom.cols(); ++j) {
      const Point c = block_center(geom, i, j);
      const double d2 = (c.x - target.x) * (c.x - target.x) + (c.y - target.y) * (c.y - target.y);
      if (d2 < best_d2) {
        best_d2 = d2;
        best = {i, j};
      }
    }
  }
  out.push_back(best);
  return out;
}

inline std::vector<BlockIndex> blocks_in_rect(const CropRect &rect, const GridGeometry &geom) {
  return blocks_in_rect(rect.bounds, geom);
}

} // namespace vfunnel
