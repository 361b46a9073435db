#pragma once

// In-memory 8-bit RGB rasters: crop extraction, resize to the model input
// resolution, and portfolio overlays.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vfunnel/error.hpp"
#include "vfunnel/geometry.hpp"
#include "vfunnel/portfolio.hpp"

namespace vfunnel {

using Rgb = std::array<std::uint8_t, 3>;

class RasterImage {
public:
  RasterImage() = default;
  RasterImage(std::int64_t width, std::int64_t height, Rgb fill = {0, 0, 0})
      : width_(width), height_(height) {
    if (width < 1 || height < 1) {
      throw InvalidInput("raster: dimensions must be at least 1x1");
    }
    pixels_.resize(static_cast<std::size_t>(width * height) * 3);
    for (std::size_t k = 0; k < pixels_.size(); k += 3) {
      pixels_[k] = fill[0];
      pixels_[k + 1] = fill[1];
      pixels_[k + 2] = fill[2];
    }
  }
  RasterImage(std::int64_t width, std::int64_t height, std::vector<std::uint8_t> rgb)
      : width_(width), height_(height), pixels_(std::move(rgb)) {
    if (width < 1 || height < 1) {
      throw InvalidInput("raster: dimensions must be at least 1x1");
    }
    if (pixels_.size() != static_cast<std::size_t>(width * height) * 3) {
      throw InvalidInput("raster: sample buffer does not match dimensions");
    }
  }

  std::int64_t width() const { return width_; }
  std::int64_t height() const { return height_; }
  bool empty() const { return pixels_.empty(); }

  Rgb pixel(std::int64_t x, std::int64_t y) const {
    const std::size_t k = index(x, y);
    return {pixels_[k], pixels_[k + 1], pixels_[k + 2]};
  }
  void set_pixel(std::int64_t x, std::int64_t y, Rgb c) {
    const std::size_t k = index(x, y);
    pixels_[k] = c[0];
    pixels_[k + 1] = c[1];
    pixels_[k + 2] = c[2];
  }
  std::uint8_t sample(std::int64_t x, std::int64_t y, int channel) const {
    return pixels_[index(x, y) + static_cast<std::size_t>(channel)];
  }

  std::span<const std::uint8_t> data() const { return pixels_; }

  friend bool operator==(const RasterImage &, const RasterImage &) = default;

private:
  std::size_t index(std::int64_t x, std::int64_t y) const {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
            static_cast<std::size_t>(x)) *
           3;
  }

  std::int64_t width_ = 0;
  std::int64_t height_ = 0;
  std::vector<std::uint8_t> pixels_;
};

inline RasterImage extract_crop(const RasterImage &img, const PixelBounds &rect) {
  if (rect.left < 0 || rect.top < 0 || rect.right > img.width() || rect.bottom > img.height() ||
      rect.width() < 1 || rect.height() < 1) {
    throw InvalidInput("extract_crop: rect lies outside the image");
  }
  std::vector<std::uint8_t> out;
  out.reserve(static_cast<std::size_t>(rect.area()) * 3);
  const auto src = img.data();
  for (std::int64_t y = rect.top; y < rect.bottom; ++y) {
    const auto row = src.subspan(static_cast<std::size_t>((y * img.width() + rect.left) * 3),
                                 static_cast<std::size_t>(rect.width() * 3));
    out.insert(out.end(), row.begin(), row.end());
  }
  return RasterImage(rect.width(), rect.height(), std::move(out));
}

inline RasterImage extract_crop(const RasterImage &img, const CropRect &rect) {
  return extract_crop(img, rect.bounds);
}

namespace detail {

struct Tap {
  std::int64_t lo;
  std::int64_t hi;
  double frac;
};

// Half-pixel aligned source position for each destination sample.
inline std::vector<Tap> bilinear_taps(std::int64_t src, std::int64_t dst) {
  std::vector<Tap> taps(static_cast<std::size_t>(dst));
  const double scale = static_cast<double>(src) / static_cast<double>(dst);
  for (std::int64_t d = 0; d < dst; ++d) {
    double pos = (static_cast<double>(d) + 0.5) * scale - 0.5;
    pos = std::clamp(pos, 0.0, static_cast<double>(src - 1));
    const auto lo = static_cast<std::int64_t>(std::floor(pos));
    const std::int64_t hi = std::min(lo + 1, src - 1);
    taps[static_cast<std::size_t>(d)] = {lo, hi, pos - static_cast<double>(lo)};
  }
  return taps;
}

} // namespace detail

/// Bilinear resize with half-pixel center alignment. Output dimensions
/// equal to the input return an exact copy.
inline RasterImage resize_bilinear(const RasterImage &img, std::int64_t out_w, std::int64_t out_h) {
  if (out_w < 1 || out_h < 1) {
    throw InvalidInput("resize: output size must be at least 1x1");
  }
  if (img.empty()) {
    throw InvalidInput("resize: empty image");
  }
  if (out_w == img.width() && out_h == img.height()) {
    return img;
  }
  const auto xs = detail::bilinear_taps(img.width(), out_w);
  const auto ys = detail::bilinear_taps(img.height(), out_h);
  std::vector<std::uint8_t> out(static_cast<std::size_t>(out_w * out_h) * 3);
  std::size_t k = 0;
  for (const detail::Tap &ty : ys) {
    for (const detail::Tap &tx : xs) {
      for (int c = 0; c < 3; ++c) {
        const double top = (1.0 - tx.frac) * img.sample(tx.lo, ty.lo, c) +
                           tx.frac * img.sample(tx.hi, ty.lo, c);
        const double bot = (1.0 - tx.frac) * img.sample(tx.lo, ty.hi, c) +
                           tx.frac * img.sample(tx.hi, ty.hi, c);
        const double v = (1.0 - ty.frac) * top + ty.frac * bot;
        out[k++] = static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
      }
    }
  }
  return RasterImage(out_w, out_h, std::move(out));
}

inline RasterImage resize_to_s(const RasterImage &img, std::int64_t s) {
  if (s < 1) {
    throw InvalidInput("resize_to_s: target side must be at least 1");
  }
  return resize_bilinear(img, s, s);
}

// Outline colors, one per portfolio level; baseline windows share one color.
inline constexpr std::array<Rgb, 5> kLevelColors = {{
    {255, 48, 48},   // focal
    {48, 200, 64},   // immediate
    {48, 96, 255},   // broader
    {255, 64, 255},  // global
    {255, 160, 0},   // deeper levels
}};
inline constexpr Rgb kBaselineColor = {255, 235, 0};
inline constexpr std::int64_t kStrokeWidth = 2;

inline Rgb level_color(std::size_t level) {
  return kLevelColors[std::min(level, kLevelColors.size() - 1)];
}

/// Paints a `kStrokeWidth` outline just inside `rect`.
inline void draw_outline(RasterImage &img, const PixelBounds &rect, Rgb color) {
  const std::int64_t l = std::max<std::int64_t>(rect.left, 0);
  const std::int64_t t = std::max<std::int64_t>(rect.top, 0);
  const std::int64_t r = std::min(rect.right, img.width());
  const std::int64_t b = std::min(rect.bottom, img.height());
  if (l >= r || t >= b) {
    return;
  }
  for (std::int64_t y = t; y < b; ++y) {
    for (std::int64_t x = l; x < r; ++x) {
      const bool edge = x < l + kStrokeWidth || x >= r - kStrokeWidth || y < t + kStrokeWidth ||
                        y >= b - kStrokeWidth;
      if (edge) {
        img.set_pixel(x, y, color);
      }
    }
  }
}

/// Copy of `img` with baseline windows outlined first, then portfolio levels
/// in increasing order so deeper levels paint over shallower ones.
inline RasterImage render_overlay(const RasterImage &img, const Portfolio &portfolio,
                                  std::span<const ScoredCrop> baseline = {}) {
  RasterImage out = img;
  for (const ScoredCrop &c : baseline) {
    draw_outline(out, c.rect.bounds, kBaselineColor);
  }
  for (const PortfolioLevel &lvl : portfolio.levels) {
    draw_outline(out, lvl.rect.bounds, level_color(lvl.level));
  }
  return out;
}

} // namespace vfunnel
