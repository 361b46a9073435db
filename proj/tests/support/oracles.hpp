#pragma once

// Brute-force reference computations used by the tests. Everything here is
// written directly from the defining formulas and shares no code path with
// the library beyond its plain data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "vfunnel/attention.hpp"
#include "vfunnel/geometry.hpp"
#include "vfunnel/imaging.hpp"

namespace vfunnel::oracle {

struct Rect {
  std::int64_t l, t, r, b;
  friend bool operator==(const Rect &, const Rect &) = default;
};

inline Rect to_rect(const PixelBounds &b) { return {b.left, b.top, b.right, b.bottom}; }

// Column-by-column mean over heads.
inline std::vector<double> head_mean(const std::vector<std::vector<double>> &heads) {
  std::vector<double> out;
  for (std::size_t t = 0; t < heads[0].size(); ++t) {
    double s = 0.0;
    for (std::size_t h = 0; h < heads.size(); ++h) {
      s += heads[h][t];
    }
    out.push_back(s / static_cast<double>(heads.size()));
  }
  return out;
}

// grid[p] = sum_t tok[t] * conn[t][p], computed patch by patch.
inline std::vector<double> matvec(const std::vector<double> &tok,
                                  const std::vector<std::vector<double>> &conn) {
  const std::size_t patches = conn[0].size();
  std::vector<double> out(patches, 0.0);
  for (std::size_t p = 0; p < patches; ++p) {
    for (std::size_t t = 0; t < tok.size(); ++t) {
      out[p] += tok[t] * conn[t][p];
    }
  }
  return out;
}

inline double cx(std::int64_t w, std::size_t cols, std::size_t j) {
  return (static_cast<double>(j) + 0.5) * static_cast<double>(w) / static_cast<double>(cols);
}
inline double cy(std::int64_t h, std::size_t rows, std::size_t i) {
  return (static_cast<double>(i) + 0.5) * static_cast<double>(h) / static_cast<double>(rows);
}

// Every (i, j) whose center lies in [l, r) x [t, b), by exhaustive scan.
inline std::vector<std::pair<std::size_t, std::size_t>>
covered_blocks(const Rect &rc, std::int64_t w, std::int64_t h, std::size_t rows, std::size_t cols) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      const double x = cx(w, cols, j);
      const double y = cy(h, rows, i);
      if (x >= static_cast<double>(rc.l) && x < static_cast<double>(rc.r) &&
          y >= static_cast<double>(rc.t) && y < static_cast<double>(rc.b)) {
        out.emplace_back(i, j);
      }
    }
  }
  return out;
}

struct Centroid {
  double x, y;
  bool empty;
};

// sum(c * w) / sum(w) over covered blocks; `empty` when no center is covered.
inline Centroid weighted_mean(const std::vector<double> &grid, const Rect &rc, std::int64_t w,
                              std::int64_t h, std::size_t rows, std::size_t cols) {
  double sw = 0.0, sx = 0.0, sy = 0.0;
  bool any = false;
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      const double x = cx(w, cols, j);
      const double y = cy(h, rows, i);
      if (x >= static_cast<double>(rc.l) && x < static_cast<double>(rc.r) &&
          y >= static_cast<double>(rc.t) && y < static_cast<double>(rc.b)) {
        any = true;
        const double a = grid[i * cols + j];
        sw += a;
        sx += a * x;
        sy += a * y;
      }
    }
  }
  if (!any || sw == 0.0) {
    return {0.0, 0.0, true};
  }
  return {sx / sw, sy / sw, false};
}

// Square window of integer side ceil(min(side, w, h)) positioned at the
// nearest integer offset to (x, y) and slid inside the image.
inline Rect square_window(double x, double y, double side, std::int64_t w, std::int64_t h) {
  const auto len = static_cast<std::int64_t>(
      std::ceil(std::min({side, static_cast<double>(w), static_cast<double>(h)})));
  auto place = [len](double c, std::int64_t lim) {
    auto s = static_cast<std::int64_t>(std::floor(c - static_cast<double>(len) / 2.0 + 0.5));
    if (s > lim - len) s = lim - len;
    if (s < 0) s = 0;
    return s;
  };
  const std::int64_t l = place(x, w);
  const std::int64_t t = place(y, h);
  return {l, t, l + len, t + len};
}

inline bool overlaps(const Rect &a, const Rect &b) {
  return std::min(a.r, b.r) > std::max(a.l, b.l) && std::min(a.b, b.b) > std::max(a.t, b.t);
}

struct Pick {
  std::size_t row, col;
  Rect rect;
  double score;
};

// Greedy re-simulation: at every step scan all candidates and take the best
// one that overlaps nothing picked so far, preferring the smaller (row, col).
inline std::vector<Pick> greedy_topk(const std::vector<double> &grid, std::int64_t w,
                                     std::int64_t h, std::size_t rows, std::size_t cols,
                                     std::size_t k, double side) {
  std::vector<Pick> all;
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      const Rect rc = square_window(cx(w, cols, j), cy(h, rows, i), side, w, h);
      auto blocks = covered_blocks(rc, w, h, rows, cols);
      double s = 0.0;
      if (blocks.empty()) {
        // nearest block to the window center
        const double mx = 0.5 * static_cast<double>(rc.l + rc.r);
        const double my = 0.5 * static_cast<double>(rc.t + rc.b);
        double best = 1e300;
        for (std::size_t a = 0; a < rows; ++a) {
          for (std::size_t b = 0; b < cols; ++b) {
            const double d = std::pow(cx(w, cols, b) - mx, 2) + std::pow(cy(h, rows, a) - my, 2);
            if (d < best) {
              best = d;
              s = grid[a * cols + b];
            }
          }
        }
      } else {
        for (auto [a, b] : blocks) {
          s += grid[a * cols + b];
        }
        s /= static_cast<double>(blocks.size());
      }
      all.push_back({i, j, rc, s});
    }
  }
  std::vector<Pick> picked;
  std::vector<bool> used(all.size(), false);
  while (picked.size() < k) {
    int best = -1;
    for (std::size_t c = 0; c < all.size(); ++c) {
      if (used[c]) continue;
      bool clash = false;
      for (const auto &p : picked) clash = clash || overlaps(p.rect, all[c].rect);
      if (clash) continue;
      if (best < 0 || all[c].score > all[static_cast<std::size_t>(best)].score) {
        best = static_cast<int>(c);
      }
    }
    if (best < 0) break;
    used[static_cast<std::size_t>(best)] = true;
    picked.push_back(all[static_cast<std::size_t>(best)]);
  }
  return picked;
}

// Scalar bilinear sample with half-pixel alignment, one channel at a time.
inline double bilinear_at(const RasterImage &img, int channel, std::int64_t ox, std::int64_t oy,
                          std::int64_t out_w, std::int64_t out_h) {
  const double sx = std::clamp((ox + 0.5) * img.width() / static_cast<double>(out_w) - 0.5, 0.0,
                               static_cast<double>(img.width() - 1));
  const double sy = std::clamp((oy + 0.5) * img.height() / static_cast<double>(out_h) - 0.5, 0.0,
                               static_cast<double>(img.height() - 1));
  const auto x0 = static_cast<std::int64_t>(sx);
  const auto y0 = static_cast<std::int64_t>(sy);
  const std::int64_t x1 = std::min(x0 + 1, img.width() - 1);
  const std::int64_t y1 = std::min(y0 + 1, img.height() - 1);
  const double fx = sx - x0, fy = sy - y0;
  return img.sample(x0, y0, channel) * (1 - fx) * (1 - fy) + img.sample(x1, y0, channel) * fx * (1 - fy) +
         img.sample(x0, y1, channel) * (1 - fx) * fy + img.sample(x1, y1, channel) * fx * fy;
}

// Random non-negative weights with a mix of exact zeros and heavy cells.
inline std::vector<double> random_weights(std::mt19937_64 &rng, std::size_t n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> w(n);
  for (auto &v : w) {
    const double r = u(rng);
    v = r < 0.15 ? 0.0 : (r > 0.95 ? 10.0 * u(rng) : u(rng));
  }
  if (std::all_of(w.begin(), w.end(), [](double v) { return v == 0.0; })) {
    w[0] = 1.0;
  }
  return w;
}

} // namespace vfunnel::oracle
