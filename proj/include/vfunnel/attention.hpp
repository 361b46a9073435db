#pragma once

// Attention-grid math: head averaging, connector composition,
// normalization to a spatial distribution, and normalized entropy.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vfunnel/error.hpp"
#include "vfunnel/numeric.hpp"

namespace vfunnel {

namespace detail {

inline void require_nonneg_finite(std::span<const double> values, const char *what) {
  for (std::size_t k = 0; k < values.size(); ++k) {
    const double v = values[k];
    if (!std::isfinite(v) || v < 0.0) {
      throw InvalidInput(std::string(what) + ": entry " + std::to_string(k) +
                         " is negative or non-finite");
    }
  }
}

} // namespace detail

/// First-response-token attention to T image tokens, one row per head.
struct RawHeadAttention {
  std::vector<std::vector<double>> heads;

  std::size_t head_count() const { return heads.size(); }
  std::size_t token_count() const { return heads.empty() ? 0 : heads.front().size(); }

  void validate() const {
    if (heads.empty()) {
      throw InvalidInput("raw attention: no heads");
    }
    const std::size_t tokens = heads.front().size();
    if (tokens == 0) {
      throw InvalidInput("raw attention: zero image tokens");
    }
    for (const auto &row : heads) {
      if (row.size() != tokens) {
        throw InvalidInput("raw attention: ragged head rows");
      }
      detail::require_nonneg_finite(row, "raw attention");
    }
  }
};

/// Head-averaged attention over T image tokens.
struct TokenAttention {
  std::vector<double> weights;

  std::size_t size() const { return weights.size(); }
};

/// Dense row-major B_h x B_w grid of non-negative weights.
///
/// A grid is either raw (straight from the model) or normalized, in which
/// case its entries form a probability distribution over spatial blocks.
/// `degenerate()` is set when normalization had to fall back to a uniform
/// grid because the input carried no mass.
class AttentionGrid {
public:
  AttentionGrid(std::size_t rows, std::size_t cols, std::vector<double> weights)
      : rows_(rows), cols_(cols), weights_(std::move(weights)) {
    if (rows_ == 0 || cols_ == 0) {
      throw InvalidInput("attention grid: dimensions must be at least 1x1");
    }
    if (weights_.size() != rows_ * cols_) {
      throw InvalidInput("attention grid: expected " + std::to_string(rows_ * cols_) +
                         " weights, got " + std::to_string(weights_.size()));
    }
    detail::require_nonneg_finite(weights_, "attention grid");
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return weights_.size(); }
  bool normalized() const { return normalized_; }
  bool degenerate() const { return degenerate_; }

  double at(std::size_t i, std::size_t j) const { return weights_[i * cols_ + j]; }
  std::span<const double> values() const { return weights_; }

  friend bool operator==(const AttentionGrid &, const AttentionGrid &) = default;

private:
  friend AttentionGrid normalize(const AttentionGrid &grid);

  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> weights_;
  bool normalized_ = false;
  bool degenerate_ = false;
};

/// Token-to-patch cross-attention of a query-transformer style connector.
/// Row t holds the attention of LLM image token t over all P = B_h*B_w patches.
class ConnectorMatrix {
public:
  ConnectorMatrix(std::size_t tokens, std::size_t grid_rows, std::size_t grid_cols,
                  std::vector<double> token_to_patch)
      : tokens_(tokens), grid_rows_(grid_rows), grid_cols_(grid_cols),
        data_(std::move(token_to_patch)) {
    if (tokens_ == 0 || grid_rows_ == 0 || grid_cols_ == 0) {
      throw InvalidInput("connector: empty dimension");
    }
    if (data_.size() != tokens_ * patches()) {
      throw InvalidInput("connector: expected " + std::to_string(tokens_ * patches()) +
                         " entries, got " + std::to_string(data_.size()));
    }
    detail::require_nonneg_finite(data_, "connector");
  }

  std::size_t tokens() const { return tokens_; }
  std::size_t patches() const { return grid_rows_ * grid_cols_; }
  std::size_t grid_rows() const { return grid_rows_; }
  std::size_t grid_cols() const { return grid_cols_; }
  double at(std::size_t token, std::size_t patch) const { return data_[token * patches() + patch]; }
  std::span<const double> values() const { return data_; }

  friend bool operator==(const ConnectorMatrix &, const ConnectorMatrix &) = default;

private:
  std::size_t tokens_;
  std::size_t grid_rows_;
  std::size_t grid_cols_;
  std::vector<double> data_;
};

inline TokenAttention average_heads(const RawHeadAttention &raw) {
  raw.validate();
  const std::size_t tokens = raw.token_count();
  const double inv = 1.0 / static_cast<double>(raw.head_count());
  TokenAttention out{std::vector<double>(tokens, 0.0)};
  for (const auto &row : raw.heads) {
    for (std::size_t t = 0; t < tokens; ++t) {
      out.weights[t] += row[t];
    }
  }
  for (double &w : out.weights) {
    w *= inv;
  }
  return out;
}

/// Projects token attention through the connector onto the patch grid.
inline AttentionGrid compose_connector(const TokenAttention &tok, const ConnectorMatrix &conn) {
  if (tok.size() != conn.tokens()) {
    throw InvalidInput("compose_connector: token attention has " + std::to_string(tok.size()) +
                       " entries but connector has " + std::to_string(conn.tokens()) + " rows");
  }
  detail::require_nonneg_finite(tok.weights, "token attention");
  std::vector<double> grid(conn.patches(), 0.0);
  for (std::size_t t = 0; t < conn.tokens(); ++t) {
    const double w = tok.weights[t];
    if (w == 0.0) {
      continue;
    }
    for (std::size_t p = 0; p < conn.patches(); ++p) {
      grid[p] += w * conn.at(t, p);
    }
  }
  return AttentionGrid(conn.grid_rows(), conn.grid_cols(), std::move(grid));
}

/// Direct-projection models: image token t is patch t in row-major order.
inline AttentionGrid reshape_direct(const TokenAttention &tok, std::size_t rows, std::size_t cols) {
  if (rows * cols != tok.size()) {
    throw InvalidInput("reshape_direct: " + std::to_string(tok.size()) +
                       " tokens cannot form a " + std::to_string(rows) + "x" +
                       std::to_string(cols) + " grid");
  }
  return AttentionGrid(rows, cols, tok.weights);
}

/// Divides every entry by the grid total. A grid with zero total mass
/// becomes uniform and is marked degenerate.
inline AttentionGrid normalize(const AttentionGrid &grid) {
  AttentionGrid out = grid;
  double total = 0.0;
  for (double v : grid.weights_) {
    total += v;
  }
  if (total > 0.0 && std::isfinite(total)) {
    for (double &v : out.weights_) {
      v /= total;
    }
  } else if (total == 0.0) {
    std::fill(out.weights_.begin(), out.weights_.end(), 1.0 / static_cast<double>(grid.size()));
    out.degenerate_ = true;
  } else {
    throw InvalidInput("normalize: grid total overflows");
  }
  out.normalized_ = true;
  return out;
}

/// Decimal resolution of normalized entropy values.
inline constexpr int kEntropyDigits = 12;

/// Shannon entropy of a normalized grid divided by log(B_h*B_w), in [0, 1].
inline double entropy_norm(const AttentionGrid &grid) {
  if (!grid.normalized()) {
    throw InvalidInput("entropy_norm: grid is not normalized");
  }
  if (grid.size() < 2) {
    throw InvalidInput("entropy_norm: a 1x1 grid has no entropy scale");
  }
  double acc = 0.0;
  for (double p : grid.values()) {
    if (p > 0.0) {
      acc -= p * std::log(p);
    }
  }
  const double h = acc / std::log(static_cast<double>(grid.size()));
  return std::clamp(snap_decimal(h, kEntropyDigits), 0.0, 1.0);
}

} // namespace vfunnel
