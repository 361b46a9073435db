#include <gtest/gtest.h>

#include <random>

#include "support/oracles.hpp"
#include "vfunnel/portfolio.hpp"

using namespace vfunnel;

namespace {

AttentionGrid one_hot(std::size_t rows, std::size_t cols, std::size_t i, std::size_t j) {
  std::vector<double> w(rows * cols, 0.0);
  w[i * cols + j] = 1.0;
  return normalize(AttentionGrid(rows, cols, w));
}

AttentionGrid uniform(std::size_t rows, std::size_t cols) {
  return normalize(AttentionGrid(rows, cols, std::vector<double>(rows * cols, 1.0)));
}

} // namespace

TEST(ExpansionFactor, DefaultBounds) {
  const auto cfg = ScaleConfig::defaults();
  EXPECT_DOUBLE_EQ(expansion_factor(1, 0.0, cfg), 1.2);
  EXPECT_DOUBLE_EQ(expansion_factor(2, 0.0, cfg), 1.6);
  EXPECT_DOUBLE_EQ(expansion_factor(1, 1.0, cfg), 1.8);
  EXPECT_DOUBLE_EQ(expansion_factor(2, 1.0, cfg), 2.8);
  EXPECT_DOUBLE_EQ(expansion_factor(1, 0.5, cfg), 1.5);
  EXPECT_DOUBLE_EQ(expansion_factor(2, 0.5, cfg), 2.2);
}

TEST(ExpansionFactor, Errors) {
  const auto cfg = ScaleConfig::defaults();
  EXPECT_THROW(expansion_factor(0, 0.5, cfg), InvalidInput);
  EXPECT_THROW(expansion_factor(3, 0.5, cfg), InvalidInput);
  EXPECT_THROW(expansion_factor(1, 1.5, cfg), InvalidInput);
  EXPECT_THROW(expansion_factor(1, -0.1, cfg), InvalidInput);
}

TEST(ExpansionFactor, DefaultMonotonicity) {
  const auto cfg = ScaleConfig::defaults(4);
  for (int s = 0; s <= 100; ++s) {
    const double h = s / 100.0;
    EXPECT_GT(expansion_factor(1, h, cfg), 1.0);
    EXPECT_GT(expansion_factor(2, h, cfg), expansion_factor(1, h, cfg));
    EXPECT_GT(expansion_factor(3, h, cfg), expansion_factor(2, h, cfg));
  }
}

TEST(ScaleConfig, DefaultsAndValidation) {
  const auto k4 = ScaleConfig::defaults(4);
  ASSERT_EQ(k4.params.size(), 3u);
  EXPECT_TRUE(k4.params[2].extrapolated);
  EXPECT_FALSE(k4.params[0].extrapolated);
  EXPECT_TRUE(ScaleConfig::defaults(0).params.empty());
  EXPECT_THROW(ScaleConfig::defaults(5), InvalidInput);
  ScaleConfig bad = ScaleConfig::defaults();
  bad.params[0].beta = 0.9;
  EXPECT_THROW(bad.validate(), InvalidInput);
  bad = ScaleConfig::defaults();
  bad.params[1].gamma = -0.1;
  EXPECT_THROW(bad.validate(), InvalidInput);
  bad = ScaleConfig::defaults();
  bad.input_resolution = 0;
  EXPECT_THROW(bad.validate(), InvalidInput);
  bad = ScaleConfig::defaults();
  bad.levels = 4;
  EXPECT_THROW(bad.validate(), InvalidInput);
}

TEST(ScaledSide, RoundsHalfUp) {
  EXPECT_EQ(scaled_side(1.2, 336), 403);
  EXPECT_EQ(scaled_side(1.6, 336), 538);
  EXPECT_EQ(scaled_side(1.5, 3), 5); // 4.5
  EXPECT_EQ(scaled_side(1.0, 336), 336);
}

TEST(RefineCenter, Examples) {
  const GridGeometry g(400, 400, 4, 4);
  const auto full = CropRect::full_image(g);
  EXPECT_EQ(refine_center(uniform(4, 4), full, g).point, (Point{200, 200}));
  EXPECT_EQ(refine_center(one_hot(4, 4, 0, 0), full, g).point, (Point{50, 50}));
}

TEST(RefineCenter, ZeroMassRegionFallsBackToGeometricCenter) {
  const GridGeometry g(400, 400, 4, 4);
  const auto region = clamp_square({350, 350}, 100, g);
  const RefinedCenter c = refine_center(one_hot(4, 4, 0, 0), region, g);
  EXPECT_TRUE(c.degenerate);
  EXPECT_EQ(c.point, (Point{350, 350}));
}

TEST(RefineCenter, NearestBlockProjectedIntoRegion) {
  const GridGeometry g(2000, 2000, 2, 2); // centers at 500 and 1500
  const auto region = clamp_square({1000, 1000}, 336, g);
  const RefinedCenter c = refine_center(uniform(2, 2), region, g);
  EXPECT_TRUE(c.nearest_fallback);
  EXPECT_FALSE(c.degenerate);
  EXPECT_EQ(c.point, (Point{832, 832}));
}

TEST(RefineCenter, RequiresNormalizedMatchingGrid) {
  const GridGeometry g(400, 400, 4, 4);
  EXPECT_THROW(refine_center(AttentionGrid(4, 4, std::vector<double>(16, 1.0)),
                             CropRect::full_image(g), g),
               InvalidInput);
  EXPECT_THROW(refine_center(uniform(3, 4), CropRect::full_image(g), g), InvalidInput);
}

TEST(RefineCenter, MatchesWeightedMeanOracle) {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const GridGeometry g(600, 480, 6, 6);
  int checked = 0;
  for (int rep = 0; rep < 500; ++rep) {
    const auto w = oracle::random_weights(rng, 36);
    const auto grid = normalize(AttentionGrid(6, 6, w));
    const auto region = clamp_square({u(rng) * 600, u(rng) * 480}, 60 + u(rng) * 500, g);
    const auto want = oracle::weighted_mean({grid.values().begin(), grid.values().end()},
                                            oracle::to_rect(region.bounds), 600, 480, 6, 6);
    const RefinedCenter got = refine_center(grid, region, g);
    if (want.empty) {
      continue;
    }
    ++checked;
    EXPECT_NEAR(got.point.x, want.x, 1e-9);
    EXPECT_NEAR(got.point.y, want.y, 1e-9);
  }
  EXPECT_GT(checked, 400);
}

TEST(BuildPortfolio, OneHotSidesAtMinimumExpansion) {
  const GridGeometry g(2000, 2000, 24, 24);
  const Portfolio p = build_portfolio(one_hot(24, 24, 12, 12), g, ScaleConfig::defaults());
  EXPECT_EQ(p.h_norm, 0.0);
  ASSERT_EQ(p.levels.size(), 3u);
  EXPECT_EQ(p.levels[0].requested_side, 336);
  EXPECT_EQ(p.levels[1].requested_side, 403);
  EXPECT_EQ(p.levels[2].requested_side, 538);
  EXPECT_DOUBLE_EQ(p.levels[1].alpha, 1.2);
  EXPECT_DOUBLE_EQ(p.levels[2].alpha, 1.6);
}

TEST(BuildPortfolio, UniformGridSymmetricAtMaximumExpansion) {
  const GridGeometry g(2000, 2000, 24, 24);
  const Portfolio p = build_portfolio(uniform(24, 24), g, ScaleConfig::defaults());
  EXPECT_NEAR(p.h_norm, 1.0, 1e-12);
  ASSERT_EQ(p.levels.size(), 3u);
  const std::int64_t sides[] = {336, 605, 941};
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_EQ(p.levels[k].requested_side, sides[k]);
    EXPECT_EQ(p.levels[k].rect.bounds.width(), sides[k]);
    EXPECT_NEAR(p.levels[k].center.point.x, 1000.0, 1e-9);
    EXPECT_NEAR(p.levels[k].center.point.y, 1000.0, 1e-9);
  }
}

TEST(BuildPortfolio, AsymmetricMassShiftsRefinedCenter) {
  const GridGeometry g(2000, 2000, 24, 24);
  std::vector<double> w(576, 0.0);
  w[12 * 24 + 11] = 1.0;  // x = 958.3
  w[12 * 24 + 13] = 1.0;  // x = 1125, near the right edge of the focal crop
  w[12 * 24 + 0] = 0.2;   // x = 41.7, outside the focal crop
  const auto grid = normalize(AttentionGrid(24, 24, w));
  const Portfolio p = build_portfolio(grid, g, ScaleConfig::defaults());
  const auto vals = std::vector<double>(grid.values().begin(), grid.values().end());
  const auto mu0 = oracle::weighted_mean(vals, {0, 0, 2000, 2000}, 2000, 2000, 24, 24);
  const auto mu1 = oracle::weighted_mean(vals, oracle::to_rect(p.levels[0].rect.bounds), 2000,
                                         2000, 24, 24);
  EXPECT_NEAR(p.levels[0].center.point.x, mu0.x, 1e-9);
  EXPECT_NEAR(p.levels[1].center.point.x, mu1.x, 1e-9);
  EXPECT_GT(mu1.x, mu0.x);
  EXPECT_GT(p.levels[1].center.point.x, p.levels[0].center.point.x);
}

TEST(BuildPortfolio, HierarchyChainAndContainment) {
  std::mt19937_64 rng(43);
  const GridGeometry g(1024, 768, 24, 32);
  for (int rep = 0; rep < 50; ++rep) {
    const auto grid = normalize(AttentionGrid(24, 32, oracle::random_weights(rng, 768)));
    const Portfolio p = build_portfolio(grid, g, ScaleConfig::defaults(4));
    ASSERT_EQ(p.levels.size(), 4u);
    EXPECT_EQ(p.levels[0].parent.bounds, g.image_bounds());
    for (std::size_t k = 1; k < p.levels.size(); ++k) {
      EXPECT_EQ(p.levels[k].parent, p.levels[k - 1].rect);
      const auto &r = p.levels[k].parent.bounds;
      const Point c = p.levels[k].center.point;
      EXPECT_GE(c.x, r.left);
      EXPECT_LE(c.x, r.right);
      EXPECT_GE(c.y, r.top);
      EXPECT_LE(c.y, r.bottom);
      EXPECT_GE(p.levels[k].rect.bounds.width(), p.levels[k - 1].rect.bounds.width());
    }
  }
}

TEST(BuildPortfolio, PortfolioSizes) {
  const GridGeometry g(800, 600, 4, 4);
  for (std::size_t k = 0; k <= 4; ++k) {
    EXPECT_EQ(build_portfolio(uniform(4, 4), g, ScaleConfig::defaults(k)).crop_count(), k);
  }
}

TEST(BuildPortfolio, FocalSideLimitedByImage) {
  const GridGeometry g(300, 200, 4, 4);
  const Portfolio p = build_portfolio(uniform(4, 4), g, ScaleConfig::defaults());
  EXPECT_EQ(p.levels[0].rect.bounds.width(), 200);
  EXPECT_EQ(p.levels[2].rect.bounds, (PixelBounds{50, 0, 250, 200}));
}

TEST(BuildPortfolio, StaticConfigIgnoresEntropy) {
  ScaleConfig cfg = ScaleConfig::defaults();
  for (auto &lp : cfg.params) lp.gamma = 0.0;
  const GridGeometry g(2000, 2000, 24, 24);
  const Portfolio low = build_portfolio(one_hot(24, 24, 12, 12), g, cfg);
  const Portfolio high = build_portfolio(uniform(24, 24), g, cfg);
  ASSERT_NE(low.h_norm, high.h_norm);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_EQ(low.levels[k].requested_side, high.levels[k].requested_side);
    EXPECT_EQ(low.levels[k].rect.bounds.width(), high.levels[k].rect.bounds.width());
  }
}

TEST(BuildPortfolio, DegenerateGridPropagates) {
  const GridGeometry g(640, 480, 3, 4);
  const auto grid = normalize(AttentionGrid(3, 4, std::vector<double>(12, 0.0)));
  const Portfolio p = build_portfolio(grid, g, ScaleConfig::defaults());
  EXPECT_TRUE(p.grid_degenerate);
  EXPECT_NEAR(p.h_norm, 1.0, 1e-12);
}

TEST(TopK, OneHotPicksHotWindow) {
  const GridGeometry g(400, 400, 4, 4);
  const auto picks = top_k_crops(one_hot(4, 4, 2, 1), g, 1, 200);
  ASSERT_EQ(picks.size(), 1u);
  EXPECT_TRUE(picks[0].rect.bounds.contains(block_center(g, 2, 1)));
  // a 200 px window centered on a block center covers 4 blocks here
  EXPECT_EQ(blocks_in_rect(picks[0].rect, g).size(), 4u);
  EXPECT_DOUBLE_EQ(picks[0].score, 0.25);
}

TEST(TopK, UniformTieBreakOrder) {
  const GridGeometry g(400, 400, 4, 4);
  const auto picks = top_k_crops(uniform(4, 4), g, 3, 100);
  ASSERT_EQ(picks.size(), 3u);
  EXPECT_EQ(picks[0].anchor, (BlockIndex{0, 0}));
  EXPECT_EQ(picks[1].anchor, (BlockIndex{0, 1}));
  EXPECT_EQ(picks[2].anchor, (BlockIndex{0, 2}));
}

TEST(TopK, ReturnsFewerWhenSpaceRunsOut) {
  const GridGeometry g(400, 400, 4, 4);
  EXPECT_EQ(top_k_crops(uniform(4, 4), g, 3, 400).size(), 1u);
  EXPECT_THROW(top_k_crops(uniform(4, 4), g, 0, 100), InvalidInput);
}

TEST(TopK, MatchesGreedyOracle) {
  std::mt19937_64 rng(47);
  std::uniform_int_distribution<std::size_t> dim(1, 6);
  std::uniform_int_distribution<std::int64_t> px(50, 700);
  std::uniform_int_distribution<std::size_t> kk(1, 3);
  std::uniform_real_distribution<double> side(0.1, 0.7);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t r = dim(rng), c = dim(rng);
    const std::int64_t w = px(rng), h = px(rng);
    const GridGeometry g(w, h, r, c);
    const auto grid = normalize(AttentionGrid(r, c, oracle::random_weights(rng, r * c)));
    const std::size_t k = kk(rng);
    const double s = side(rng) * static_cast<double>(std::min(w, h));
    const auto got = top_k_crops(grid, g, k, s);
    const auto want = oracle::greedy_topk({grid.values().begin(), grid.values().end()}, w, h, r,
                                          c, k, s);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t n = 0; n < got.size(); ++n) {
      EXPECT_EQ(got[n].anchor.row, want[n].row);
      EXPECT_EQ(got[n].anchor.col, want[n].col);
      EXPECT_EQ(oracle::to_rect(got[n].rect.bounds), want[n].rect);
      EXPECT_EQ(got[n].score, want[n].score);
    }
  }
}

TEST(TopK, RelaxedOverlapThreshold) {
  const GridGeometry g(400, 400, 4, 4);
  const auto strict = top_k_crops(uniform(4, 4), g, 3, 200);
  const auto loose = top_k_crops(uniform(4, 4), g, 3, 200, 0.5);
  ASSERT_EQ(loose.size(), 3u);
  EXPECT_LE(strict.size(), loose.size());
  for (std::size_t a = 0; a < loose.size(); ++a) {
    for (std::size_t b = a + 1; b < loose.size(); ++b) {
      EXPECT_LE(intersection_over_union(loose[a].rect.bounds, loose[b].rect.bounds), 0.5);
    }
  }
  EXPECT_THROW(top_k_crops(uniform(4, 4), g, 3, 200, 1.0), InvalidInput);
}

TEST(SnapDecimal, NearestDecimalDouble) {
  EXPECT_EQ(snap_decimal(1.2 + 0.6, 12), 1.8);
  EXPECT_EQ(snap_decimal(1.6 + 1.2, 12), 2.8);
  EXPECT_EQ(snap_decimal(770.49999999999989, 9), 770.5);
  EXPECT_EQ(snap_decimal(-0.25, 9), -0.25);
  EXPECT_EQ(snap_decimal(1e300, 9), 1e300);
}

TEST(ExpansionFactor, EndpointsAreExact) {
  const auto cfg = ScaleConfig::defaults();
  EXPECT_EQ(expansion_factor(1, 0.0, cfg), 1.2);
  EXPECT_EQ(expansion_factor(1, 1.0, cfg), 1.8);
  EXPECT_EQ(expansion_factor(2, 0.0, cfg), 1.6);
  EXPECT_EQ(expansion_factor(2, 1.0, cfg), 2.8);
}

TEST(BuildPortfolio, RescaledAttentionKeepsPixelGeometry) {
  std::mt19937_64 rng(314);
  for (int rep = 0; rep < 300; ++rep) {
    const std::size_t rows = 1 + rng() % 12, cols = 2 + rng() % 12;
    const GridGeometry geom(100 + static_cast<std::int64_t>(rng() % 900),
                            100 + static_cast<std::int64_t>(rng() % 900), rows, cols);
    const auto a = oracle::random_weights(rng, rows * cols);
    const double c = std::uniform_real_distribution<double>(1e-3, 1e3)(rng);
    std::vector<double> ca(a);
    for (auto &v : ca) v *= c;
    const auto p = build_portfolio(normalize(AttentionGrid(rows, cols, a)), geom, ScaleConfig::defaults());
    const auto q = build_portfolio(normalize(AttentionGrid(rows, cols, ca)), geom, ScaleConfig::defaults());
    ASSERT_EQ(p.levels.size(), q.levels.size());
    for (std::size_t k = 0; k < p.levels.size(); ++k) {
      ASSERT_EQ(p.levels[k].rect.bounds, q.levels[k].rect.bounds) << rep;
      ASSERT_EQ(p.levels[k].requested_side, q.levels[k].requested_side) << rep;
    }
  }
}
