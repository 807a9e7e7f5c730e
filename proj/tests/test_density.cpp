#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <limits>
#include <random>
#include <thread>
#include <vector>

#include "calmap/density.hpp"
#include "calmap/normalize.hpp"
#include "calmap/seeds.hpp"
#include "calmap/types.hpp"

namespace {

using namespace calmap;

SegmentationMask mask_from_rows(const std::vector<std::vector<int>>& rows) {
  SegmentationMask m(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
  for (int r = 0; r < m.height(); ++r) {
    for (int c = 0; c < m.width(); ++c) m.set_foreground(r, c, rows[r][c] != 0);
  }
  return m;
}

// Random items for property checks: masks drawn cell by cell, calories drawn in
// a food-plausible range. The brute-force oracle for every decode check is the
// direct sum of the drawn kcal values.
std::vector<FoodItemAnnotation> random_disjoint_items(std::mt19937_64& rng, int height, int width,
                                                      int max_items) {
  const int n_items = 1 + static_cast<int>(uniform_below(rng, max_items));
  std::vector<FoodItemAnnotation> items;
  Grid<std::uint8_t> taken(height, width, std::uint8_t{0});
  for (int i = 0; i < n_items; ++i) {
    SegmentationMask mask(height, width);
    int fg = 0;
    for (int r = 0; r < height; ++r) {
      for (int c = 0; c < width; ++c) {
        if (taken.at(r, c) == 0 && uniform_below(rng, 4) == 0) {
          taken.at(r, c) = 1;
          mask.set_foreground(r, c, true);
          ++fg;
        }
      }
    }
    if (fg == 0) {
      // claim one free cell so the item stays valid
      for (int r = 0; r < height && fg == 0; ++r) {
        for (int c = 0; c < width && fg == 0; ++c) {
          if (taken.at(r, c) == 0) {
            taken.at(r, c) = 1;
            mask.set_foreground(r, c, true);
            fg = 1;
          }
        }
      }
      if (fg == 0) break;
    }
    items.push_back(FoodItemAnnotation{"item" + std::to_string(i),
                                       uniform_real(rng, 10.0, 900.0), mask});
  }
  return items;
}

TEST(GenerateItemDensity, SpreadsCaloriesUniformly) {
  auto mask = mask_from_rows({{1, 1, 0, 0}, {1, 1, 0, 0}, {0, 0, 0, 0}, {0, 0, 0, 0}});
  DensityMap map = generate_item_density({"rice", 100.0, mask});
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      EXPECT_FLOAT_EQ(map.at(r, c), mask.foreground(r, c) ? 25.0f : 0.0f);
    }
  }
  EXPECT_DOUBLE_EQ(summation_decode(map), 100.0);
}

TEST(GenerateItemDensity, AllForegroundUnitCalorie) {
  auto mask = mask_from_rows({{1, 1}, {1, 1}});
  DensityMap map = generate_item_density({"pea", 1.0, mask});
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 2; ++c) EXPECT_FLOAT_EQ(map.at(r, c), 0.25f);
  }
}

TEST(GenerateItemDensity, NonDyadicDivisionStaysWithinRelativeTolerance) {
  auto mask = mask_from_rows({{1, 1, 1}, {0, 0, 0}, {0, 0, 0}});
  DensityMap map = generate_item_density({"bread", 100.0, mask});
  // cells hold the float32 rounding of the exact rational 100/3
  EXPECT_FLOAT_EQ(map.at(0, 0), static_cast<float>(100.0 / 3.0));
  // the 64-bit sum recovers the exact 100 = 3 * (100/3) up to cell rounding
  EXPECT_NEAR(summation_decode(map), 100.0, 1e-6 * 100.0);
}

TEST(GenerateItemDensity, ZeroAreaMaskRejected) {
  SegmentationMask empty(4, 4);
  EXPECT_THROW(generate_item_density({"ghost", 50.0, empty}), ZeroAreaMask);
}

TEST(GenerateItemDensity, NonPositiveCaloriesRejected) {
  auto mask = mask_from_rows({{1}});
  EXPECT_THROW(generate_item_density({"void", 0.0, mask}), ValidationError);
  EXPECT_THROW(generate_item_density({"void", -3.0, mask}), ValidationError);
}

TEST(GenerateItemDensity, SupportMatchesMaskExactly) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    auto items = random_disjoint_items(rng, 12, 9, 3);
    for (const auto& item : items) {
      DensityMap map = generate_item_density(item);
      for (int r = 0; r < map.height(); ++r) {
        for (int c = 0; c < map.width(); ++c) {
          EXPECT_EQ(map.at(r, c) > 0.0f, item.mask.foreground(r, c));
        }
      }
    }
  }
}

TEST(CombineItemDensities, DisjointSingletons) {
  DensityMap a(2, 2), b(2, 2);
  a.set(0, 0, 10.0f);
  b.set(1, 1, 5.0f);
  DensityMap combined = combine_item_densities({a, b}, 2, 2);
  EXPECT_FLOAT_EQ(combined.at(0, 0), 10.0f);
  EXPECT_FLOAT_EQ(combined.at(1, 1), 5.0f);
  EXPECT_DOUBLE_EQ(summation_decode(combined), 15.0);
}

TEST(CombineItemDensities, EmptyListGivesZeroMap) {
  DensityMap combined = combine_item_densities({}, 4, 4);
  EXPECT_EQ(combined.height(), 4);
  EXPECT_EQ(combined.width(), 4);
  EXPECT_DOUBLE_EQ(summation_decode(combined), 0.0);
}

TEST(CombineItemDensities, OverlapRejected) {
  DensityMap a(4, 4), b(4, 4);
  a.set(2, 3, 1.0f);
  b.set(2, 3, 2.0f);
  EXPECT_THROW(combine_item_densities({a, b}, 4, 4), OverlappingSupport);
}

TEST(CombineItemDensities, ShapeMismatchRejected) {
  DensityMap a(4, 4), b(4, 5);
  EXPECT_THROW(combine_item_densities({a, b}, 4, 4), ShapeMismatch);
}

TEST(CombineItemDensities, OrderIndependent) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    auto items = random_disjoint_items(rng, 10, 10, 4);
    std::vector<DensityMap> maps;
    for (const auto& item : items) maps.push_back(generate_item_density(item));
    DensityMap forward = combine_item_densities(maps, 10, 10);
    std::vector<DensityMap> reversed(maps.rbegin(), maps.rend());
    DensityMap backward = combine_item_densities(reversed, 10, 10);
    EXPECT_EQ(forward, backward);
  }
}

TEST(SummationDecode, TwoItemMeal) {
  // 300 kCal over 4 pixels and 150 kCal over 2 pixels: dyadic densities, so the
  // telescoped sum is exact
  SegmentationMask m1(4, 4), m2(4, 4);
  for (int c = 0; c < 4; ++c) m1.set_foreground(0, c, true);
  m2.set_foreground(2, 0, true);
  m2.set_foreground(2, 1, true);
  auto d1 = generate_item_density({"a", 300.0, m1});
  auto d2 = generate_item_density({"b", 150.0, m2});
  EXPECT_DOUBLE_EQ(summation_decode(combine_item_densities({d1, d2}, 4, 4)), 450.0);
}

TEST(SummationDecode, AllZero256) {
  EXPECT_DOUBLE_EQ(summation_decode(DensityMap(256, 256)), 0.0);
}

TEST(SummationDecode, RandomOccasionsMatchBruteForceKcal) {
  std::mt19937_64 rng(37);
  for (int trial = 0; trial < 50; ++trial) {
    auto items = random_disjoint_items(rng, 16, 16, 4);
    double truth = 0.0;
    std::vector<DensityMap> maps;
    for (const auto& item : items) {
      truth += item.kcal;
      maps.push_back(generate_item_density(item));
    }
    const double decoded = summation_decode(combine_item_densities(maps, 16, 16));
    EXPECT_NEAR(decoded, truth, 1e-6 * truth);
  }
}

TEST(Grayscale, ExactIntegerLevel) {
  DensityMap map(1, 1);
  map.set(0, 0, 25.0f);
  EXPECT_EQ(encode_grayscale(map, 1.0).at(0, 0), 25);
}

TEST(Grayscale, RoundsThirdsDown) {
  DensityMap map(1, 3);
  const float third = static_cast<float>(100.0 / 3.0);
  for (int c = 0; c < 3; ++c) map.set(0, c, third);
  GrayscaleMap g = encode_grayscale(map, 1.0);
  for (int c = 0; c < 3; ++c) EXPECT_EQ(g.at(0, c), 33);
  // 1 kCal lost across 3 pixels
  EXPECT_DOUBLE_EQ(decode_grayscale(g), 99.0);
}

TEST(Grayscale, ClampsAt255) {
  DensityMap map(1, 1);
  map.set(0, 0, 1000.0f);
  GrayscaleMap g = encode_grayscale(map, 1.0);
  EXPECT_EQ(g.at(0, 0), 255);
}

TEST(Grayscale, RoundsHalfAwayFromZero) {
  DensityMap map(1, 1);
  map.set(0, 0, 12.5f);
  EXPECT_EQ(encode_grayscale(map, 5.0).at(0, 0), 3);
}

TEST(Grayscale, NonPositiveScaleRejected) {
  DensityMap map(1, 1);
  EXPECT_THROW(encode_grayscale(map, 0.0), NonPositiveScale);
  EXPECT_THROW(encode_grayscale(map, -1.0), NonPositiveScale);
}

TEST(Grayscale, DecodeZeroAndScaled) {
  GrayscaleMap zero(Grid<std::uint8_t>(3, 3, std::uint8_t{0}), 1.0);
  EXPECT_DOUBLE_EQ(decode_grayscale(zero), 0.0);
  Grid<std::uint8_t> one(1, 1, std::uint8_t{255});
  EXPECT_DOUBLE_EQ(decode_grayscale(GrayscaleMap(std::move(one), 2.0)), 510.0);
}

TEST(Grayscale, QuantizationBoundHoldsWithoutClamping) {
  std::mt19937_64 rng(51);
  for (int trial = 0; trial < 30; ++trial) {
    const double scale = uniform_real(rng, 0.25, 4.0);
    Grid<float> cells(8, 8, 0.0f);
    int nonzero = 0;
    for (float& v : cells.cells()) {
      if (uniform_below(rng, 3) == 0) {
        // keep below 255 * scale so nothing clamps
        v = static_cast<float>(uniform_real(rng, 0.01, 254.0 * scale));
        ++nonzero;
      }
    }
    DensityMap map = DensityMap::from_grid(std::move(cells));
    const double decoded = decode_grayscale(encode_grayscale(map, scale));
    const double bound = 0.5 * scale * nonzero + 1e-9;
    EXPECT_LE(std::abs(decoded - summation_decode(map)), bound);
  }
}

TEST(Grayscale, ClampingEscapesTheQuantizationBound) {
  // 10000 kCal over 10 pixels clamps to 255 per pixel and decodes to 2550
  SegmentationMask mask(2, 5);
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 5; ++c) mask.set_foreground(r, c, true);
  }
  DensityMap map = generate_item_density({"butter", 10000.0, mask});
  GrayscaleMap g = encode_grayscale(map, 1.0);
  EXPECT_DOUBLE_EQ(decode_grayscale(g), 2550.0);
  const double no_clamp_bound = 0.5 * 1.0 * 10;
  EXPECT_GT(std::abs(decode_grayscale(g) - summation_decode(map)), no_clamp_bound);
}

TEST(Flip, HorizontalMirrorsColumns) {
  Grid<float> cells(2, 2);
  cells.at(0, 0) = 1.0f;
  cells.at(0, 1) = 2.0f;
  cells.at(1, 0) = 3.0f;
  cells.at(1, 1) = 4.0f;
  DensityMap map = DensityMap::from_grid(std::move(cells));
  DensityMap flipped = flip(map, FlipAxis::kHorizontal);
  EXPECT_FLOAT_EQ(flipped.at(0, 0), 2.0f);
  EXPECT_FLOAT_EQ(flipped.at(0, 1), 1.0f);
  EXPECT_FLOAT_EQ(flipped.at(1, 0), 4.0f);
  EXPECT_FLOAT_EQ(flipped.at(1, 1), 3.0f);
  DensityMap vertical = flip(map, FlipAxis::kVertical);
  EXPECT_FLOAT_EQ(vertical.at(0, 0), 3.0f);
  EXPECT_FLOAT_EQ(vertical.at(1, 1), 2.0f);
}

TEST(Flip, DoubleFlipIsIdentity) {
  std::mt19937_64 rng(67);
  Grid<float> cells(7, 5, 0.0f);
  for (float& v : cells.cells()) v = static_cast<float>(uniform_real(rng, 0.0, 9.0));
  DensityMap map = DensityMap::from_grid(std::move(cells));
  for (FlipAxis axis : {FlipAxis::kHorizontal, FlipAxis::kVertical}) {
    EXPECT_EQ(flip(flip(map, axis), axis), map);
  }
}

TEST(Flip, DecodedTotalInvariant) {
  std::mt19937_64 rng(71);
  for (int trial = 0; trial < 20; ++trial) {
    auto items = random_disjoint_items(rng, 9, 13, 4);
    std::vector<DensityMap> maps;
    for (const auto& item : items) maps.push_back(generate_item_density(item));
    DensityMap map = combine_item_densities(maps, 9, 13);
    for (FlipAxis axis : {FlipAxis::kHorizontal, FlipAxis::kVertical}) {
      EXPECT_EQ(summation_decode(flip(map, axis)), summation_decode(map));
    }
  }
}

TEST(RenderVisualization, LinearRescaleByOwnMax) {
  DensityMap map(1, 3);
  map.set(0, 0, 50.0f);
  map.set(0, 1, 25.0f);
  Grid<std::uint8_t> img = render_visualization(map);
  EXPECT_EQ(img.at(0, 0), 255);
  EXPECT_EQ(img.at(0, 1), 128);  // 127.5 rounds half away from zero
  EXPECT_EQ(img.at(0, 2), 0);
}

TEST(RenderVisualization, AllZeroRendersBlack) {
  Grid<std::uint8_t> img = render_visualization(DensityMap(5, 5));
  for (std::uint8_t v : img.cells()) EXPECT_EQ(v, 0);
}

TEST(RenderVisualization, ScaleInvariant) {
  // cells chosen so every scaling below is exact in float32
  Grid<float> cells(3, 3, 0.0f);
  float values[9] = {0.0f, 0.25f, 0.5f, 1.0f, 1.75f, 2.0f, 3.25f, 5.0f, 7.5f};
  for (int i = 0; i < 9; ++i) cells.cells()[i] = values[i];
  DensityMap base = DensityMap::from_grid(std::move(cells));
  for (float scale : {0.25f, 0.5f, 2.0f, 3.0f, 8.0f}) {
    Grid<float> scaled(3, 3, 0.0f);
    for (int i = 0; i < 9; ++i) scaled.cells()[i] = values[i] * scale;
    EXPECT_EQ(render_visualization(DensityMap::from_grid(std::move(scaled))),
              render_visualization(base))
        << "scale " << scale;
  }
}

TEST(Normalize, RoundTripAndClamp) {
  DensityMap map(1, 3);
  map.set(0, 0, 25.0f);
  map.set(0, 1, 0.0f);
  map.set(0, 2, 75.0f);
  Grid<float> unit = normalize_density(map, 50.0);
  EXPECT_FLOAT_EQ(unit.at(0, 0), 0.5f);
  EXPECT_FLOAT_EQ(unit.at(0, 1), 0.0f);
  EXPECT_FLOAT_EQ(unit.at(0, 2), 1.0f);  // clamped
  DensityMap back = denormalize_density(unit, 50.0);
  EXPECT_FLOAT_EQ(back.at(0, 0), 25.0f);
  EXPECT_FLOAT_EQ(back.at(0, 1), 0.0f);
}

TEST(Normalize, RoundTripWithinFloatRounding) {
  std::mt19937_64 rng(83);
  for (int trial = 0; trial < 100; ++trial) {
    const double k = uniform_real(rng, 0.5, 40.0);
    const float v = static_cast<float>(uniform_real(rng, 0.0, k));
    DensityMap map(1, 1);
    map.set(0, 0, v);
    DensityMap back = denormalize_density(normalize_density(map, k), k);
    EXPECT_NEAR(back.at(0, 0), v, 2e-6 * (std::abs(v) + 1.0));
  }
}

TEST(Normalize, RejectsNonPositiveK) {
  DensityMap map(1, 1);
  EXPECT_THROW(normalize_density(map, 0.0), NonPositiveK);
  EXPECT_THROW(denormalize_density(Grid<float>(1, 1, 0.0f), -2.0), NonPositiveK);
}

TEST(SegmentationMaskType, RejectsNonBinaryCells) {
  Grid<std::uint8_t> g(2, 2, std::uint8_t{0});
  g.at(0, 1) = 2;
  EXPECT_THROW(SegmentationMask::from_grid(std::move(g)), ValidationError);
}

TEST(CoreDensityOps, SafeToCallConcurrently) {
  std::mt19937_64 rng(97);
  auto items = random_disjoint_items(rng, 24, 24, 4);
  std::vector<DensityMap> maps;
  for (const auto& item : items) maps.push_back(generate_item_density(item));
  const DensityMap combined = combine_item_densities(maps, 24, 24);
  const double expected = summation_decode(combined);

  std::vector<std::thread> workers;
  std::atomic<int> mismatches{0};
  for (int t = 0; t < 8; ++t) {
    workers.emplace_back([&] {
      for (int i = 0; i < 200; ++i) {
        if (summation_decode(combined) != expected) mismatches.fetch_add(1);
        if (summation_decode(flip(combined, FlipAxis::kHorizontal)) != expected) {
          mismatches.fetch_add(1);
        }
        render_visualization(combined);
        decode_grayscale(encode_grayscale(combined, 1.0));
      }
    });
  }
  for (auto& w : workers) w.join();
  EXPECT_EQ(mismatches.load(), 0);
}

TEST(DensityMapType, RejectsNegativeAndNonFinite) {
  Grid<float> g(1, 2, 0.0f);
  g.at(0, 0) = -1.0f;
  EXPECT_THROW(DensityMap::from_grid(std::move(g)), ValidationError);
  Grid<float> h(1, 1, 0.0f);
  h.at(0, 0) = std::numeric_limits<float>::quiet_NaN();
  EXPECT_THROW(DensityMap::from_grid(std::move(h)), ValidationError);
  DensityMap m(1, 1);
  EXPECT_THROW(m.set(0, 0, std::numeric_limits<float>::infinity()), ValidationError);
}

}  // namespace
