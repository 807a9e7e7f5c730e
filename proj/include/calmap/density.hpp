#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "calmap/errors.hpp"
#include "calmap/types.hpp"

namespace calmap {

/// Project-wide rounding rule: half away from zero.
inline double round_half_away(double v) { return std::round(v); }

/// Spreads an item's calories uniformly over its mask foreground: each foreground
/// cell gets kcal / foreground_count, background stays zero. Summing the result
/// recovers the item's calories up to float32 cell rounding.
inline DensityMap generate_item_density(const FoodItemAnnotation& item) {
  const int fg = item.mask.foreground_count();
  if (fg == 0) {
    throw ZeroAreaMask("generate_item_density: mask for item '" + item.label +
                       "' has no foreground pixels");
  }
  if (!(item.kcal > 0.0) || !std::isfinite(item.kcal)) {
    throw ValidationError("generate_item_density: item '" + item.label +
                          "' needs a positive finite kcal value");
  }
  const float per_pixel = static_cast<float>(item.kcal / static_cast<double>(fg));
  Grid<float> cells(item.mask.height(), item.mask.width(), 0.0f);
  for (int r = 0; r < cells.height(); ++r) {
    for (int c = 0; c < cells.width(); ++c) {
      if (item.mask.foreground(r, c)) cells.at(r, c) = per_pixel;
    }
  }
  return DensityMap::from_grid(std::move(cells));
}

/// Elementwise sum of per-item maps with pairwise disjoint supports. The declared
/// shape makes the empty list well defined (an all-zero map).
inline DensityMap combine_item_densities(const std::vector<DensityMap>& maps, int height,
                                         int width) {
  Grid<float> sum(height, width, 0.0f);
  Grid<std::uint8_t> support(height, width, std::uint8_t{0});
  for (std::size_t i = 0; i < maps.size(); ++i) {
    const DensityMap& m = maps[i];
    if (m.height() != height || m.width() != width) {
      throw ShapeMismatch("combine_item_densities: map " + std::to_string(i) + " is " +
                          std::to_string(m.height()) + "x" + std::to_string(m.width()) +
                          ", expected " + std::to_string(height) + "x" + std::to_string(width));
    }
    for (int r = 0; r < height; ++r) {
      for (int c = 0; c < width; ++c) {
        const float v = m.at(r, c);
        if (v == 0.0f) continue;
        if (support.at(r, c) != 0) {
          throw OverlappingSupport("combine_item_densities: maps overlap at (" +
                                   std::to_string(r) + "," + std::to_string(c) + ")");
        }
        support.at(r, c) = 1;
        sum.at(r, c) = v;
      }
    }
  }
  return DensityMap::from_grid(std::move(sum));
}

/// Total calories of a map: the sum of all cells, accumulated in double.
inline double summation_decode(const DensityMap& map) {
  double total = 0.0;
  for (float v : map.cells()) total += static_cast<double>(v);
  return total;
}

/// Quantizes a density map to 8-bit levels: clamp(round(value / scale), 0, 255).
inline GrayscaleMap encode_grayscale(const DensityMap& map, double scale) {
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw NonPositiveScale("encode_grayscale: scale must be a positive finite kCal-per-level");
  }
  Grid<std::uint8_t> levels(map.height(), map.width(), std::uint8_t{0});
  for (int r = 0; r < map.height(); ++r) {
    for (int c = 0; c < map.width(); ++c) {
      const double level = round_half_away(static_cast<double>(map.at(r, c)) / scale);
      levels.at(r, c) = static_cast<std::uint8_t>(std::clamp(level, 0.0, 255.0));
    }
  }
  return GrayscaleMap(std::move(levels), scale);
}

/// Calories recovered from a quantized map: scale * sum of levels.
inline double decode_grayscale(const GrayscaleMap& gmap) {
  std::int64_t levels = 0;
  for (std::uint8_t v : gmap.levels().cells()) levels += v;
  return gmap.scale() * static_cast<double>(levels);
}

/// Renders a map for viewing: cells linearly rescaled to [0, 255] by the map's
/// own maximum. An all-zero map renders all black.
inline Grid<std::uint8_t> render_visualization(const DensityMap& map) {
  Grid<std::uint8_t> img(map.height(), map.width(), std::uint8_t{0});
  float max_value = 0.0f;
  for (float v : map.cells()) max_value = std::max(max_value, v);
  if (max_value <= 0.0f) return img;
  for (int r = 0; r < map.height(); ++r) {
    for (int c = 0; c < map.width(); ++c) {
      const double rel = static_cast<double>(map.at(r, c)) / static_cast<double>(max_value);
      img.at(r, c) = static_cast<std::uint8_t>(std::clamp(round_half_away(255.0 * rel), 0.0, 255.0));
    }
  }
  return img;
}

}  // namespace calmap
