#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include <opencv2/core.hpp>

#include "calmap/errors.hpp"
#include "calmap/occasion.hpp"
#include "calmap/seeds.hpp"

namespace calmap {

/// One food class of the synthetic benchmark: a flat color and a per-pixel energy
/// density. An item's calories are density * foreground area, so total energy is
/// readable from the pixels alone.
struct ShapeClass {
  std::string label;
  std::array<std::uint8_t, 3> color;  // RGB
  double density_kcal_per_px = 1.0;
};

/// Dyadic densities: ground-truth map cells are exact in float32, so decoding a
/// ground-truth map reproduces the item calories bit-for-bit.
inline std::vector<ShapeClass> default_palette() {
  return {
      ShapeClass{"tomato", {204, 48, 48}, 0.5},
      ShapeClass{"lettuce", {64, 168, 64}, 0.75},
      ShapeClass{"blueberry", {56, 64, 200}, 1.25},
      ShapeClass{"cheese", {236, 200, 64}, 1.75},
  };
}

struct SyntheticSceneConfig {
  int scene_count = 200;
  int image_size = 64;
  int min_items = 1;
  int max_items = 4;
  std::vector<ShapeClass> palette = default_palette();
  std::uint64_t seed = 0;
  int max_placement_attempts = 200;

  void validate() const {
    if (scene_count < 1) throw std::invalid_argument("synth: scene_count must be >= 1");
    if (image_size < 16) throw std::invalid_argument("synth: image_size must be >= 16");
    if (min_items < 1 || max_items < min_items) {
      throw std::invalid_argument("synth: need 1 <= min_items <= max_items");
    }
    if (palette.empty()) throw std::invalid_argument("synth: palette must not be empty");
    for (const ShapeClass& sc : palette) {
      if (!(sc.density_kcal_per_px > 0.0)) {
        throw std::invalid_argument("synth: class '" + sc.label + "' needs a positive density");
      }
    }
    if (max_placement_attempts < 1) {
      throw std::invalid_argument("synth: max_placement_attempts must be >= 1");
    }
  }
};

namespace detail {

enum class ShapeKind { kEllipse, kRectangle, kTriangle };

struct ShapeDraw {
  ShapeKind kind;
  double cx, cy;  // center, pixels
  double a, b;    // half extents, pixels
};

inline bool shape_covers(const ShapeDraw& s, int row, int col) {
  const double x = static_cast<double>(col) - s.cx;
  const double y = static_cast<double>(row) - s.cy;
  switch (s.kind) {
    case ShapeKind::kEllipse:
      return (x * x) / (s.a * s.a) + (y * y) / (s.b * s.b) <= 1.0;
    case ShapeKind::kRectangle:
      return std::abs(x) <= s.a && std::abs(y) <= s.b;
    case ShapeKind::kTriangle: {
      // isoceles triangle: apex up, base at cy + b
      if (y < -s.b || y > s.b) return false;
      const double half_width = s.a * (y + s.b) / (2.0 * s.b);
      return std::abs(x) <= half_width;
    }
  }
  return false;
}

inline SegmentationMask rasterize(const ShapeDraw& s, int size) {
  SegmentationMask mask(size, size);
  const int r0 = std::max(0, static_cast<int>(std::floor(s.cy - s.b)) - 1);
  const int r1 = std::min(size - 1, static_cast<int>(std::ceil(s.cy + s.b)) + 1);
  const int c0 = std::max(0, static_cast<int>(std::floor(s.cx - s.a)) - 1);
  const int c1 = std::min(size - 1, static_cast<int>(std::ceil(s.cx + s.a)) + 1);
  for (int r = r0; r <= r1; ++r) {
    for (int c = c0; c <= c1; ++c) {
      if (shape_covers(s, r, c)) mask.set_foreground(r, c, true);
    }
  }
  return mask;
}

}  // namespace detail

/// Renders deterministic eating scenes: a plate on a table, one to a few flat
/// colored shapes on it, masks that exactly match the rendered pixels, and item
/// calories equal to density * area. Same config, same bytes.
inline std::vector<EatingOccasion> generate_synthetic(const SyntheticSceneConfig& cfg) {
  cfg.validate();
  const int size = cfg.image_size;
  const std::array<std::uint8_t, 3> table_color = {82, 54, 38};
  const std::array<std::uint8_t, 3> plate_color = {236, 233, 224};

  std::vector<EatingOccasion> scenes;
  scenes.reserve(cfg.scene_count);
  for (int scene_index = 0; scene_index < cfg.scene_count; ++scene_index) {
    std::mt19937_64 rng(derive_seed(cfg.seed, "synth-scene", static_cast<std::uint64_t>(scene_index)));

    char id_buf[32];
    std::snprintf(id_buf, sizeof(id_buf), "scene_%04d", scene_index);

    EatingOccasion occ;
    occ.id = id_buf;
    occ.image = cv::Mat(size, size, CV_8UC3, cv::Scalar(table_color[0], table_color[1], table_color[2]));

    // plate disc, part of the background
    const double plate_r = 0.46 * size;
    const double plate_cx = 0.5 * size + uniform_real(rng, -0.02 * size, 0.02 * size);
    const double plate_cy = 0.5 * size + uniform_real(rng, -0.02 * size, 0.02 * size);
    for (int r = 0; r < size; ++r) {
      for (int c = 0; c < size; ++c) {
        const double dx = c - plate_cx, dy = r - plate_cy;
        if (dx * dx + dy * dy <= plate_r * plate_r) {
          occ.image.at<cv::Vec3b>(r, c) = cv::Vec3b(plate_color[0], plate_color[1], plate_color[2]);
        }
      }
    }

    const int n_items =
        cfg.min_items + static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(
                                                                cfg.max_items - cfg.min_items + 1)));
    SegmentationMask occupied(size, size);
    for (int item_index = 0; item_index < n_items; ++item_index) {
      bool placed = false;
      for (int attempt = 0; attempt < cfg.max_placement_attempts && !placed; ++attempt) {
        const ShapeClass& cls = cfg.palette[uniform_below(rng, cfg.palette.size())];
        detail::ShapeDraw draw;
        draw.kind = static_cast<detail::ShapeKind>(uniform_below(rng, 3));
        draw.a = uniform_real(rng, 0.08 * size, 0.20 * size);
        draw.b = uniform_real(rng, 0.08 * size, 0.20 * size);
        draw.cx = uniform_real(rng, draw.a + 1.0, size - draw.a - 2.0);
        draw.cy = uniform_real(rng, draw.b + 1.0, size - draw.b - 2.0);

        SegmentationMask mask = detail::rasterize(draw, size);
        const int fg = mask.foreground_count();
        if (fg == 0 || mask.overlaps(occupied)) continue;

        for (int r = 0; r < size; ++r) {
          for (int c = 0; c < size; ++c) {
            if (!mask.foreground(r, c)) continue;
            occupied.set_foreground(r, c, true);
            occ.image.at<cv::Vec3b>(r, c) = cv::Vec3b(cls.color[0], cls.color[1], cls.color[2]);
          }
        }
        const double kcal = cls.density_kcal_per_px * static_cast<double>(fg);
        occ.items.push_back(FoodItemAnnotation{cls.label, kcal, std::move(mask)});
        placed = true;
      }
      if (!placed) {
        throw PlacementFailure("generate_synthetic: scene '" + occ.id + "': could not place item " +
                               std::to_string(item_index) + " after " +
                               std::to_string(cfg.max_placement_attempts) + " attempts");
      }
    }
    validate_occasion(occ);
    scenes.push_back(std::move(occ));
  }
  return scenes;
}

}  // namespace calmap
