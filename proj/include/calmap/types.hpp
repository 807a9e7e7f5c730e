#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>

#include "calmap/errors.hpp"
#include "calmap/grid.hpp"

namespace calmap {

/// Binary mask locating one food item. Cells are 0 (background) or 1 (foreground).
class SegmentationMask {
 public:
  SegmentationMask() = default;
  SegmentationMask(int height, int width) : grid_(height, width, std::uint8_t{0}) {}

  /// Adopts a grid after checking every cell is 0 or 1.
  static SegmentationMask from_grid(Grid<std::uint8_t> grid) {
    for (std::uint8_t v : grid.cells()) {
      if (v > 1) {
        throw ValidationError("SegmentationMask: cells must be 0 or 1, got " + std::to_string(v));
      }
    }
    SegmentationMask m;
    m.grid_ = std::move(grid);
    return m;
  }

  int height() const { return grid_.height(); }
  int width() const { return grid_.width(); }

  bool foreground(int row, int col) const { return grid_.at(row, col) != 0; }
  void set_foreground(int row, int col, bool fg) { grid_.at(row, col) = fg ? 1 : 0; }

  /// Number of foreground pixels.
  int foreground_count() const {
    int n = 0;
    for (std::uint8_t v : grid_.cells()) n += v;
    return n;
  }

  /// True when both masks mark some common pixel as foreground.
  bool overlaps(const SegmentationMask& other) const {
    if (!grid_.same_shape(other.grid_)) {
      throw ShapeMismatch("SegmentationMask::overlaps: mask shapes differ");
    }
    for (std::size_t i = 0; i < grid_.cells().size(); ++i) {
      if (grid_.cells()[i] != 0 && other.grid_.cells()[i] != 0) return true;
    }
    return false;
  }

  const Grid<std::uint8_t>& grid() const { return grid_; }

  friend bool operator==(const SegmentationMask&, const SegmentationMask&) = default;

 private:
  Grid<std::uint8_t> grid_;
};

inline SegmentationMask flip(const SegmentationMask& m, FlipAxis axis) {
  return SegmentationMask::from_grid(flip(m.grid(), axis));
}

/// Per-pixel energy density in kCal. Cells are float32, finite and non-negative;
/// sums over maps are always accumulated in double.
class DensityMap {
 public:
  DensityMap() = default;
  DensityMap(int height, int width) : grid_(height, width, 0.0f) {}

  static DensityMap from_grid(Grid<float> grid) {
    for (float v : grid.cells()) {
      if (!std::isfinite(v) || v < 0.0f) {
        throw ValidationError("DensityMap: cells must be finite and >= 0");
      }
    }
    DensityMap m;
    m.grid_ = std::move(grid);
    return m;
  }

  int height() const { return grid_.height(); }
  int width() const { return grid_.width(); }

  float at(int row, int col) const { return grid_.at(row, col); }

  void set(int row, int col, float v) {
    if (!std::isfinite(v) || v < 0.0f) {
      throw ValidationError("DensityMap::set: value must be finite and >= 0");
    }
    grid_.at(row, col) = v;
  }

  const Grid<float>& grid() const { return grid_; }
  const std::vector<float>& cells() const { return grid_.cells(); }

  bool same_shape(const DensityMap& other) const { return grid_.same_shape(other.grid_); }

  friend bool operator==(const DensityMap&, const DensityMap&) = default;

 private:
  Grid<float> grid_;
};

inline DensityMap flip(const DensityMap& m, FlipAxis axis) {
  return DensityMap::from_grid(flip(m.grid(), axis));
}

/// 8-bit quantized density with a kCal-per-level scale. The lossy baseline encoding:
/// levels are integers in [0, 255], so fine-grained densities round away.
class GrayscaleMap {
 public:
  GrayscaleMap() = default;

  GrayscaleMap(Grid<std::uint8_t> levels, double scale) : levels_(std::move(levels)), scale_(scale) {
    if (!(scale > 0.0) || !std::isfinite(scale)) {
      throw NonPositiveScale("GrayscaleMap: scale must be a positive finite kCal-per-level");
    }
  }

  int height() const { return levels_.height(); }
  int width() const { return levels_.width(); }
  double scale() const { return scale_; }

  std::uint8_t at(int row, int col) const { return levels_.at(row, col); }
  const Grid<std::uint8_t>& levels() const { return levels_; }

  friend bool operator==(const GrayscaleMap&, const GrayscaleMap&) = default;

 private:
  Grid<std::uint8_t> levels_;
  double scale_ = 1.0;
};

/// One annotated food item: label, calories, and the mask those calories occupy.
struct FoodItemAnnotation {
  std::string label;
  double kcal = 0.0;
  SegmentationMask mask;
};

}  // namespace calmap
