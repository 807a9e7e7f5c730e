#pragma once

#include <cassert>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

namespace calmap {

enum class FlipAxis { kHorizontal, kVertical };

/// Dense row-major H x W grid. Rows index height, columns index width.
template <typename T>
class Grid {
 public:
  Grid() = default;

  Grid(int height, int width, T fill = T{}) : height_(height), width_(width) {
    if (height < 1 || width < 1) {
      throw std::invalid_argument("Grid: height and width must be >= 1");
    }
    cells_.assign(static_cast<std::size_t>(height) * static_cast<std::size_t>(width), fill);
  }

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return cells_.size(); }
  bool empty() const { return cells_.empty(); }

  T& at(int row, int col) {
    assert(row >= 0 && row < height_ && col >= 0 && col < width_);
    return cells_[static_cast<std::size_t>(row) * width_ + col];
  }
  const T& at(int row, int col) const {
    assert(row >= 0 && row < height_ && col >= 0 && col < width_);
    return cells_[static_cast<std::size_t>(row) * width_ + col];
  }

  std::vector<T>& cells() { return cells_; }
  const std::vector<T>& cells() const { return cells_; }

  bool same_shape(const Grid& other) const {
    return height_ == other.height_ && width_ == other.width_;
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<T> cells_;
};

/// Mirror along the chosen axis. Horizontal reverses columns, vertical reverses rows.
template <typename T>
Grid<T> flip(const Grid<T>& g, FlipAxis axis) {
  Grid<T> out(g.height(), g.width());
  for (int r = 0; r < g.height(); ++r) {
    for (int c = 0; c < g.width(); ++c) {
      if (axis == FlipAxis::kHorizontal) {
        out.at(r, g.width() - 1 - c) = g.at(r, c);
      } else {
        out.at(g.height() - 1 - r, c) = g.at(r, c);
      }
    }
  }
  return out;
}

}  // namespace calmap
