#pragma once

#include <algorithm>
#include <cmath>

#include "calmap/errors.hpp"
#include "calmap/types.hpp"

namespace calmap {

// Unit ranging for the generator: densities divided by a constant K chosen at or
// above the maximum training-set cell value, clamped into [0, 1].

inline Grid<float> normalize_density(const DensityMap& map, double k) {
  if (!(k > 0.0) || !std::isfinite(k)) {
    throw NonPositiveK("normalize_density: K must be positive and finite");
  }
  Grid<float> unit(map.height(), map.width(), 0.0f);
  for (int r = 0; r < map.height(); ++r) {
    for (int c = 0; c < map.width(); ++c) {
      const double u = static_cast<double>(map.at(r, c)) / k;
      unit.at(r, c) = static_cast<float>(std::clamp(u, 0.0, 1.0));
    }
  }
  return unit;
}

inline DensityMap denormalize_density(const Grid<float>& unit, double k) {
  if (!(k > 0.0) || !std::isfinite(k)) {
    throw NonPositiveK("denormalize_density: K must be positive and finite");
  }
  Grid<float> cells(unit.height(), unit.width(), 0.0f);
  for (int r = 0; r < unit.height(); ++r) {
    for (int c = 0; c < unit.width(); ++c) {
      const double v = static_cast<double>(unit.at(r, c)) * k;
      cells.at(r, c) = static_cast<float>(std::max(v, 0.0));
    }
  }
  return DensityMap::from_grid(std::move(cells));
}

/// Maximum cell value over a set of maps; the usual way K is chosen.
inline double max_cell_density(const std::vector<DensityMap>& maps) {
  double max_value = 0.0;
  for (const DensityMap& m : maps) {
    for (float v : m.cells()) max_value = std::max(max_value, static_cast<double>(v));
  }
  return max_value;
}

}  // namespace calmap
