#pragma once

#include <string>
#include <vector>

#include <opencv2/core.hpp>

#include "calmap/density.hpp"
#include "calmap/types.hpp"

namespace calmap {

/// One meal: an RGB image plus the per-item annotations taken over it.
struct EatingOccasion {
  std::string id;
  cv::Mat image;  // 8-bit RGB, same H x W as every item mask
  std::vector<FoodItemAnnotation> items;

  double total_kcal() const {
    double total = 0.0;
    for (const FoodItemAnnotation& item : items) total += item.kcal;
    return total;
  }
};

/// Checks every occasion invariant; throws ValidationError naming the offender.
inline void validate_occasion(const EatingOccasion& occ) {
  const std::string who = "occasion '" + occ.id + "'";
  if (occ.image.empty() || occ.image.type() != CV_8UC3) {
    throw ValidationError(who + ": image must be a non-empty 8-bit RGB image");
  }
  if (occ.items.empty()) throw ValidationError(who + ": needs at least one item");
  Grid<std::uint8_t> support(occ.image.rows, occ.image.cols, std::uint8_t{0});
  for (std::size_t i = 0; i < occ.items.size(); ++i) {
    const FoodItemAnnotation& item = occ.items[i];
    const std::string where = who + " item " + std::to_string(i) + " ('" + item.label + "')";
    if (!(item.kcal > 0.0) || !std::isfinite(item.kcal)) {
      throw ValidationError(where + ": missing or non-positive kcal");
    }
    if (item.mask.height() != occ.image.rows || item.mask.width() != occ.image.cols) {
      throw ValidationError(where + ": mask shape differs from the image");
    }
    if (item.mask.foreground_count() == 0) {
      throw ValidationError(where + ": mask has no foreground pixels");
    }
    for (int r = 0; r < item.mask.height(); ++r) {
      for (int c = 0; c < item.mask.width(); ++c) {
        if (!item.mask.foreground(r, c)) continue;
        if (support.at(r, c) != 0) {
          throw ValidationError(where + ": mask overlaps another item at (" +
                                std::to_string(r) + "," + std::to_string(c) + ")");
        }
        support.at(r, c) = 1;
      }
    }
  }
}

/// Ground-truth density map of a meal: per-item generation plus disjoint combination.
inline DensityMap occasion_density(const EatingOccasion& occ) {
  std::vector<DensityMap> maps;
  maps.reserve(occ.items.size());
  for (const FoodItemAnnotation& item : occ.items) {
    maps.push_back(generate_item_density(item));
  }
  return combine_item_densities(maps, occ.image.rows, occ.image.cols);
}

}  // namespace calmap
