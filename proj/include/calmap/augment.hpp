#pragma once

#include <array>
#include <string>

#include "calmap/image_io.hpp"
#include "calmap/occasion.hpp"

namespace calmap {

namespace detail {

inline EatingOccasion flip_occasion(const EatingOccasion& occ, bool horizontal, bool vertical,
                                    const std::string& suffix) {
  EatingOccasion out;
  out.id = occ.id + suffix;
  out.image = occ.image.clone();
  if (horizontal) out.image = flip_image(out.image, FlipAxis::kHorizontal);
  if (vertical) out.image = flip_image(out.image, FlipAxis::kVertical);
  for (const FoodItemAnnotation& item : occ.items) {
    SegmentationMask mask = item.mask;
    if (horizontal) mask = flip(mask, FlipAxis::kHorizontal);
    if (vertical) mask = flip(mask, FlipAxis::kVertical);
    out.items.push_back(FoodItemAnnotation{item.label, item.kcal, std::move(mask)});
  }
  return out;
}

}  // namespace detail

/// Deterministic four-fold expansion of one training occasion: identity,
/// horizontal flip, vertical flip, and both. Image and masks are transformed
/// together, so each variant's density map equals the flipped original and the
/// total kcal never changes. Meant for the training partition only.
inline std::array<EatingOccasion, 4> augment_fourfold(const EatingOccasion& occ) {
  return {
      detail::flip_occasion(occ, false, false, ""),
      detail::flip_occasion(occ, true, false, "_hflip"),
      detail::flip_occasion(occ, false, true, "_vflip"),
      detail::flip_occasion(occ, true, true, "_hvflip"),
  };
}

}  // namespace calmap
