#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "calmap/image_io.hpp"
#include "calmap/occasion.hpp"

namespace calmap {

// Manifest format, version 1:
//   {"version": 1, "occasions": [{"id": str, "image": path,
//     "items": [{"label": str, "kcal": number, "mask": path}]}]}
// Paths are relative to the manifest file. Images are 8-bit RGB PNGs; masks are
// 8-bit single-channel PNGs with foreground 255.

struct ManifestItemRecord {
  std::string label;
  std::optional<double> kcal;  // absent in corrupt source data
  std::filesystem::path mask_path;
};

struct ManifestOccasionRecord {
  std::string id;
  std::filesystem::path image_path;
  std::vector<ManifestItemRecord> items;
};

/// Syntactic pass only: reads ids, paths, and raw kcal values. Semantic checks
/// (files readable, masks binary, kcal present and positive) happen at load time.
inline std::vector<ManifestOccasionRecord> parse_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("parse_manifest: cannot open " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("parse_manifest: " + path.string() + ": " + e.what());
  }
  if (!doc.is_object() || doc.value("version", 0) != 1) {
    throw ParseError("parse_manifest: " + path.string() + ": expected manifest version 1");
  }
  if (!doc.contains("occasions") || !doc["occasions"].is_array()) {
    throw ParseError("parse_manifest: " + path.string() + ": missing 'occasions' array");
  }
  const std::filesystem::path base = path.parent_path();
  std::vector<ManifestOccasionRecord> records;
  for (const auto& occ : doc["occasions"]) {
    ManifestOccasionRecord rec;
    if (!occ.is_object() || !occ.contains("id") || !occ["id"].is_string() ||
        !occ.contains("image") || !occ["image"].is_string() || !occ.contains("items") ||
        !occ["items"].is_array()) {
      throw ParseError("parse_manifest: " + path.string() +
                       ": each occasion needs 'id', 'image', and 'items'");
    }
    rec.id = occ["id"].get<std::string>();
    rec.image_path = base / occ["image"].get<std::string>();
    for (const auto& item : occ["items"]) {
      if (!item.is_object() || !item.contains("mask") || !item["mask"].is_string()) {
        throw ParseError("parse_manifest: occasion '" + rec.id + "': each item needs a 'mask'");
      }
      ManifestItemRecord ir;
      ir.label = item.value("label", std::string{});
      if (item.contains("kcal") && !item["kcal"].is_null()) {
        if (!item["kcal"].is_number()) {
          throw ParseError("parse_manifest: occasion '" + rec.id + "': kcal must be a number");
        }
        ir.kcal = item["kcal"].get<double>();
      }
      ir.mask_path = base / item["mask"].get<std::string>();
      rec.items.push_back(std::move(ir));
    }
    records.push_back(std::move(rec));
  }
  return records;
}

/// Which inaccuracies pruning forgives. Structural invariants (missing kcal,
/// shape mismatches, overlaps) always reject; a tolerant mask mode is offered
/// because near-binary masks are salvageable by thresholding.
struct PrunePolicy {
  int target_size = 0;                   // 0 keeps the native resolution
  bool threshold_nonbinary_masks = false;  // >= 128 becomes foreground
};

/// Loads and fully validates one occasion. target_size > 0 regularizes the image
/// (bilinear) and masks (nearest) to target x target before validation.
inline EatingOccasion load_occasion(const ManifestOccasionRecord& rec, int target_size = 0,
                                    const PrunePolicy& policy = {}) {
  const std::string who = "occasion '" + rec.id + "'";
  if (rec.items.empty()) throw ValidationError(who + ": needs at least one item");

  EatingOccasion occ;
  occ.id = rec.id;
  occ.image = load_image_png(rec.image_path);

  std::vector<SegmentationMask> masks;
  for (std::size_t i = 0; i < rec.items.size(); ++i) {
    const ManifestItemRecord& item = rec.items[i];
    const std::string where = who + " item " + std::to_string(i) + " ('" + item.label + "')";
    if (!item.kcal.has_value()) throw ValidationError(where + ": missing kcal");
    SegmentationMask mask;
    if (policy.threshold_nonbinary_masks) {
      cv::Mat raw = cv::imread(item.mask_path.string(), cv::IMREAD_UNCHANGED);
      if (raw.empty()) throw ParseError(where + ": cannot read mask " + item.mask_path.string());
      if (raw.channels() != 1 || raw.depth() != CV_8U) {
        throw ValidationError(where + ": mask must be an 8-bit single-channel PNG");
      }
      mask = mask_from_mat(raw);
    } else {
      try {
        mask = load_mask_png(item.mask_path);
      } catch (const std::exception& e) {
        throw ValidationError(where + ": " + e.what());
      }
    }
    if (mask.height() != occ.image.rows || mask.width() != occ.image.cols) {
      throw ValidationError(where + ": mask is " + std::to_string(mask.height()) + "x" +
                            std::to_string(mask.width()) + " but the image is " +
                            std::to_string(occ.image.rows) + "x" + std::to_string(occ.image.cols));
    }
    masks.push_back(std::move(mask));
  }

  if (target_size > 0 && (occ.image.rows != target_size || occ.image.cols != target_size)) {
    auto [image, resized] = regularize_image(occ.image, masks, target_size);
    occ.image = std::move(image);
    masks = std::move(resized);
  }

  for (std::size_t i = 0; i < rec.items.size(); ++i) {
    occ.items.push_back(FoodItemAnnotation{rec.items[i].label, rec.items[i].kcal.value_or(0.0),
                                           std::move(masks[i])});
  }
  validate_occasion(occ);
  return occ;
}

/// All-or-nothing load: throws on the first invalid occasion, naming it.
inline std::vector<EatingOccasion> load_manifest(const std::filesystem::path& path,
                                                 int target_size = 0) {
  std::vector<EatingOccasion> occasions;
  for (const ManifestOccasionRecord& rec : parse_manifest(path)) {
    occasions.push_back(load_occasion(rec, target_size));
  }
  return occasions;
}

struct PruneRejection {
  std::string id;
  std::string reason;
};

struct PruneResult {
  std::vector<EatingOccasion> kept;
  std::vector<PruneRejection> rejected;
};

/// Keeps every occasion that validates and reports the rest with reasons.
/// Never throws on bad data; only I/O errors on the manifest itself escape.
inline PruneResult prune(const std::vector<ManifestOccasionRecord>& records,
                         const PrunePolicy& policy = {}) {
  PruneResult result;
  for (const ManifestOccasionRecord& rec : records) {
    try {
      result.kept.push_back(load_occasion(rec, policy.target_size, policy));
    } catch (const std::exception& e) {
      result.rejected.push_back(PruneRejection{rec.id, e.what()});
    }
  }
  return result;
}

/// Writes occasions as a manifest directory: manifest.json plus images/ and
/// masks/ PNGs. Occasion ids become file names. Returns the manifest path.
inline std::filesystem::path save_manifest(const std::filesystem::path& out_dir,
                                           const std::vector<EatingOccasion>& occasions) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir / "images");
  fs::create_directories(out_dir / "masks");

  nlohmann::ordered_json doc;
  doc["version"] = 1;
  doc["occasions"] = nlohmann::ordered_json::array();
  for (const EatingOccasion& occ : occasions) {
    validate_occasion(occ);
    const std::string image_rel = "images/" + occ.id + ".png";
    save_image_png(out_dir / image_rel, occ.image);
    nlohmann::ordered_json entry;
    entry["id"] = occ.id;
    entry["image"] = image_rel;
    entry["items"] = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < occ.items.size(); ++i) {
      const std::string mask_rel = "masks/" + occ.id + "_item" + std::to_string(i) + ".png";
      save_mask_png(out_dir / mask_rel, occ.items[i].mask);
      nlohmann::ordered_json item;
      item["label"] = occ.items[i].label;
      item["kcal"] = occ.items[i].kcal;
      item["mask"] = mask_rel;
      entry["items"].push_back(std::move(item));
    }
    doc["occasions"].push_back(std::move(entry));
  }

  const fs::path manifest_path = out_dir / "manifest.json";
  std::ofstream out(manifest_path, std::ios::trunc);
  if (!out) throw std::runtime_error("save_manifest: cannot open " + manifest_path.string());
  out << doc.dump(2) << '\n';
  return manifest_path;
}

}  // namespace calmap
