#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "calmap/errors.hpp"

namespace calmap {

/// One published reference result. These are comparison targets from the original
/// study's result tables, kept for side-by-side reporting; they are not
/// reproducible here because the study's meal dataset is private.
struct ReferenceTarget {
  int table = 0;
  std::string method;
  std::optional<bool> pretrained;  // set only for backbone rows of table 2
  double mae_kcal = 0.0;
  double mape_percent = 0.0;
};

inline const std::vector<ReferenceTarget>& reference_targets() {
  static const std::vector<ReferenceTarget> targets = {
      {1, "grayscale", std::nullopt, 183.5, 48.5},
      {1, "image_only", std::nullopt, 287.7, 61.2},
      {1, "density_map_image_ln_gn", std::nullopt, 219.1, 54.9},
      {1, "density_map_image_ln", std::nullopt, 208.4, 58.3},
      {1, "ours", std::nullopt, 150.5, 35.7},
      {2, "vgg16", true, 166.3, 38.5},
      {2, "vgg16", false, 155.5, 37.9},
      {2, "resnet18", true, 231.8, 54.7},
      {2, "resnet18", false, 149.3, 35.4},
      {2, "resnet50", true, 173.3, 37.52},
      {2, "resnet50", false, 154.0, 34.5},
      {2, "ours", std::nullopt, 150.5, 35.7},
      {3, "tensor_density_map", std::nullopt, 166.3, 38.5},
      {3, "grayscale", std::nullopt, 183.5, 48.5},
  };
  return targets;
}

inline const ReferenceTarget& find_reference(int table, std::string_view method,
                                             std::optional<bool> pretrained = std::nullopt) {
  for (const ReferenceTarget& t : reference_targets()) {
    if (t.table == table && t.method == method && t.pretrained == pretrained) return t;
  }
  throw std::invalid_argument("find_reference: no entry for table " + std::to_string(table) +
                              " method '" + std::string(method) + "'");
}

inline nlohmann::ordered_json reference_registry_json() {
  nlohmann::ordered_json doc;
  doc["version"] = 1;
  doc["description"] =
      "Published reference results (MAE in kCal, MAPE in percent) from the original study's "
      "result tables. Comparison targets only; the study dataset is private, so these numbers "
      "are not reproduced by this code base.";
  doc["targets"] = nlohmann::ordered_json::array();
  for (const ReferenceTarget& t : reference_targets()) {
    nlohmann::ordered_json entry;
    entry["table"] = t.table;
    entry["method"] = t.method;
    if (t.pretrained.has_value()) entry["pretrained"] = *t.pretrained;
    entry["mae_kcal"] = t.mae_kcal;
    entry["mape_percent"] = t.mape_percent;
    doc["targets"].push_back(std::move(entry));
  }
  return doc;
}

inline void write_reference_registry(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("write_reference_registry: cannot open " + path.string());
  out << reference_registry_json().dump(2) << '\n';
}

/// Loads a registry file and checks it matches the built-in constants.
inline void check_reference_registry(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("check_reference_registry: cannot open " + path.string());
  nlohmann::json on_disk;
  try {
    on_disk = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("check_reference_registry: " + path.string() + ": " + e.what());
  }
  if (on_disk != nlohmann::json(reference_registry_json())) {
    throw ValidationError("check_reference_registry: " + path.string() +
                          " does not match the built-in reference targets");
  }
}

}  // namespace calmap
