#pragma once

#include <algorithm>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "calmap/errors.hpp"
#include "calmap/occasion.hpp"
#include "calmap/seeds.hpp"

namespace calmap {

struct SplitRatios {
  double train = 0.70;
  double val = 0.10;
  double test = 0.20;
};

struct DatasetSplit {
  std::vector<std::string> train;
  std::vector<std::string> val;
  std::vector<std::string> test;
  std::uint64_t seed = 0;
  SplitRatios ratios;
};

/// Deterministic random partition. Ids are sorted, Fisher-Yates shuffled under the
/// seed, then assigned in blocks: train first, then val, then test. Sizes follow
/// floor(ratio * N) for test and val with the remainder going to train.
inline DatasetSplit split_ids(std::vector<std::string> ids, std::uint64_t seed,
                              SplitRatios ratios = {}) {
  const std::size_t n = ids.size();
  if (n < 3) {
    throw TooFewInstances("split_ids: need at least 3 occasions, got " + std::to_string(n));
  }
  std::sort(ids.begin(), ids.end());
  std::mt19937_64 rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) {
    std::swap(ids[i], ids[uniform_below(rng, i + 1)]);
  }
  const std::size_t test_n = static_cast<std::size_t>(ratios.test * static_cast<double>(n));
  const std::size_t val_n = static_cast<std::size_t>(ratios.val * static_cast<double>(n));
  const std::size_t train_n = n - test_n - val_n;

  DatasetSplit out;
  out.seed = seed;
  out.ratios = ratios;
  out.train.assign(ids.begin(), ids.begin() + train_n);
  out.val.assign(ids.begin() + train_n, ids.begin() + train_n + val_n);
  out.test.assign(ids.begin() + train_n + val_n, ids.end());
  return out;
}

inline DatasetSplit split(const std::vector<EatingOccasion>& occasions, std::uint64_t seed,
                          SplitRatios ratios = {}) {
  std::vector<std::string> ids;
  ids.reserve(occasions.size());
  for (const EatingOccasion& occ : occasions) ids.push_back(occ.id);
  return split_ids(std::move(ids), seed, ratios);
}

/// Picks occasions by id, preserving the given id order.
inline std::vector<EatingOccasion> select_occasions(const std::vector<EatingOccasion>& occasions,
                                                    const std::vector<std::string>& ids) {
  std::unordered_map<std::string, const EatingOccasion*> by_id;
  for (const EatingOccasion& occ : occasions) by_id[occ.id] = &occ;
  std::vector<EatingOccasion> out;
  out.reserve(ids.size());
  for (const std::string& id : ids) {
    auto it = by_id.find(id);
    if (it == by_id.end()) {
      throw std::invalid_argument("select_occasions: unknown occasion id '" + id + "'");
    }
    out.push_back(*it->second);
  }
  return out;
}

}  // namespace calmap
