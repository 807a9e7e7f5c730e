#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "calmap/errors.hpp"
#include "calmap/occasion.hpp"
#include "calmap/seeds.hpp"

namespace calmap {

struct InstanceRecord {
  std::string id;
  double true_kcal = 0.0;
  double est_kcal = 0.0;
  double error = 0.0;  // est - true
};

struct EvaluationReport {
  std::vector<InstanceRecord> records;
  double mae = 0.0;   // kCal
  double mape = 0.0;  // percent
  std::uint64_t seed = 0;
  std::string pipeline;  // encoder checkpoint id + decoder kind
};

using DensityPredictor = std::function<DensityMap(const EatingOccasion&)>;
using CalorieEstimator = std::function<double(const DensityMap&)>;

/// Runs the predictor and estimator over the test set and averages the absolute
/// and percent errors. No augmentation is applied here; true calories must be
/// positive (enforced at ingestion), since the percent error divides by them.
inline EvaluationReport evaluate(const DensityPredictor& predictor,
                                 const CalorieEstimator& estimator,
                                 const std::vector<EatingOccasion>& test_occasions,
                                 std::string pipeline_descriptor = "", std::uint64_t seed = 0) {
  if (test_occasions.empty()) throw EmptyTestSet("evaluate: test set is empty");
  EvaluationReport report;
  report.seed = seed;
  report.pipeline = std::move(pipeline_descriptor);
  double abs_sum = 0.0, pct_sum = 0.0;
  for (const EatingOccasion& occ : test_occasions) {
    const double truth = occ.total_kcal();
    if (!(truth > 0.0)) {
      throw ValidationError("evaluate: occasion '" + occ.id + "' has non-positive total kcal");
    }
    const double est = estimator(predictor(occ));
    const double err = est - truth;
    report.records.push_back(InstanceRecord{occ.id, truth, est, err});
    abs_sum += std::abs(err);
    pct_sum += std::abs(err) / truth * 100.0;
  }
  report.mae = abs_sum / static_cast<double>(report.records.size());
  report.mape = pct_sum / static_cast<double>(report.records.size());
  return report;
}

struct AggregateReport {
  std::vector<EvaluationReport> runs;
  double mean_mae = 0.0;
  double mean_mape = 0.0;
};

/// Repeats an experiment with per-run derived seeds and averages the metrics.
/// Failures are rethrown with the run index attached.
inline AggregateReport aggregate(
    const std::function<EvaluationReport(int run_index, std::uint64_t run_seed)>& run_once,
    int runs, std::uint64_t base_seed) {
  if (runs < 1) throw std::invalid_argument("aggregate: runs must be >= 1");
  AggregateReport agg;
  for (int i = 0; i < runs; ++i) {
    const std::uint64_t run_seed = derive_seed(base_seed, "run", static_cast<std::uint64_t>(i));
    try {
      agg.runs.push_back(run_once(i, run_seed));
    } catch (const std::exception& e) {
      throw std::runtime_error("aggregate: run " + std::to_string(i) + ": " + e.what());
    }
  }
  for (const EvaluationReport& r : agg.runs) {
    agg.mean_mae += r.mae;
    agg.mean_mape += r.mape;
  }
  agg.mean_mae /= static_cast<double>(agg.runs.size());
  agg.mean_mape /= static_cast<double>(agg.runs.size());
  return agg;
}

struct HistogramBin {
  double lo = 0.0;
  double hi = 0.0;
  int count = 0;
};

/// Signed-error histogram: equal-width bins spanning the symmetric range
/// +-max|error|. A degenerate all-zero report puts everything in the center bin.
inline std::vector<HistogramBin> error_histogram_bins(const EvaluationReport& report,
                                                      int bins = 20) {
  if (report.records.empty()) throw std::invalid_argument("error_histogram_bins: empty report");
  if (bins < 1) throw std::invalid_argument("error_histogram_bins: bins must be >= 1");
  double max_abs = 0.0;
  for (const InstanceRecord& rec : report.records) max_abs = std::max(max_abs, std::abs(rec.error));
  if (max_abs == 0.0) max_abs = 1.0;
  const double lo = -max_abs;
  const double width = 2.0 * max_abs / static_cast<double>(bins);
  std::vector<HistogramBin> out(bins);
  for (int i = 0; i < bins; ++i) {
    out[i].lo = lo + width * i;
    out[i].hi = lo + width * (i + 1);
  }
  for (const InstanceRecord& rec : report.records) {
    int idx = static_cast<int>(std::floor((rec.error - lo) / width));
    idx = std::clamp(idx, 0, bins - 1);
    out[idx].count += 1;
  }
  return out;
}

/// Ids of the k largest overestimates and k largest underestimates.
struct ExtremeSelection {
  std::vector<std::string> over;
  std::vector<std::string> under;
};

inline ExtremeSelection select_extreme_instances(const EvaluationReport& report, int k) {
  std::vector<InstanceRecord> sorted = report.records;
  std::sort(sorted.begin(), sorted.end(),
            [](const InstanceRecord& a, const InstanceRecord& b) { return a.error > b.error; });
  ExtremeSelection sel;
  for (int i = 0; i < k && i < static_cast<int>(sorted.size()); ++i) {
    if (sorted[i].error > 0) sel.over.push_back(sorted[i].id);
  }
  for (int i = 0; i < k && i < static_cast<int>(sorted.size()); ++i) {
    const InstanceRecord& rec = sorted[sorted.size() - 1 - i];
    if (rec.error < 0) sel.under.push_back(rec.id);
  }
  return sel;
}

inline nlohmann::ordered_json report_to_json(const EvaluationReport& report) {
  nlohmann::ordered_json doc;
  doc["pipeline"] = report.pipeline;
  doc["seed"] = report.seed;
  doc["count"] = report.records.size();
  doc["mae"] = report.mae;
  doc["mape"] = report.mape;
  doc["records"] = nlohmann::ordered_json::array();
  for (const InstanceRecord& rec : report.records) {
    doc["records"].push_back({{"id", rec.id},
                              {"true_kcal", rec.true_kcal},
                              {"est_kcal", rec.est_kcal},
                              {"error", rec.error}});
  }
  return doc;
}

inline void write_report_json(const EvaluationReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("write_report_json: cannot open " + path.string());
  out << report_to_json(report).dump(2) << '\n';
}

inline EvaluationReport report_from_json(const nlohmann::json& doc) {
  EvaluationReport report;
  report.pipeline = doc.value("pipeline", std::string{});
  report.seed = doc.value("seed", std::uint64_t{0});
  report.mae = doc.at("mae").get<double>();
  report.mape = doc.at("mape").get<double>();
  for (const auto& rec : doc.at("records")) {
    report.records.push_back(InstanceRecord{rec.at("id").get<std::string>(),
                                            rec.at("true_kcal").get<double>(),
                                            rec.at("est_kcal").get<double>(),
                                            rec.at("error").get<double>()});
  }
  return report;
}

inline EvaluationReport read_report_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("read_report_json: cannot open " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
    return report_from_json(doc);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("read_report_json: " + path.string() + ": " + e.what());
  }
}

inline void write_report_csv(const EvaluationReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("write_report_csv: cannot open " + path.string());
  out << "id,true_kcal,est_kcal,error\n";
  out.precision(10);
  for (const InstanceRecord& rec : report.records) {
    out << rec.id << ',' << rec.true_kcal << ',' << rec.est_kcal << ',' << rec.error << '\n';
  }
}

inline nlohmann::ordered_json aggregate_to_json(const AggregateReport& agg) {
  nlohmann::ordered_json doc;
  doc["run_count"] = agg.runs.size();
  doc["mean_mae"] = agg.mean_mae;
  doc["mean_mape"] = agg.mean_mape;
  doc["runs"] = nlohmann::ordered_json::array();
  for (const EvaluationReport& r : agg.runs) doc["runs"].push_back(report_to_json(r));
  return doc;
}

inline void write_aggregate_json(const AggregateReport& agg, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("write_aggregate_json: cannot open " + path.string());
  out << aggregate_to_json(agg).dump(2) << '\n';
}

inline AggregateReport read_aggregate_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("read_aggregate_json: cannot open " + path.string());
  try {
    nlohmann::json doc = nlohmann::json::parse(in);
    AggregateReport agg;
    agg.mean_mae = doc.at("mean_mae").get<double>();
    agg.mean_mape = doc.at("mean_mape").get<double>();
    for (const auto& r : doc.at("runs")) agg.runs.push_back(report_from_json(r));
    return agg;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("read_aggregate_json: " + path.string() + ": " + e.what());
  }
}

}  // namespace calmap
