#include <gtest/gtest.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "calmap/eval.hpp"
#include "calmap/figures.hpp"
#include "calmap/reference.hpp"
#include "calmap/synth.hpp"

namespace {

using namespace calmap;
namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("calmap_ev_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::vector<EatingOccasion> test_scenes(int n, std::uint64_t seed) {
  SyntheticSceneConfig cfg;
  cfg.scene_count = n;
  cfg.image_size = 32;
  cfg.max_items = 2;
  cfg.seed = seed;
  return generate_synthetic(cfg);
}

const DensityPredictor kGroundTruthPredictor = [](const EatingOccasion& occ) {
  return occasion_density(occ);
};

TEST(Evaluate, HandWorkedMaeAndMape) {
  // truths 100 and 200, predictions 110 and 180
  SegmentationMask m(2, 2);
  m.set_foreground(0, 0, true);
  EatingOccasion occ_a{"a", cv::Mat(2, 2, CV_8UC3, cv::Scalar(0, 0, 0)),
                       {FoodItemAnnotation{"x", 100.0, m}}};
  EatingOccasion occ_b{"b", cv::Mat(2, 2, CV_8UC3, cv::Scalar(0, 0, 0)),
                       {FoodItemAnnotation{"x", 200.0, m}}};
  int call = 0;
  CalorieEstimator scripted = [&call](const DensityMap&) {
    return call++ == 0 ? 110.0 : 180.0;
  };
  EvaluationReport report = evaluate(kGroundTruthPredictor, scripted, {occ_a, occ_b});
  EXPECT_DOUBLE_EQ(report.mae, 15.0);
  EXPECT_DOUBLE_EQ(report.mape, 10.0);
  ASSERT_EQ(report.records.size(), 2u);
  EXPECT_DOUBLE_EQ(report.records[0].error, 10.0);
  EXPECT_DOUBLE_EQ(report.records[1].error, -20.0);
}

TEST(Evaluate, IdentityOracleIsExactlyZero) {
  auto scenes = test_scenes(20, 3);
  EvaluationReport report = evaluate(kGroundTruthPredictor, summation_decode, scenes);
  EXPECT_DOUBLE_EQ(report.mae, 0.0);
  EXPECT_DOUBLE_EQ(report.mape, 0.0);
}

TEST(Evaluate, PerturbedOracleGivesTenPercent) {
  auto scenes = test_scenes(15, 5);
  CalorieEstimator inflated = [](const DensityMap& map) { return summation_decode(map) * 1.1; };
  EvaluationReport report = evaluate(kGroundTruthPredictor, inflated, scenes);
  EXPECT_NEAR(report.mape, 10.0, 1e-9);
  double mean_truth = 0.0;
  for (const auto& rec : report.records) mean_truth += rec.true_kcal;
  mean_truth /= static_cast<double>(report.records.size());
  EXPECT_NEAR(report.mae, 0.1 * mean_truth, 1e-9 * mean_truth);
}

TEST(Evaluate, UniformScalingGivesMapeOfEpsilon) {
  auto scenes = test_scenes(10, 7);
  for (double eps : {0.01, 0.05, 0.25}) {
    CalorieEstimator scaled = [eps](const DensityMap& map) {
      return summation_decode(map) * (1.0 + eps);
    };
    EvaluationReport report = evaluate(kGroundTruthPredictor, scaled, scenes);
    EXPECT_NEAR(report.mape, 100.0 * eps, 1e-9);
  }
}

TEST(Evaluate, PermutationInvariant) {
  auto scenes = test_scenes(12, 9);
  CalorieEstimator noisy = [](const DensityMap& map) { return summation_decode(map) * 0.93 + 5.0; };
  EvaluationReport forward = evaluate(kGroundTruthPredictor, noisy, scenes);
  std::reverse(scenes.begin(), scenes.end());
  EvaluationReport backward = evaluate(kGroundTruthPredictor, noisy, scenes);
  EXPECT_NEAR(forward.mae, backward.mae, 1e-12);
  EXPECT_NEAR(forward.mape, backward.mape, 1e-12);
}

TEST(Evaluate, EmptyTestSetRejected) {
  EXPECT_THROW(evaluate(kGroundTruthPredictor, summation_decode, {}), EmptyTestSet);
}

TEST(Evaluate, NonPositiveTruthRejected) {
  // bypasses occasion validation to hit the evaluator's own guard
  EatingOccasion bad;
  bad.id = "bad";
  bad.image = cv::Mat(2, 2, CV_8UC3, cv::Scalar(0, 0, 0));
  SegmentationMask m(2, 2);
  m.set_foreground(0, 0, true);
  bad.items.push_back(FoodItemAnnotation{"x", 0.0, m});
  EXPECT_THROW(evaluate(kGroundTruthPredictor, summation_decode, {bad}), ValidationError);
}

TEST(Aggregate, MeanOfRunMetrics) {
  const std::vector<double> maes = {10.0, 20.0, 30.0, 40.0, 50.0};
  auto run = [&](int run_index, std::uint64_t seed) {
    EvaluationReport r;
    r.mae = maes[run_index];
    r.mape = 2.0 * maes[run_index];
    r.seed = seed;
    r.records.push_back(InstanceRecord{"x", 1.0, 1.0, 0.0});
    return r;
  };
  AggregateReport agg = aggregate(run, 5, 123);
  EXPECT_DOUBLE_EQ(agg.mean_mae, 30.0);
  EXPECT_DOUBLE_EQ(agg.mean_mape, 60.0);
  ASSERT_EQ(agg.runs.size(), 5u);
  std::set<std::uint64_t> seeds;
  for (const auto& r : agg.runs) seeds.insert(r.seed);
  EXPECT_EQ(seeds.size(), 5u);  // per-run seeds are distinct
}

TEST(Aggregate, SingleRunEqualsItsReport) {
  auto run = [](int, std::uint64_t seed) {
    EvaluationReport r;
    r.mae = 12.5;
    r.mape = 7.25;
    r.seed = seed;
    return r;
  };
  AggregateReport agg = aggregate(run, 1, 9);
  EXPECT_DOUBLE_EQ(agg.mean_mae, 12.5);
  EXPECT_DOUBLE_EQ(agg.mean_mape, 7.25);
}

TEST(Aggregate, AttachesRunIndexToFailures) {
  auto run = [](int run_index, std::uint64_t) -> EvaluationReport {
    if (run_index == 1) throw DivergenceError("boom");
    return {};
  };
  try {
    aggregate(run, 3, 1);
    FAIL() << "expected a throw";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("run 1"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("boom"), std::string::npos);
  }
  EXPECT_THROW(aggregate(run, 0, 1), std::invalid_argument);
}

EvaluationReport report_with_errors(const std::vector<double>& errors) {
  EvaluationReport r;
  for (std::size_t i = 0; i < errors.size(); ++i) {
    r.records.push_back(
        InstanceRecord{"r" + std::to_string(i), 100.0, 100.0 + errors[i], errors[i]});
  }
  return r;
}

TEST(Histogram, SymmetricErrorsGiveEqualEndBars) {
  auto report = report_with_errors({-5.0, 5.0});
  auto bins = error_histogram_bins(report, 20);
  ASSERT_EQ(bins.size(), 20u);
  EXPECT_EQ(bins.front().count, 1);
  EXPECT_EQ(bins.back().count, 1);
  int total = 0;
  for (const auto& b : bins) total += b.count;
  EXPECT_EQ(total, 2);
  EXPECT_DOUBLE_EQ(bins.front().lo, -5.0);
  EXPECT_DOUBLE_EQ(bins.back().hi, 5.0);
}

TEST(Histogram, AllZeroErrorsLandInOneCenterBin) {
  auto report = report_with_errors({0.0, 0.0, 0.0});
  auto bins = error_histogram_bins(report, 20);
  int nonzero_bins = 0;
  for (const auto& b : bins) {
    if (b.count > 0) ++nonzero_bins;
  }
  EXPECT_EQ(nonzero_bins, 1);
  EXPECT_EQ(bins[10].count, 3);
}

TEST(Histogram, CsvRowCountMatchesBins) {
  TempDir dir;
  auto report = report_with_errors({-3.0, 1.0, 2.0, 2.5});
  auto bins = error_histogram_bins(report, 20);
  const fs::path csv = dir.path() / "hist.csv";
  write_histogram_csv(bins, csv);
  std::ifstream in(csv);
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 21);  // header plus one row per bin
  const fs::path png = dir.path() / "hist.png";
  write_histogram_png(bins, png);
  EXPECT_TRUE(fs::exists(png));
}

TEST(ExtremeSelection, PicksLargestOverAndUnder) {
  auto report = report_with_errors({-30.0, -1.0, 0.0, 2.0, 50.0, 10.0});
  ExtremeSelection sel = select_extreme_instances(report, 2);
  ASSERT_EQ(sel.over.size(), 2u);
  EXPECT_EQ(sel.over[0], "r4");
  EXPECT_EQ(sel.over[1], "r5");
  ASSERT_EQ(sel.under.size(), 2u);
  EXPECT_EQ(sel.under[0], "r0");
  EXPECT_EQ(sel.under[1], "r1");
}

TEST(ReportIo, JsonRoundTrip) {
  TempDir dir;
  auto scenes = test_scenes(6, 13);
  EvaluationReport report =
      evaluate(kGroundTruthPredictor, summation_decode, scenes, "identity+summation", 77);
  const fs::path p = dir.path() / "report.json";
  write_report_json(report, p);
  EvaluationReport back = read_report_json(p);
  EXPECT_EQ(back.pipeline, report.pipeline);
  EXPECT_EQ(back.seed, report.seed);
  EXPECT_DOUBLE_EQ(back.mae, report.mae);
  EXPECT_DOUBLE_EQ(back.mape, report.mape);
  ASSERT_EQ(back.records.size(), report.records.size());
  for (std::size_t i = 0; i < back.records.size(); ++i) {
    EXPECT_EQ(back.records[i].id, report.records[i].id);
    EXPECT_DOUBLE_EQ(back.records[i].true_kcal, report.records[i].true_kcal);
    EXPECT_DOUBLE_EQ(back.records[i].est_kcal, report.records[i].est_kcal);
  }
}

TEST(ReportIo, CsvHasHeaderAndOneRowPerRecord) {
  TempDir dir;
  auto report = report_with_errors({1.0, -2.0, 3.0});
  const fs::path p = dir.path() / "report.csv";
  write_report_csv(report, p);
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "id,true_kcal,est_kcal,error");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 3);
}

TEST(ReportIo, AggregateJsonRoundTrip) {
  TempDir dir;
  auto run = [](int i, std::uint64_t seed) {
    EvaluationReport r;
    r.mae = 10.0 + i;
    r.mape = 5.0 + i;
    r.seed = seed;
    r.records.push_back(InstanceRecord{"a", 100.0, 110.0, 10.0});
    return r;
  };
  AggregateReport agg = aggregate(run, 3, 5);
  const fs::path p = dir.path() / "aggregate.json";
  write_aggregate_json(agg, p);
  AggregateReport back = read_aggregate_json(p);
  EXPECT_DOUBLE_EQ(back.mean_mae, agg.mean_mae);
  EXPECT_DOUBLE_EQ(back.mean_mape, agg.mean_mape);
  ASSERT_EQ(back.runs.size(), 3u);
}

TEST(Panels, CaptionFormat) {
  EXPECT_EQ(panel_caption(123.44, 120.0), "est=123.4 kCal / true=120.0 kCal");
  EXPECT_EQ(panel_caption(0.0, 999.96), "est=0.0 kCal / true=1000.0 kCal");
}

TEST(Panels, IdentityOracleRendersIdenticalMaps) {
  TempDir dir;
  auto scenes = test_scenes(1, 15);
  const EatingOccasion& occ = scenes[0];
  const DensityMap truth = occasion_density(occ);
  cv::Mat panel = qualitative_panel(occ, truth, summation_decode(truth));
  const int w = occ.image.cols, h = occ.image.rows, gap = 4;
  cv::Mat predicted_roi = panel(cv::Rect(w + gap, 0, w, h));
  cv::Mat truth_roi = panel(cv::Rect(2 * (w + gap), 0, w, h));
  EXPECT_EQ(cv::norm(predicted_roi, truth_roi, cv::NORM_INF), 0.0);
  const fs::path p = dir.path() / "panel.png";
  write_qualitative_panel_png(p, occ, truth, summation_decode(truth));
  EXPECT_TRUE(fs::exists(p));
}

TEST(ReferenceRegistry, SpecTargetsPresent) {
  EXPECT_DOUBLE_EQ(find_reference(1, "ours").mae_kcal, 150.5);
  EXPECT_DOUBLE_EQ(find_reference(1, "ours").mape_percent, 35.7);
  EXPECT_DOUBLE_EQ(find_reference(1, "grayscale").mae_kcal, 183.5);
  EXPECT_DOUBLE_EQ(find_reference(1, "grayscale").mape_percent, 48.5);
  EXPECT_DOUBLE_EQ(find_reference(1, "image_only").mae_kcal, 287.7);
  EXPECT_DOUBLE_EQ(find_reference(1, "image_only").mape_percent, 61.2);
  EXPECT_DOUBLE_EQ(find_reference(1, "density_map_image_ln_gn").mae_kcal, 219.1);
  EXPECT_DOUBLE_EQ(find_reference(1, "density_map_image_ln_gn").mape_percent, 54.9);
  EXPECT_DOUBLE_EQ(find_reference(1, "density_map_image_ln").mae_kcal, 208.4);
  EXPECT_DOUBLE_EQ(find_reference(1, "density_map_image_ln").mape_percent, 58.3);
  EXPECT_DOUBLE_EQ(find_reference(2, "vgg16", false).mae_kcal, 155.5);
  EXPECT_DOUBLE_EQ(find_reference(2, "vgg16", false).mape_percent, 37.9);
  EXPECT_DOUBLE_EQ(find_reference(2, "resnet18", false).mae_kcal, 149.3);
  EXPECT_DOUBLE_EQ(find_reference(2, "resnet18", false).mape_percent, 35.4);
  EXPECT_DOUBLE_EQ(find_reference(2, "resnet50", false).mae_kcal, 154.0);
  EXPECT_DOUBLE_EQ(find_reference(2, "resnet50", false).mape_percent, 34.5);
  EXPECT_DOUBLE_EQ(find_reference(3, "tensor_density_map").mae_kcal, 166.3);
  EXPECT_DOUBLE_EQ(find_reference(3, "tensor_density_map").mape_percent, 38.5);
  EXPECT_DOUBLE_EQ(find_reference(3, "grayscale").mae_kcal, 183.5);
  EXPECT_THROW(find_reference(1, "not_a_method"), std::invalid_argument);
}

TEST(ReferenceRegistry, CheckedInFileMatchesConstants) {
  check_reference_registry(fs::path(CALMAP_DATA_DIR) / "reference_targets.json");
}

}  // namespace
