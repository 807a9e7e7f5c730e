#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgproc.hpp>

#include "calmap/density.hpp"
#include "calmap/eval.hpp"
#include "calmap/image_io.hpp"
#include "calmap/occasion.hpp"

namespace calmap {

inline void write_histogram_csv(const std::vector<HistogramBin>& bins,
                                const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("write_histogram_csv: cannot open " + path.string());
  out << "bin_lo,bin_hi,count\n";
  out.precision(10);
  for (const HistogramBin& b : bins) {
    out << b.lo << ',' << b.hi << ',' << b.count << '\n';
  }
}

/// Bar chart of the signed estimation errors.
inline void write_histogram_png(const std::vector<HistogramBin>& bins,
                                const std::filesystem::path& path, int width = 800,
                                int height = 480) {
  const int margin = 48;
  cv::Mat canvas(height, width, CV_8UC3, cv::Scalar(255, 255, 255));
  int max_count = 1;
  for (const HistogramBin& b : bins) max_count = std::max(max_count, b.count);

  const double plot_w = width - 2.0 * margin;
  const double plot_h = height - 2.0 * margin;
  const double bar_w = plot_w / static_cast<double>(bins.size());
  for (std::size_t i = 0; i < bins.size(); ++i) {
    const double frac = static_cast<double>(bins[i].count) / static_cast<double>(max_count);
    const int x0 = margin + static_cast<int>(i * bar_w) + 1;
    const int x1 = margin + static_cast<int>((i + 1) * bar_w) - 1;
    const int y1 = height - margin;
    const int y0 = y1 - static_cast<int>(frac * plot_h);
    cv::rectangle(canvas, cv::Point(x0, y0), cv::Point(x1, y1), cv::Scalar(180, 96, 40),
                  cv::FILLED);
  }
  cv::rectangle(canvas, cv::Point(margin, margin), cv::Point(width - margin, height - margin),
                cv::Scalar(0, 0, 0), 1);

  char label[64];
  std::snprintf(label, sizeof(label), "%.1f", bins.front().lo);
  cv::putText(canvas, label, cv::Point(margin - 16, height - margin + 24),
              cv::FONT_HERSHEY_SIMPLEX, 0.45, cv::Scalar(0, 0, 0), 1);
  std::snprintf(label, sizeof(label), "%.1f", bins.back().hi);
  cv::putText(canvas, label, cv::Point(width - margin - 24, height - margin + 24),
              cv::FONT_HERSHEY_SIMPLEX, 0.45, cv::Scalar(0, 0, 0), 1);
  std::snprintf(label, sizeof(label), "max count %d", max_count);
  cv::putText(canvas, label, cv::Point(margin, margin - 12), cv::FONT_HERSHEY_SIMPLEX, 0.45,
              cv::Scalar(0, 0, 0), 1);
  cv::putText(canvas, "estimation error (kCal)", cv::Point(width / 2 - 90, height - 12),
              cv::FONT_HERSHEY_SIMPLEX, 0.45, cv::Scalar(0, 0, 0), 1);

  save_image_png(path, canvas);
}

inline std::string panel_caption(double est_kcal, double true_kcal) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "est=%.1f kCal / true=%.1f kCal", est_kcal, true_kcal);
  return buf;
}

/// Side-by-side panel: input image, rendered predicted map, rendered ground-truth
/// map, with the estimate and truth captioned underneath.
inline cv::Mat qualitative_panel(const EatingOccasion& occ, const DensityMap& predicted,
                                 double estimate) {
  const DensityMap truth_map = occasion_density(occ);
  const Grid<std::uint8_t> pred_render = render_visualization(predicted);
  const Grid<std::uint8_t> truth_render = render_visualization(truth_map);

  auto to_rgb = [](const Grid<std::uint8_t>& g) {
    cv::Mat gray(g.height(), g.width(), CV_8UC1);
    for (int r = 0; r < g.height(); ++r)
      for (int c = 0; c < g.width(); ++c) gray.at<std::uint8_t>(r, c) = g.at(r, c);
    cv::Mat rgb;
    cv::cvtColor(gray, rgb, cv::COLOR_GRAY2RGB);
    return rgb;
  };

  const int h = occ.image.rows;
  const int w = occ.image.cols;
  const int gap = 4;
  const int caption_h = 28;
  cv::Mat panel(h + caption_h, 3 * w + 2 * gap, CV_8UC3, cv::Scalar(255, 255, 255));
  occ.image.copyTo(panel(cv::Rect(0, 0, w, h)));
  to_rgb(pred_render).copyTo(panel(cv::Rect(w + gap, 0, w, h)));
  to_rgb(truth_render).copyTo(panel(cv::Rect(2 * (w + gap), 0, w, h)));
  cv::putText(panel, panel_caption(estimate, occ.total_kcal()), cv::Point(4, h + caption_h - 9),
              cv::FONT_HERSHEY_SIMPLEX, 0.42, cv::Scalar(0, 0, 0), 1);
  return panel;
}

inline void write_qualitative_panel_png(const std::filesystem::path& path,
                                        const EatingOccasion& occ, const DensityMap& predicted,
                                        double estimate) {
  save_image_png(path, qualitative_panel(occ, predicted, estimate));
}

}  // namespace calmap
