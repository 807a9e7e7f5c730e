#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "calmap/errors.hpp"
#include "calmap/types.hpp"

namespace calmap {

// In-memory images are 8-bit RGB (CV_8UC3); conversion to and from OpenCV's BGR
// happens only at the PNG boundary.

inline cv::Mat load_image_png(const std::filesystem::path& path) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw ParseError("load_image_png: cannot read image " + path.string());
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  return rgb;
}

inline void save_image_png(const std::filesystem::path& path, const cv::Mat& rgb) {
  if (rgb.empty() || rgb.type() != CV_8UC3) {
    throw ValidationError("save_image_png: expected a non-empty 8-bit RGB image");
  }
  cv::Mat bgr;
  cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
  if (!cv::imwrite(path.string(), bgr)) {
    throw std::runtime_error("save_image_png: write failed for " + path.string());
  }
}

/// Masks on disk are 8-bit single-channel PNGs with foreground 255 and
/// background 0; any other pixel value rejects the file.
inline SegmentationMask load_mask_png(const std::filesystem::path& path) {
  cv::Mat raw = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (raw.empty()) throw ParseError("load_mask_png: cannot read mask " + path.string());
  if (raw.channels() != 1 || raw.depth() != CV_8U) {
    throw ValidationError("load_mask_png: mask must be an 8-bit single-channel PNG: " +
                          path.string());
  }
  Grid<std::uint8_t> grid(raw.rows, raw.cols, std::uint8_t{0});
  for (int r = 0; r < raw.rows; ++r) {
    for (int c = 0; c < raw.cols; ++c) {
      const std::uint8_t v = raw.at<std::uint8_t>(r, c);
      if (v != 0 && v != 255) {
        throw ValidationError("load_mask_png: pixel value " + std::to_string(v) +
                              " at (" + std::to_string(r) + "," + std::to_string(c) +
                              ") is neither 0 nor 255: " + path.string());
      }
      grid.at(r, c) = v == 255 ? 1 : 0;
    }
  }
  return SegmentationMask::from_grid(std::move(grid));
}

inline void save_mask_png(const std::filesystem::path& path, const SegmentationMask& mask) {
  cv::Mat m(mask.height(), mask.width(), CV_8UC1);
  for (int r = 0; r < mask.height(); ++r) {
    for (int c = 0; c < mask.width(); ++c) {
      m.at<std::uint8_t>(r, c) = mask.foreground(r, c) ? 255 : 0;
    }
  }
  if (!cv::imwrite(path.string(), m)) {
    throw std::runtime_error("save_mask_png: write failed for " + path.string());
  }
}

inline cv::Mat mask_to_mat(const SegmentationMask& mask) {
  cv::Mat m(mask.height(), mask.width(), CV_8UC1);
  for (int r = 0; r < mask.height(); ++r) {
    for (int c = 0; c < mask.width(); ++c) {
      m.at<std::uint8_t>(r, c) = mask.foreground(r, c) ? 255 : 0;
    }
  }
  return m;
}

inline SegmentationMask mask_from_mat(const cv::Mat& m) {
  Grid<std::uint8_t> grid(m.rows, m.cols, std::uint8_t{0});
  for (int r = 0; r < m.rows; ++r) {
    for (int c = 0; c < m.cols; ++c) {
      grid.at(r, c) = m.at<std::uint8_t>(r, c) >= 128 ? 1 : 0;
    }
  }
  return SegmentationMask::from_grid(std::move(grid));
}

/// Resamples an image and its masks to target x target: bilinear for the image,
/// nearest-neighbor for the masks so they stay binary. Aspect distortion on
/// non-square inputs is accepted. Density maps must be generated after this step.
inline std::pair<cv::Mat, std::vector<SegmentationMask>> regularize_image(
    const cv::Mat& image, const std::vector<SegmentationMask>& masks, int target) {
  if (target < 8) throw std::invalid_argument("regularize_image: target must be >= 8");
  if (image.empty() || image.type() != CV_8UC3) {
    throw ValidationError("regularize_image: expected an 8-bit RGB image");
  }
  if (image.rows == target && image.cols == target) {
    return {image.clone(), masks};
  }
  cv::Mat resized;
  cv::resize(image, resized, cv::Size(target, target), 0, 0, cv::INTER_LINEAR);
  std::vector<SegmentationMask> out;
  out.reserve(masks.size());
  for (const SegmentationMask& mask : masks) {
    cv::Mat m = mask_to_mat(mask);
    cv::Mat rm;
    cv::resize(m, rm, cv::Size(target, target), 0, 0, cv::INTER_NEAREST);
    out.push_back(mask_from_mat(rm));
  }
  return {resized, std::move(out)};
}

inline void save_visualization_png(const std::filesystem::path& path,
                                   const Grid<std::uint8_t>& rendered) {
  cv::Mat m(rendered.height(), rendered.width(), CV_8UC1);
  for (int r = 0; r < rendered.height(); ++r) {
    for (int c = 0; c < rendered.width(); ++c) {
      m.at<std::uint8_t>(r, c) = rendered.at(r, c);
    }
  }
  if (!cv::imwrite(path.string(), m)) {
    throw std::runtime_error("save_visualization_png: write failed for " + path.string());
  }
}

/// Same axis convention as the grid flip: horizontal mirrors columns.
inline cv::Mat flip_image(const cv::Mat& image, FlipAxis axis) {
  cv::Mat out;
  cv::flip(image, out, axis == FlipAxis::kHorizontal ? 1 : 0);
  return out;
}

}  // namespace calmap
