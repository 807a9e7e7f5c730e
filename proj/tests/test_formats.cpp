#include <gtest/gtest.h>

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "calmap/density.hpp"
#include "calmap/dmap_io.hpp"
#include "calmap/image_io.hpp"
#include "calmap/seeds.hpp"

namespace {

using namespace calmap;
namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("calmap_fmt_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
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

DensityMap random_map(std::mt19937_64& rng, int h, int w) {
  Grid<float> cells(h, w, 0.0f);
  for (float& v : cells.cells()) {
    if (uniform_below(rng, 3) == 0) v = static_cast<float>(uniform_real(rng, 0.0, 7.0));
  }
  return DensityMap::from_grid(std::move(cells));
}

TEST(DmapIo, RoundTripIsBitExact) {
  TempDir dir;
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    DensityMap map = random_map(rng, 9 + trial, 17 - trial);
    const fs::path p = dir.path() / ("m" + std::to_string(trial) + ".dmap");
    write_dmap(p, map);
    EXPECT_EQ(read_dmap(p), map);
  }
}

TEST(DmapIo, HeaderCarriesDimensions) {
  TempDir dir;
  DensityMap map(3, 5);
  const fs::path p = dir.path() / "dims.dmap";
  write_dmap(p, map);
  std::ifstream in(p, std::ios::binary);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "DMAPv1 3 5");
}

TEST(DmapIo, RejectsBadMagic) {
  TempDir dir;
  const fs::path p = dir.path() / "bad.dmap";
  std::ofstream(p, std::ios::binary) << "DMAPv2 2 2\n\0\0\0\0";
  EXPECT_THROW(read_dmap(p), ParseError);
}

TEST(DmapIo, RejectsTruncatedPayload) {
  TempDir dir;
  DensityMap map(4, 4);
  const fs::path p = dir.path() / "trunc.dmap";
  write_dmap(p, map);
  fs::resize_file(p, fs::file_size(p) - 7);
  EXPECT_THROW(read_dmap(p), ParseError);
}

TEST(DmapIo, RejectsTrailingBytes) {
  TempDir dir;
  DensityMap map(2, 2);
  const fs::path p = dir.path() / "extra.dmap";
  write_dmap(p, map);
  std::ofstream(p, std::ios::binary | std::ios::app) << "x";
  EXPECT_THROW(read_dmap(p), ParseError);
}

TEST(DmapIo, RejectsNegativeCells) {
  TempDir dir;
  const fs::path p = dir.path() / "neg.dmap";
  {
    std::ofstream out(p, std::ios::binary);
    out << "DMAPv1 1 1\n";
    const float v = -1.0f;
    out.write(reinterpret_cast<const char*>(&v), 4);
  }
  EXPECT_THROW(read_dmap(p), ValidationError);
}

TEST(DmapIo, RejectsMissingFile) {
  EXPECT_THROW(read_dmap("/nonexistent/having.dmap"), ParseError);
}

TEST(MaskPng, RoundTrip) {
  TempDir dir;
  SegmentationMask mask(6, 4);
  mask.set_foreground(0, 0, true);
  mask.set_foreground(5, 3, true);
  mask.set_foreground(2, 2, true);
  const fs::path p = dir.path() / "mask.png";
  save_mask_png(p, mask);
  EXPECT_EQ(load_mask_png(p), mask);
}

TEST(MaskPng, RejectsIntermediateValues) {
  TempDir dir;
  cv::Mat raw(4, 4, CV_8UC1, cv::Scalar(0));
  raw.at<std::uint8_t>(1, 2) = 128;
  const fs::path p = dir.path() / "gray.png";
  cv::imwrite(p.string(), raw);
  EXPECT_THROW(load_mask_png(p), ValidationError);
}

TEST(MaskPng, RejectsMultiChannelFiles) {
  TempDir dir;
  cv::Mat raw(4, 4, CV_8UC3, cv::Scalar(255, 255, 255));
  const fs::path p = dir.path() / "color_mask.png";
  cv::imwrite(p.string(), raw);
  EXPECT_THROW(load_mask_png(p), ValidationError);
}

TEST(ImagePng, RoundTripPreservesPixels) {
  TempDir dir;
  cv::Mat rgb(5, 7, CV_8UC3);
  for (int r = 0; r < rgb.rows; ++r) {
    for (int c = 0; c < rgb.cols; ++c) {
      rgb.at<cv::Vec3b>(r, c) = cv::Vec3b(static_cast<std::uint8_t>(r * 40),
                                          static_cast<std::uint8_t>(c * 30), 200);
    }
  }
  const fs::path p = dir.path() / "img.png";
  save_image_png(p, rgb);
  cv::Mat back = load_image_png(p);
  EXPECT_EQ(cv::norm(back, rgb, cv::NORM_INF), 0.0);
}

TEST(Regularize, DownsamplesAndKeepsMasksBinary) {
  cv::Mat image(512, 512, CV_8UC3, cv::Scalar(10, 20, 30));
  SegmentationMask mask(512, 512);
  for (int r = 100; r < 220; ++r) {
    for (int c = 140; c < 300; ++c) mask.set_foreground(r, c, true);
  }
  auto [resized, masks] = regularize_image(image, {mask}, 256);
  EXPECT_EQ(resized.rows, 256);
  EXPECT_EQ(resized.cols, 256);
  ASSERT_EQ(masks.size(), 1u);
  EXPECT_EQ(masks[0].height(), 256);
  EXPECT_GT(masks[0].foreground_count(), 0);
}

TEST(Regularize, IdentityWhenAlreadyTargetSize) {
  cv::Mat image(256, 256, CV_8UC3, cv::Scalar(1, 2, 3));
  SegmentationMask mask(256, 256);
  mask.set_foreground(0, 0, true);
  auto [resized, masks] = regularize_image(image, {mask}, 256);
  EXPECT_EQ(cv::norm(resized, image, cv::NORM_INF), 0.0);
  EXPECT_EQ(masks[0], mask);
}

TEST(Regularize, SquaresNonSquareInputs) {
  cv::Mat image(300, 400, CV_8UC3, cv::Scalar(0, 0, 0));
  auto [resized, masks] = regularize_image(image, {}, 256);
  EXPECT_EQ(resized.rows, 256);
  EXPECT_EQ(resized.cols, 256);
  EXPECT_TRUE(masks.empty());
}

TEST(Regularize, PreservesDisjointness) {
  cv::Mat image(512, 512, CV_8UC3, cv::Scalar(0, 0, 0));
  SegmentationMask a(512, 512), b(512, 512);
  for (int r = 0; r < 512; ++r) {
    for (int c = 0; c < 256; ++c) a.set_foreground(r, c, true);
    for (int c = 256; c < 512; ++c) b.set_foreground(r, c, true);
  }
  auto [resized, masks] = regularize_image(image, {a, b}, 64);
  EXPECT_FALSE(masks[0].overlaps(masks[1]));
}

TEST(Regularize, RejectsTinyTargets) {
  cv::Mat image(32, 32, CV_8UC3, cv::Scalar(0, 0, 0));
  EXPECT_THROW(regularize_image(image, {}, 4), std::invalid_argument);
}

TEST(Visualization, WritesPng) {
  TempDir dir;
  DensityMap map(8, 8);
  map.set(3, 3, 2.0f);
  const fs::path p = dir.path() / "vis.png";
  save_visualization_png(p, render_visualization(map));
  cv::Mat back = cv::imread(p.string(), cv::IMREAD_UNCHANGED);
  ASSERT_FALSE(back.empty());
  EXPECT_EQ(back.channels(), 1);
  EXPECT_EQ(back.at<std::uint8_t>(3, 3), 255);
}

}  // namespace
