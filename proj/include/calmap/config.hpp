#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "calmap/decoder.hpp"
#include "calmap/encoder.hpp"
#include "calmap/split.hpp"

namespace calmap {

struct DatasetConfig {
  std::uint64_t seed = 0;  // master seed; components derive their own streams
  int image_size = 256;
  SplitRatios ratios;
  bool augment_training = true;
};

struct EvalRunsConfig {
  int runs = 5;
  bool figures = false;
  int panel_count = 3;  // extremes rendered per side when figures are on
};

/// Everything one experiment needs: paths plus the per-stage configurations.
/// Defaults mirror the published training protocol (200 epochs, batch 1,
/// learning rate 2e-4 for the encoder; 50 epochs with patience 20 for the
/// regression decoders; a 70/10/20 split).
struct PipelineConfig {
  std::filesystem::path manifest;
  std::filesystem::path output_dir;
  std::filesystem::path encoder_checkpoint;
  std::filesystem::path decoder_checkpoint;
  DatasetConfig dataset;
  EncoderConfig encoder;
  RegressionDecoderConfig decoder;
  EvalRunsConfig eval;
};

}  // namespace calmap
