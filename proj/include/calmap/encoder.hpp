#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <opencv2/core.hpp>
#include <torch/torch.h>

#include "calmap/checkpoint.hpp"
#include "calmap/errors.hpp"
#include "calmap/networks.hpp"
#include "calmap/normalize.hpp"
#include "calmap/occasion.hpp"
#include "calmap/seeds.hpp"

namespace calmap {

/// Training setup for the image-to-density-map conditional GAN.
struct EncoderConfig {
  int image_size = 256;          // square, power of two >= 32; generator depth adapts
  int epochs = 200;
  int batch_size = 1;
  double learning_rate = 2e-4;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  double l1_weight = 100.0;      // lambda on the reconstruction term
  double density_norm_k = 0.0;   // kCal per pixel; 0 derives K from the training maps
  std::uint64_t seed = 0;
  int gen_base_channels = 64;
  int disc_base_channels = 64;
  int threads = 0;               // 0 keeps the library default; 1 gives deterministic runs
  std::string device = "cpu";    // honors the CALMAP_DEVICE environment variable in the CLI
  int checkpoint_interval = 0;   // epochs between periodic saves; 0 saves only on request
  std::string checkpoint_path;   // empty disables persistence during training

  void validate() const {
    if (image_size < 32 || (image_size & (image_size - 1)) != 0) {
      throw std::invalid_argument("EncoderConfig: image_size must be a power of two >= 32");
    }
    if (epochs < 0) throw std::invalid_argument("EncoderConfig: epochs must be >= 0");
    if (batch_size < 1) throw std::invalid_argument("EncoderConfig: batch_size must be >= 1");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("EncoderConfig: learning_rate must be > 0");
    if (!(adam_beta1 > 0.0) || !(adam_beta2 > 0.0)) {
      throw std::invalid_argument("EncoderConfig: adam betas must be > 0");
    }
    if (!(l1_weight > 0.0)) throw std::invalid_argument("EncoderConfig: l1_weight must be > 0");
    if (density_norm_k < 0.0) throw std::invalid_argument("EncoderConfig: density_norm_k must be >= 0");
    if (gen_base_channels < 1 || disc_base_channels < 1) {
      throw std::invalid_argument("EncoderConfig: base channel counts must be >= 1");
    }
    if (threads < 0) throw std::invalid_argument("EncoderConfig: threads must be >= 0");
    if (checkpoint_interval < 0) {
      throw std::invalid_argument("EncoderConfig: checkpoint_interval must be >= 0");
    }
  }
};

/// One optimizer step's losses. loss_l1 is the unweighted mean absolute error in
/// normalized density space.
struct LossRecord {
  int epoch = 0;  // 1-based
  int step = 0;   // 1-based within the epoch
  double loss_adv_g = 0.0;
  double loss_l1 = 0.0;
  double loss_d = 0.0;
};

/// Image to generator input: float32 [3, H, W] ranged to [-1, 1].
inline torch::Tensor image_to_tensor(const cv::Mat& rgb) {
  if (rgb.empty() || rgb.type() != CV_8UC3) {
    throw ValidationError("image_to_tensor: expected an 8-bit RGB image");
  }
  torch::Tensor t = torch::empty({3, rgb.rows, rgb.cols}, torch::kFloat32);
  auto acc = t.accessor<float, 3>();
  for (int r = 0; r < rgb.rows; ++r) {
    for (int c = 0; c < rgb.cols; ++c) {
      const cv::Vec3b px = rgb.at<cv::Vec3b>(r, c);
      for (int ch = 0; ch < 3; ++ch) {
        acc[ch][r][c] = static_cast<float>(px[ch]) / 127.5f - 1.0f;
      }
    }
  }
  return t;
}

/// Density map to generator target: float32 [1, H, W] in [0, 1] after dividing by K.
inline torch::Tensor density_to_unit_tensor(const DensityMap& map, double k) {
  const Grid<float> unit = normalize_density(map, k);
  torch::Tensor t = torch::empty({1, map.height(), map.width()}, torch::kFloat32);
  auto acc = t.accessor<float, 3>();
  for (int r = 0; r < map.height(); ++r) {
    for (int c = 0; c < map.width(); ++c) acc[0][r][c] = unit.at(r, c);
  }
  return t;
}

/// Generator output back to a density map: multiplied by K and clamped at zero.
inline DensityMap unit_tensor_to_density(const torch::Tensor& unit, double k) {
  torch::Tensor t = unit.detach().to(torch::kCPU).to(torch::kFloat32).squeeze();
  if (t.dim() != 2) throw ShapeMismatch("unit_tensor_to_density: expected a single-channel map");
  if (!torch::isfinite(t).all().item<bool>()) {
    throw DivergenceError("unit_tensor_to_density: generator output is not finite");
  }
  Grid<float> unit_grid(static_cast<int>(t.size(0)), static_cast<int>(t.size(1)), 0.0f);
  auto acc = t.accessor<float, 2>();
  for (int r = 0; r < unit_grid.height(); ++r) {
    for (int c = 0; c < unit_grid.width(); ++c) {
      unit_grid.at(r, c) = std::max(acc[r][c], 0.0f);
    }
  }
  return denormalize_density(unit_grid, k);
}

/// The trained image-to-density-map model: skip-connected generator, patch
/// discriminator, the normalization constant K, and the per-step loss history.
class EncoderModel {
 public:
  explicit EncoderModel(EncoderConfig config) : config_(std::move(config)) {
    config_.validate();
    torch::manual_seed(derive_seed(config_.seed, "encoder-init"));
    generator_ = UnetGenerator(3, 1, config_.image_size, config_.gen_base_channels);
    discriminator_ = PatchDiscriminator(4, config_.disc_base_channels);
    generator_->eval();
    discriminator_->eval();
    k_ = config_.density_norm_k > 0.0 ? config_.density_norm_k : 1.0;
  }

  const EncoderConfig& config() const { return config_; }
  double k() const { return k_; }
  int epochs_completed() const { return epochs_completed_; }
  const std::vector<LossRecord>& history() const { return history_; }

  UnetGenerator& generator() { return generator_; }
  PatchDiscriminator& discriminator() { return discriminator_; }
  const UnetGenerator& generator() const { return generator_; }

  /// Deterministic inference: the generator output denormalized by K. Always
  /// finite and in [0, K].
  DensityMap predict(const cv::Mat& image_rgb) const {
    if (image_rgb.empty() || image_rgb.type() != CV_8UC3 ||
        image_rgb.rows != config_.image_size || image_rgb.cols != config_.image_size) {
      throw ShapeMismatch("EncoderModel::predict: expected an 8-bit RGB " +
                          std::to_string(config_.image_size) + "x" +
                          std::to_string(config_.image_size) + " image");
    }
    torch::NoGradGuard guard;
    torch::Tensor input = image_to_tensor(image_rgb).unsqueeze(0);
    torch::Tensor output = generator_->forward(input);
    return unit_tensor_to_density(output, k_);
  }

  void save(const std::filesystem::path& path) const {
    ArchiveWriter writer;
    auto& meta = writer.meta();
    meta["kind"] = "encoder";
    meta["config"] = config_json();
    meta["k"] = k_;
    meta["epochs_completed"] = epochs_completed_;
    writer.add_tensor("loss_history", history_tensor());
    write_module_tensors(writer, "g", *generator_);
    write_module_tensors(writer, "d", *discriminator_);
    writer.write(path);
  }

  static EncoderModel load(const std::filesystem::path& path) {
    Archive archive = Archive::read(path);
    if (archive.meta().value("kind", std::string{}) != "encoder") {
      throw ParseError("EncoderModel::load: " + path.string() + " is not an encoder checkpoint");
    }
    EncoderModel model(config_from_json(archive.meta().at("config")));
    model.k_ = archive.meta().at("k").get<double>();
    model.epochs_completed_ = archive.meta().at("epochs_completed").get<int>();
    read_module_tensors(archive, "g", *model.generator_);
    read_module_tensors(archive, "d", *model.discriminator_);
    torch::Tensor hist = archive.tensor("loss_history");
    auto acc = hist.accessor<double, 2>();
    for (std::int64_t i = 0; i < hist.size(0); ++i) {
      model.history_.push_back(LossRecord{static_cast<int>(acc[i][0]), static_cast<int>(acc[i][1]),
                                          acc[i][2], acc[i][3], acc[i][4]});
    }
    return model;
  }

  friend EncoderModel train_encoder(const EncoderConfig&, const std::vector<EatingOccasion>&);

 private:
  nlohmann::ordered_json config_json() const {
    nlohmann::ordered_json j;
    j["image_size"] = config_.image_size;
    j["epochs"] = config_.epochs;
    j["batch_size"] = config_.batch_size;
    j["learning_rate"] = config_.learning_rate;
    j["adam_beta1"] = config_.adam_beta1;
    j["adam_beta2"] = config_.adam_beta2;
    j["l1_weight"] = config_.l1_weight;
    j["density_norm_k"] = config_.density_norm_k;
    j["seed"] = config_.seed;
    j["gen_base_channels"] = config_.gen_base_channels;
    j["disc_base_channels"] = config_.disc_base_channels;
    j["threads"] = config_.threads;
    j["device"] = config_.device;
    j["checkpoint_interval"] = config_.checkpoint_interval;
    j["checkpoint_path"] = config_.checkpoint_path;
    return j;
  }

  static EncoderConfig config_from_json(const nlohmann::json& j) {
    EncoderConfig c;
    c.image_size = j.at("image_size").get<int>();
    c.epochs = j.at("epochs").get<int>();
    c.batch_size = j.at("batch_size").get<int>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.adam_beta1 = j.at("adam_beta1").get<double>();
    c.adam_beta2 = j.at("adam_beta2").get<double>();
    c.l1_weight = j.at("l1_weight").get<double>();
    c.density_norm_k = j.at("density_norm_k").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.gen_base_channels = j.at("gen_base_channels").get<int>();
    c.disc_base_channels = j.at("disc_base_channels").get<int>();
    c.threads = j.at("threads").get<int>();
    c.device = j.at("device").get<std::string>();
    c.checkpoint_interval = j.at("checkpoint_interval").get<int>();
    c.checkpoint_path = j.at("checkpoint_path").get<std::string>();
    return c;
  }

  torch::Tensor history_tensor() const {
    torch::Tensor t = torch::empty({static_cast<std::int64_t>(history_.size()), 5}, torch::kFloat64);
    auto acc = t.accessor<double, 2>();
    for (std::size_t i = 0; i < history_.size(); ++i) {
      acc[i][0] = history_[i].epoch;
      acc[i][1] = history_[i].step;
      acc[i][2] = history_[i].loss_adv_g;
      acc[i][3] = history_[i].loss_l1;
      acc[i][4] = history_[i].loss_d;
    }
    return t;
  }

  EncoderConfig config_;
  mutable UnetGenerator generator_{nullptr};
  mutable PatchDiscriminator discriminator_{nullptr};
  double k_ = 1.0;
  int epochs_completed_ = 0;
  std::vector<LossRecord> history_;
};

/// Trains the conditional GAN on image/density-map pairs. The caller supplies the
/// training partition, already four-fold augmented when the protocol asks for it.
/// The generator objective is the adversarial term plus l1_weight times the L1
/// distance to the K-normalized ground-truth map; the discriminator sees the
/// image stacked with a real or generated map.
inline EncoderModel train_encoder(const EncoderConfig& config,
                                  const std::vector<EatingOccasion>& train_occasions) {
  config.validate();
  if (train_occasions.empty()) {
    throw std::invalid_argument("train_encoder: need at least one training occasion");
  }
  if (config.threads > 0) {
    at::set_num_threads(config.threads);
  }
  const torch::Device device(config.device);

  // ground-truth maps and K before any parameter exists
  std::vector<DensityMap> truth_maps;
  truth_maps.reserve(train_occasions.size());
  for (const EatingOccasion& occ : train_occasions) {
    if (occ.image.rows != config.image_size || occ.image.cols != config.image_size) {
      throw ShapeMismatch("train_encoder: occasion '" + occ.id + "' is " +
                          std::to_string(occ.image.rows) + "x" + std::to_string(occ.image.cols) +
                          ", expected " + std::to_string(config.image_size));
    }
    truth_maps.push_back(occasion_density(occ));
  }
  double k = config.density_norm_k;
  if (k <= 0.0) {
    k = max_cell_density(truth_maps);
    if (k <= 0.0) k = 1.0;
  }

  EncoderModel model(config);
  model.k_ = k;
  if (config.epochs == 0) return model;

  auto& generator = *model.generator_;
  auto& discriminator = *model.discriminator_;
  generator.to(device);
  discriminator.to(device);
  generator.train();
  discriminator.train();

  torch::optim::Adam opt_g(generator.parameters(),
                           torch::optim::AdamOptions(config.learning_rate)
                               .betas({config.adam_beta1, config.adam_beta2}));
  torch::optim::Adam opt_d(discriminator.parameters(),
                           torch::optim::AdamOptions(config.learning_rate)
                               .betas({config.adam_beta1, config.adam_beta2}));

  const std::size_t n = train_occasions.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 shuffle_rng(derive_seed(config.seed, "encoder-shuffle"));

  namespace F = torch::nn::functional;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = n - 1; i > 0; --i) {
      std::swap(order[i], order[uniform_below(shuffle_rng, i + 1)]);
    }
    int step = 0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t end = std::min(n, start + static_cast<std::size_t>(config.batch_size));
      std::vector<torch::Tensor> images, targets;
      for (std::size_t i = start; i < end; ++i) {
        const EatingOccasion& occ = train_occasions[order[i]];
        images.push_back(image_to_tensor(occ.image));
        targets.push_back(density_to_unit_tensor(truth_maps[order[i]], k));
      }
      torch::Tensor image = torch::stack(images).to(device);
      torch::Tensor target = torch::stack(targets).to(device);

      // discriminator: real pair up, generated pair down
      opt_d.zero_grad();
      torch::Tensor fake = generator.forward(image);
      torch::Tensor d_real = discriminator.forward(torch::cat({image, target}, 1));
      torch::Tensor d_fake = discriminator.forward(torch::cat({image, fake.detach()}, 1));
      torch::Tensor loss_d =
          0.5 * (F::binary_cross_entropy_with_logits(d_real, torch::ones_like(d_real)) +
                 F::binary_cross_entropy_with_logits(d_fake, torch::zeros_like(d_fake)));
      loss_d.backward();
      opt_d.step();

      // generator: fool the discriminator and stay close to the target map
      opt_g.zero_grad();
      torch::Tensor d_fake_for_g = discriminator.forward(torch::cat({image, fake}, 1));
      torch::Tensor loss_adv =
          F::binary_cross_entropy_with_logits(d_fake_for_g, torch::ones_like(d_fake_for_g));
      torch::Tensor loss_l1 = torch::l1_loss(fake, target);
      torch::Tensor loss_g = loss_adv + config.l1_weight * loss_l1;
      loss_g.backward();
      opt_g.step();

      LossRecord rec;
      rec.epoch = epoch;
      rec.step = ++step;
      rec.loss_adv_g = loss_adv.item<double>();
      rec.loss_l1 = loss_l1.item<double>();
      rec.loss_d = loss_d.item<double>();
      if (!std::isfinite(rec.loss_adv_g) || !std::isfinite(rec.loss_l1) ||
          !std::isfinite(rec.loss_d)) {
        throw DivergenceError("train_encoder: non-finite loss at epoch " + std::to_string(epoch) +
                              " step " + std::to_string(step));
      }
      model.history_.push_back(rec);
    }
    model.epochs_completed_ = epoch;
    if (!config.checkpoint_path.empty() && config.checkpoint_interval > 0 &&
        epoch % config.checkpoint_interval == 0) {
      generator.to(torch::kCPU);
      discriminator.to(torch::kCPU);
      model.save(config.checkpoint_path);
      generator.to(device);
      discriminator.to(device);
    }
  }

  generator.to(torch::kCPU);
  discriminator.to(torch::kCPU);
  generator.eval();
  discriminator.eval();
  if (!config.checkpoint_path.empty()) model.save(config.checkpoint_path);
  return model;
}

/// Loss history as CSV: epoch,step,loss_adv_g,loss_l1,loss_d.
inline void export_loss_csv(const EncoderModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("export_loss_csv: cannot open " + path.string());
  out << "epoch,step,loss_adv_g,loss_l1,loss_d\n";
  out.precision(10);
  for (const LossRecord& rec : model.history()) {
    out << rec.epoch << ',' << rec.step << ',' << rec.loss_adv_g << ',' << rec.loss_l1 << ','
        << rec.loss_d << '\n';
  }
}

}  // namespace calmap
