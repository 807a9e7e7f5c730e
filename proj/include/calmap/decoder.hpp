#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <torch/torch.h>

#include "calmap/checkpoint.hpp"
#include "calmap/density.hpp"
#include "calmap/encoder.hpp"
#include "calmap/errors.hpp"
#include "calmap/networks.hpp"
#include "calmap/occasion.hpp"
#include "calmap/seeds.hpp"

namespace calmap {

enum class DecoderKind { kSummation, kVgg16, kResnet18, kResnet50 };

inline std::string to_string(DecoderKind kind) {
  switch (kind) {
    case DecoderKind::kSummation: return "summation";
    case DecoderKind::kVgg16: return "vgg16";
    case DecoderKind::kResnet18: return "resnet18";
    case DecoderKind::kResnet50: return "resnet50";
  }
  return "unknown";
}

inline DecoderKind decoder_kind_from_string(const std::string& name) {
  if (name == "summation") return DecoderKind::kSummation;
  if (name == "vgg16") return DecoderKind::kVgg16;
  if (name == "resnet18") return DecoderKind::kResnet18;
  if (name == "resnet50") return DecoderKind::kResnet50;
  throw std::invalid_argument("decoder_kind_from_string: unknown decoder kind '" + name + "'");
}

/// Stops when the validation loss has not improved for `patience` epochs; the
/// caller restores the parameters recorded at the best epoch.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience) : patience_(patience) {
    if (patience < 1) throw std::invalid_argument("EarlyStopping: patience must be >= 1");
  }

  /// Feed one epoch's validation loss; returns true when training should stop.
  bool observe(int epoch, double val_loss) {
    if (val_loss < best_loss_) {
      best_loss_ = val_loss;
      best_epoch_ = epoch;
      return false;
    }
    return epoch - best_epoch_ >= patience_;
  }

  int best_epoch() const { return best_epoch_; }
  double best_loss() const { return best_loss_; }

 private:
  int patience_;
  double best_loss_ = std::numeric_limits<double>::infinity();
  int best_epoch_ = 0;
};

struct RegressionDecoderConfig {
  DecoderKind backbone = DecoderKind::kResnet18;
  bool pretrained = false;             // warm start from external backbone weights
  std::string pretrained_weights;      // decoder checkpoint to initialize from
  int epochs = 50;
  int patience = 20;
  double learning_rate = 1e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  int batch_size = 16;
  int base_width = 64;
  std::uint64_t seed = 0;
  int threads = 0;
  std::string device = "cpu";

  void validate() const {
    if (backbone == DecoderKind::kSummation) {
      throw std::invalid_argument("RegressionDecoderConfig: backbone cannot be 'summation'");
    }
    if (epochs < 1) throw std::invalid_argument("RegressionDecoderConfig: epochs must be >= 1");
    if (patience < 1) throw std::invalid_argument("RegressionDecoderConfig: patience must be >= 1");
    if (!(learning_rate > 0.0)) {
      throw std::invalid_argument("RegressionDecoderConfig: learning_rate must be > 0");
    }
    if (batch_size < 1) throw std::invalid_argument("RegressionDecoderConfig: batch_size must be >= 1");
    if (base_width < 1) throw std::invalid_argument("RegressionDecoderConfig: base_width must be >= 1");
    if (pretrained && pretrained_weights.empty()) {
      throw std::invalid_argument(
          "RegressionDecoderConfig: pretrained requires pretrained_weights");
    }
  }
};

struct DecoderEpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;  // kCal
  double val_loss = 0.0;    // kCal
};

inline std::shared_ptr<ScalarRegressorImpl> make_regression_backbone(DecoderKind kind,
                                                                     int base_width) {
  switch (kind) {
    case DecoderKind::kVgg16: return make_vgg16_regressor(base_width);
    case DecoderKind::kResnet18: return make_resnet18_regressor(base_width);
    case DecoderKind::kResnet50: return make_resnet50_regressor(base_width);
    case DecoderKind::kSummation: break;
  }
  throw std::invalid_argument("make_regression_backbone: summation has no backbone");
}

/// Either the parameter-free summation decoder or a trained regression backbone.
/// Regression nets consume the single-channel map replicated to three channels
/// and emit kCal / target_scale, so decode() multiplies the head output back.
class DecoderModel {
 public:
  static DecoderModel summation() {
    DecoderModel m;
    m.kind_ = DecoderKind::kSummation;
    return m;
  }

  static DecoderModel regression(DecoderKind kind, int base_width, int map_size,
                                 double target_scale) {
    if (kind == DecoderKind::kSummation) {
      throw std::invalid_argument("DecoderModel::regression: kind cannot be 'summation'");
    }
    DecoderModel m;
    m.kind_ = kind;
    m.base_width_ = base_width;
    m.map_size_ = map_size;
    m.target_scale_ = target_scale;
    m.net_ = make_regression_backbone(kind, base_width);
    m.net_->eval();
    return m;
  }

  DecoderKind kind() const { return kind_; }
  int map_size() const { return map_size_; }
  double target_scale() const { return target_scale_; }
  int best_epoch() const { return best_epoch_; }
  const std::vector<DecoderEpochRecord>& history() const { return history_; }
  std::shared_ptr<ScalarRegressorImpl> net() { return net_; }

  /// kCal estimate for one map. The summation path is exactly
  /// summation_decode(); the regression path is one forward pass.
  double decode(const DensityMap& map) const {
    if (kind_ == DecoderKind::kSummation) return summation_decode(map);
    if (map.height() != map_size_ || map.width() != map_size_) {
      throw ShapeMismatch("DecoderModel::decode: map is " + std::to_string(map.height()) + "x" +
                          std::to_string(map.width()) + ", expected " + std::to_string(map_size_) +
                          "x" + std::to_string(map_size_));
    }
    torch::NoGradGuard guard;
    torch::Tensor input = map_to_input(map).unsqueeze(0);
    torch::Tensor out = net_->forward(input);
    return out.item<double>() * target_scale_;
  }

  /// Single-channel map replicated to the three-channel stem the backbones use.
  static torch::Tensor map_to_input(const DensityMap& map) {
    torch::Tensor t = torch::empty({1, map.height(), map.width()}, torch::kFloat32);
    auto acc = t.accessor<float, 3>();
    for (int r = 0; r < map.height(); ++r) {
      for (int c = 0; c < map.width(); ++c) acc[0][r][c] = map.at(r, c);
    }
    return t.repeat({3, 1, 1});
  }

  void save(const std::filesystem::path& path) const {
    ArchiveWriter writer;
    auto& meta = writer.meta();
    meta["kind"] = "decoder";
    meta["decoder_kind"] = calmap::to_string(kind_);
    meta["map_size"] = map_size_;
    meta["target_scale"] = target_scale_;
    meta["base_width"] = base_width_;
    meta["best_epoch"] = best_epoch_;
    torch::Tensor hist = torch::empty({static_cast<std::int64_t>(history_.size()), 3},
                                      torch::kFloat64);
    auto acc = hist.accessor<double, 2>();
    for (std::size_t i = 0; i < history_.size(); ++i) {
      acc[i][0] = history_[i].epoch;
      acc[i][1] = history_[i].train_loss;
      acc[i][2] = history_[i].val_loss;
    }
    writer.add_tensor("loss_history", hist);
    if (net_) write_module_tensors(writer, "net", *net_);
    writer.write(path);
  }

  static DecoderModel load(const std::filesystem::path& path) {
    Archive archive = Archive::read(path);
    if (archive.meta().value("kind", std::string{}) != "decoder") {
      throw ParseError("DecoderModel::load: " + path.string() + " is not a decoder checkpoint");
    }
    const DecoderKind kind =
        decoder_kind_from_string(archive.meta().at("decoder_kind").get<std::string>());
    DecoderModel m;
    if (kind == DecoderKind::kSummation) {
      m = summation();
    } else {
      m = regression(kind, archive.meta().at("base_width").get<int>(),
                     archive.meta().at("map_size").get<int>(),
                     archive.meta().at("target_scale").get<double>());
      read_module_tensors(archive, "net", *m.net_);
    }
    m.best_epoch_ = archive.meta().at("best_epoch").get<int>();
    torch::Tensor hist = archive.tensor("loss_history");
    auto acc = hist.accessor<double, 2>();
    for (std::int64_t i = 0; i < hist.size(0); ++i) {
      m.history_.push_back(DecoderEpochRecord{static_cast<int>(acc[i][0]), acc[i][1], acc[i][2]});
    }
    return m;
  }

  friend DecoderModel train_regression_decoder(const RegressionDecoderConfig&,
                                               const EncoderModel&,
                                               const std::vector<EatingOccasion>&,
                                               const std::vector<EatingOccasion>&);

 private:
  DecoderKind kind_ = DecoderKind::kSummation;
  std::shared_ptr<ScalarRegressorImpl> net_;
  double target_scale_ = 1.0;
  int map_size_ = 0;
  int base_width_ = 64;
  int best_epoch_ = 0;
  std::vector<DecoderEpochRecord> history_;
};

inline double decode(const DecoderModel& model, const DensityMap& map) {
  return model.decode(map);
}

namespace detail {

inline std::vector<torch::Tensor> snapshot_state(const torch::nn::Module& module) {
  torch::NoGradGuard guard;
  std::vector<torch::Tensor> state;
  for (const auto& p : module.parameters()) state.push_back(p.detach().clone());
  for (const auto& b : module.buffers()) state.push_back(b.detach().clone());
  return state;
}

inline void restore_state(torch::nn::Module& module, const std::vector<torch::Tensor>& state) {
  torch::NoGradGuard guard;
  std::size_t i = 0;
  for (auto& p : module.parameters()) p.copy_(state.at(i++));
  for (auto& b : module.buffers()) b.copy_(state.at(i++));
}

}  // namespace detail

/// Trains a regression decoder on (generated density map, true kCal) pairs from a
/// frozen encoder: maps are produced once up front by inference only, so the
/// encoder's parameters are never touched. L1 loss on kCal, Adam, early stopping
/// on the validation loss with best-epoch restoration.
inline DecoderModel train_regression_decoder(const RegressionDecoderConfig& config,
                                             const EncoderModel& encoder,
                                             const std::vector<EatingOccasion>& train_occasions,
                                             const std::vector<EatingOccasion>& val_occasions) {
  config.validate();
  if (train_occasions.empty()) {
    throw std::invalid_argument("train_regression_decoder: empty training set");
  }
  if (val_occasions.empty()) {
    throw std::invalid_argument("train_regression_decoder: validation split must be nonempty");
  }
  if (config.threads > 0) at::set_num_threads(config.threads);
  const torch::Device device(config.device);
  const int map_size = encoder.config().image_size;

  auto encode_set = [&](const std::vector<EatingOccasion>& occasions) {
    std::vector<std::pair<torch::Tensor, double>> pairs;
    pairs.reserve(occasions.size());
    for (const EatingOccasion& occ : occasions) {
      pairs.emplace_back(DecoderModel::map_to_input(encoder.predict(occ.image)),
                         occ.total_kcal());
    }
    return pairs;
  };
  const auto train_pairs = encode_set(train_occasions);
  const auto val_pairs = encode_set(val_occasions);

  double target_scale = 0.0;
  for (const auto& [input, kcal] : train_pairs) target_scale += kcal;
  target_scale /= static_cast<double>(train_pairs.size());
  if (!(target_scale > 0.0)) target_scale = 1.0;

  torch::manual_seed(derive_seed(config.seed, "decoder-init"));
  DecoderModel model =
      DecoderModel::regression(config.backbone, config.base_width, map_size, target_scale);
  auto net = model.net_;
  if (config.pretrained) {
    Archive warm = Archive::read(config.pretrained_weights);
    read_module_tensors(warm, "net", *net);
  } else {
    // start at the training-set mean so the head does not have to crawl up
    // three orders of magnitude under a small learning rate
    torch::NoGradGuard guard;
    torch::nn::init::constant_(net->head()->bias, 1.0);
  }
  net->to(device);

  torch::optim::Adam opt(net->parameters(), torch::optim::AdamOptions(config.learning_rate)
                                                .betas({config.adam_beta1, config.adam_beta2}));

  auto batch_of = [&](const std::vector<std::pair<torch::Tensor, double>>& pairs,
                      const std::vector<std::size_t>& idx, std::size_t start, std::size_t end) {
    std::vector<torch::Tensor> inputs;
    std::vector<double> targets;
    for (std::size_t i = start; i < end; ++i) {
      inputs.push_back(pairs[idx[i]].first);
      targets.push_back(pairs[idx[i]].second);
    }
    return std::make_pair(torch::stack(inputs).to(device),
                          torch::tensor(targets, torch::kFloat32).to(device));
  };

  auto validation_loss = [&]() {
    torch::NoGradGuard guard;
    net->eval();
    double total = 0.0;
    for (const auto& [input, kcal] : val_pairs) {
      const double pred =
          net->forward(input.unsqueeze(0).to(device)).item<double>() * target_scale;
      total += std::abs(pred - kcal);
    }
    return total / static_cast<double>(val_pairs.size());
  };

  std::vector<std::size_t> order(train_pairs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 shuffle_rng(derive_seed(config.seed, "decoder-shuffle"));

  EarlyStopping stopper(config.patience);
  std::vector<torch::Tensor> best_state = detail::snapshot_state(*net);
  int best_epoch = 0;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = order.size() - 1; i > 0; --i) {
      std::swap(order[i], order[uniform_below(shuffle_rng, i + 1)]);
    }
    net->train();
    double train_loss_sum = 0.0;
    int steps = 0;
    for (std::size_t start = 0; start < order.size(); ) {
      std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      if (order.size() - end == 1) {
        end = order.size();  // fold a trailing singleton in; batch norm needs > 1 value
      }
      auto [input, target_kcal] = batch_of(train_pairs, order, start, end);
      opt.zero_grad();
      torch::Tensor pred_kcal = net->forward(input).squeeze(1) * target_scale;
      torch::Tensor loss = torch::l1_loss(pred_kcal, target_kcal);
      loss.backward();
      opt.step();
      const double loss_value = loss.item<double>();
      if (!std::isfinite(loss_value)) {
        throw DivergenceError("train_regression_decoder: non-finite loss at epoch " +
                              std::to_string(epoch));
      }
      train_loss_sum += loss_value;
      ++steps;
      start = end;
    }

    const double val_loss = validation_loss();
    if (!std::isfinite(val_loss)) {
      throw DivergenceError("train_regression_decoder: non-finite validation loss at epoch " +
                            std::to_string(epoch));
    }
    model.history_.push_back(
        DecoderEpochRecord{epoch, train_loss_sum / std::max(steps, 1), val_loss});

    const bool stop = stopper.observe(epoch, val_loss);
    if (stopper.best_epoch() == epoch) {
      best_state = detail::snapshot_state(*net);
      best_epoch = epoch;
    }
    if (stop) break;
  }

  detail::restore_state(*net, best_state);
  net->to(torch::kCPU);
  net->eval();
  model.best_epoch_ = best_epoch;
  return model;
}

/// Decoder loss history as CSV: epoch,train_loss,val_loss.
inline void export_decoder_loss_csv(const DecoderModel& model,
                                    const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("export_decoder_loss_csv: cannot open " + path.string());
  out << "epoch,train_loss,val_loss\n";
  out.precision(10);
  for (const DecoderEpochRecord& rec : model.history()) {
    out << rec.epoch << ',' << rec.train_loss << ',' << rec.val_loss << '\n';
  }
}

}  // namespace calmap
