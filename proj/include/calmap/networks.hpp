#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <torch/torch.h>

namespace calmap {

inline void init_gan_weights(torch::nn::Module& module) {
  torch::NoGradGuard guard;
  if (auto* conv = module.as<torch::nn::Conv2d>()) {
    torch::nn::init::normal_(conv->weight, 0.0, 0.02);
    if (conv->options.bias()) torch::nn::init::constant_(conv->bias, 0.0);
  } else if (auto* tconv = module.as<torch::nn::ConvTranspose2d>()) {
    torch::nn::init::normal_(tconv->weight, 0.0, 0.02);
    if (tconv->options.bias()) torch::nn::init::constant_(tconv->bias, 0.0);
  } else if (auto* norm = module.as<torch::nn::InstanceNorm2d>()) {
    if (norm->options.affine()) {
      torch::nn::init::normal_(norm->weight, 1.0, 0.02);
      torch::nn::init::constant_(norm->bias, 0.0);
    }
  }
}

/// Downsample-by-two depth of the skip-connected generator for a given square
/// input size; the bottleneck always lands at 4 x 4.
inline int unet_depth_for(int image_size) {
  if (image_size < 16 || (image_size & (image_size - 1)) != 0) {
    throw std::invalid_argument("unet_depth_for: image_size must be a power of two >= 16");
  }
  return static_cast<int>(std::log2(static_cast<double>(image_size))) - 2;
}

/// One U-Net level: strided 4x4 conv down, submodule, transposed 4x4 conv up,
/// with the input concatenated onto the upsampled result except at the outermost
/// level. Instance normalization throughout; the outermost up ends in a sigmoid
/// so outputs live in [0, 1].
class UnetBlockImpl : public torch::nn::Module {
 public:
  UnetBlockImpl(int outer_channels, int inner_channels, int input_channels,
                std::shared_ptr<UnetBlockImpl> submodule, bool outermost, bool innermost)
      : outermost_(outermost), innermost_(innermost), submodule_(std::move(submodule)) {
    down_conv_ = register_module(
        "down_conv", torch::nn::Conv2d(
                         torch::nn::Conv2dOptions(input_channels, inner_channels, 4).stride(2).padding(1)));
    if (!outermost_ && !innermost_) {
      down_norm_ = register_module(
          "down_norm",
          torch::nn::InstanceNorm2d(torch::nn::InstanceNorm2dOptions(inner_channels).affine(true)));
    }
    const int up_in = innermost_ ? inner_channels : inner_channels * 2;
    up_conv_ = register_module(
        "up_conv", torch::nn::ConvTranspose2d(
                       torch::nn::ConvTranspose2dOptions(up_in, outer_channels, 4).stride(2).padding(1)));
    if (!outermost_) {
      up_norm_ = register_module(
          "up_norm",
          torch::nn::InstanceNorm2d(torch::nn::InstanceNorm2dOptions(outer_channels).affine(true)));
    }
    if (submodule_) register_module("sub", submodule_);
  }

  torch::Tensor forward(torch::Tensor x) {
    torch::Tensor h = x;
    if (!outermost_) h = torch::leaky_relu(h, 0.2);
    h = down_conv_(h);
    if (down_norm_) h = down_norm_(h);
    if (submodule_) h = submodule_->forward(h);
    h = torch::relu(h);
    h = up_conv_(h);
    if (outermost_) return torch::sigmoid(h);
    h = up_norm_(h);
    return torch::cat({x, h}, 1);
  }

 private:
  bool outermost_;
  bool innermost_;
  std::shared_ptr<UnetBlockImpl> submodule_;
  torch::nn::Conv2d down_conv_{nullptr};
  torch::nn::InstanceNorm2d down_norm_{nullptr};
  torch::nn::ConvTranspose2d up_conv_{nullptr};
  torch::nn::InstanceNorm2d up_norm_{nullptr};
};

class UnetGeneratorImpl : public torch::nn::Module {
 public:
  UnetGeneratorImpl(int in_channels, int out_channels, int image_size, int base_channels) {
    const int depth = unet_depth_for(image_size);
    std::vector<int> ch(depth);
    for (int i = 0; i < depth; ++i) ch[i] = base_channels * std::min(1 << i, 8);

    auto block = std::make_shared<UnetBlockImpl>(ch[depth - 2], ch[depth - 1], ch[depth - 2],
                                                 nullptr, false, true);
    for (int i = depth - 2; i >= 1; --i) {
      block = std::make_shared<UnetBlockImpl>(ch[i - 1], ch[i], ch[i - 1], std::move(block), false,
                                              false);
    }
    root_ = std::make_shared<UnetBlockImpl>(out_channels, ch[0], in_channels, std::move(block),
                                            true, false);
    register_module("unet", root_);
    apply(init_gan_weights);
  }

  torch::Tensor forward(torch::Tensor x) { return root_->forward(x); }

 private:
  std::shared_ptr<UnetBlockImpl> root_;
};
TORCH_MODULE(UnetGenerator);

/// Patch-level conditional discriminator over (image, map) channel stacks:
/// three stride-2 convolutions, two stride-1, logits per patch.
class PatchDiscriminatorImpl : public torch::nn::Module {
 public:
  PatchDiscriminatorImpl(int in_channels, int base_channels, int n_layers = 3) {
    using namespace torch::nn;
    seq_->push_back(Conv2d(Conv2dOptions(in_channels, base_channels, 4).stride(2).padding(1)));
    seq_->push_back(LeakyReLU(LeakyReLUOptions().negative_slope(0.2)));
    int mult = 1;
    for (int n = 1; n < n_layers; ++n) {
      const int prev = mult;
      mult = std::min(1 << n, 8);
      seq_->push_back(Conv2d(
          Conv2dOptions(base_channels * prev, base_channels * mult, 4).stride(2).padding(1)));
      seq_->push_back(InstanceNorm2d(InstanceNorm2dOptions(base_channels * mult).affine(true)));
      seq_->push_back(LeakyReLU(LeakyReLUOptions().negative_slope(0.2)));
    }
    const int prev = mult;
    mult = std::min(1 << n_layers, 8);
    seq_->push_back(
        Conv2d(Conv2dOptions(base_channels * prev, base_channels * mult, 4).stride(1).padding(1)));
    seq_->push_back(InstanceNorm2d(InstanceNorm2dOptions(base_channels * mult).affine(true)));
    seq_->push_back(LeakyReLU(LeakyReLUOptions().negative_slope(0.2)));
    seq_->push_back(Conv2d(Conv2dOptions(base_channels * mult, 1, 4).stride(1).padding(1)));
    register_module("seq", seq_);
    apply(init_gan_weights);
  }

  torch::Tensor forward(torch::Tensor x) { return seq_->forward(x); }

 private:
  torch::nn::Sequential seq_;
};
TORCH_MODULE(PatchDiscriminator);

/// Common surface of the regression decoder backbones: 3-channel input,
/// one scalar per sample out, plus access to the output head for bias priming.
class ScalarRegressorImpl : public torch::nn::Module {
 public:
  ~ScalarRegressorImpl() override = default;
  virtual torch::Tensor forward(torch::Tensor x) = 0;
  virtual torch::nn::Linear head() = 0;
};

namespace detail {

class BasicBlockImpl : public torch::nn::Module {
 public:
  static constexpr int kExpansion = 1;

  BasicBlockImpl(int in_channels, int channels, int stride) {
    using namespace torch::nn;
    conv1_ = register_module("conv1", Conv2d(Conv2dOptions(in_channels, channels, 3)
                                                 .stride(stride).padding(1).bias(false)));
    bn1_ = register_module("bn1", BatchNorm2d(channels));
    conv2_ = register_module("conv2",
                             Conv2d(Conv2dOptions(channels, channels, 3).padding(1).bias(false)));
    bn2_ = register_module("bn2", BatchNorm2d(channels));
    if (stride != 1 || in_channels != channels) {
      shortcut_ = Sequential(Conv2d(Conv2dOptions(in_channels, channels, 1).stride(stride).bias(false)),
                             BatchNorm2d(channels));
      register_module("shortcut", shortcut_);
    }
  }

  torch::Tensor forward(torch::Tensor x) {
    auto out = torch::relu(bn1_(conv1_(x)));
    out = bn2_(conv2_(out));
    out = out + (shortcut_ ? shortcut_->forward(x) : x);
    return torch::relu(out);
  }

 private:
  torch::nn::Conv2d conv1_{nullptr}, conv2_{nullptr};
  torch::nn::BatchNorm2d bn1_{nullptr}, bn2_{nullptr};
  torch::nn::Sequential shortcut_{nullptr};
};

class BottleneckImpl : public torch::nn::Module {
 public:
  static constexpr int kExpansion = 4;

  BottleneckImpl(int in_channels, int channels, int stride) {
    using namespace torch::nn;
    conv1_ = register_module("conv1",
                             Conv2d(Conv2dOptions(in_channels, channels, 1).bias(false)));
    bn1_ = register_module("bn1", BatchNorm2d(channels));
    conv2_ = register_module("conv2", Conv2d(Conv2dOptions(channels, channels, 3)
                                                 .stride(stride).padding(1).bias(false)));
    bn2_ = register_module("bn2", BatchNorm2d(channels));
    conv3_ = register_module(
        "conv3", Conv2d(Conv2dOptions(channels, channels * kExpansion, 1).bias(false)));
    bn3_ = register_module("bn3", BatchNorm2d(channels * kExpansion));
    if (stride != 1 || in_channels != channels * kExpansion) {
      shortcut_ = Sequential(
          Conv2d(Conv2dOptions(in_channels, channels * kExpansion, 1).stride(stride).bias(false)),
          BatchNorm2d(channels * kExpansion));
      register_module("shortcut", shortcut_);
    }
  }

  torch::Tensor forward(torch::Tensor x) {
    auto out = torch::relu(bn1_(conv1_(x)));
    out = torch::relu(bn2_(conv2_(out)));
    out = bn3_(conv3_(out));
    out = out + (shortcut_ ? shortcut_->forward(x) : x);
    return torch::relu(out);
  }

 private:
  torch::nn::Conv2d conv1_{nullptr}, conv2_{nullptr}, conv3_{nullptr};
  torch::nn::BatchNorm2d bn1_{nullptr}, bn2_{nullptr}, bn3_{nullptr};
  torch::nn::Sequential shortcut_{nullptr};
};

}  // namespace detail

/// Residual backbone with a global-average-pooled scalar head. base_width 64
/// gives the standard 18/50 layouts; smaller widths keep the same topology.
class ResNetRegressorImpl : public ScalarRegressorImpl {
 public:
  ResNetRegressorImpl(const std::vector<int>& stage_blocks, bool bottleneck, int base_width) {
    using namespace torch::nn;
    stem_conv_ = register_module("stem_conv", Conv2d(Conv2dOptions(3, base_width, 7)
                                                         .stride(2).padding(3).bias(false)));
    stem_bn_ = register_module("stem_bn", BatchNorm2d(base_width));
    const int expansion = bottleneck ? detail::BottleneckImpl::kExpansion
                                     : detail::BasicBlockImpl::kExpansion;
    int in_channels = base_width;
    for (std::size_t stage = 0; stage < stage_blocks.size(); ++stage) {
      const int channels = base_width << stage;
      Sequential seq;
      for (int b = 0; b < stage_blocks[stage]; ++b) {
        const int stride = (b == 0 && stage > 0) ? 2 : 1;
        if (bottleneck) {
          seq->push_back(detail::BottleneckImpl(in_channels, channels, stride));
        } else {
          seq->push_back(detail::BasicBlockImpl(in_channels, channels, stride));
        }
        in_channels = channels * expansion;
      }
      stages_.push_back(register_module("stage" + std::to_string(stage), seq));
    }
    head_ = register_module("head", Linear(in_channels, 1));
  }

  torch::Tensor forward(torch::Tensor x) override {
    x = torch::max_pool2d(torch::relu(stem_bn_(stem_conv_(x))), 3, 2, 1);
    for (auto& stage : stages_) x = stage->forward(x);
    x = torch::adaptive_avg_pool2d(x, {1, 1}).flatten(1);
    return head_(x);
  }

  torch::nn::Linear head() override { return head_; }

 private:
  torch::nn::Conv2d stem_conv_{nullptr};
  torch::nn::BatchNorm2d stem_bn_{nullptr};
  std::vector<torch::nn::Sequential> stages_;
  torch::nn::Linear head_{nullptr};
};

/// VGG16-layout conv stack (plain conv+ReLU, as in the original network) with a
/// global-average-pooled scalar head in place of the fully connected stack.
class VggRegressorImpl : public ScalarRegressorImpl {
 public:
  explicit VggRegressorImpl(int base_width) {
    using namespace torch::nn;
    const int w = base_width;
    const std::vector<int> cfg = {w,     w,     -1, 2 * w, 2 * w, -1, 4 * w, 4 * w, 4 * w,
                                  -1,    8 * w, 8 * w, 8 * w, -1, 8 * w, 8 * w, 8 * w, -1};
    int in_channels = 3;
    for (int spec : cfg) {
      if (spec < 0) {
        features_->push_back(MaxPool2d(MaxPool2dOptions(2).stride(2)));
      } else {
        features_->push_back(Conv2d(Conv2dOptions(in_channels, spec, 3).padding(1)));
        features_->push_back(ReLU(ReLUOptions().inplace(true)));
        in_channels = spec;
      }
    }
    register_module("features", features_);
    head_ = register_module("head", Linear(in_channels, 1));
  }

  torch::Tensor forward(torch::Tensor x) override {
    x = features_->forward(x);
    x = torch::adaptive_avg_pool2d(x, {1, 1}).flatten(1);
    return head_(x);
  }

  torch::nn::Linear head() override { return head_; }

 private:
  torch::nn::Sequential features_;
  torch::nn::Linear head_{nullptr};
};

inline std::shared_ptr<ScalarRegressorImpl> make_vgg16_regressor(int base_width = 64) {
  return std::make_shared<VggRegressorImpl>(base_width);
}

inline std::shared_ptr<ScalarRegressorImpl> make_resnet18_regressor(int base_width = 64) {
  return std::make_shared<ResNetRegressorImpl>(std::vector<int>{2, 2, 2, 2}, false, base_width);
}

inline std::shared_ptr<ScalarRegressorImpl> make_resnet50_regressor(int base_width = 64) {
  return std::make_shared<ResNetRegressorImpl>(std::vector<int>{3, 4, 6, 3}, true, base_width);
}

}  // namespace calmap
