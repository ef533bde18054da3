#include "styleseg/nn/backbone.hpp"

#include <stdexcept>

namespace styleseg {

void BackboneConfig::validate() const {
  if (in_channels < 1) {
    throw std::invalid_argument("BackboneConfig: in_channels must be >= 1");
  }
  if (base_channels < 1) {
    throw std::invalid_argument("BackboneConfig: base_channels must be >= 1");
  }
  if (depth < 1 || depth > 6) {
    throw std::invalid_argument("BackboneConfig: depth outside [1, 6]");
  }
  if (convs_per_block < 1) {
    throw std::invalid_argument("BackboneConfig: convs_per_block must be >= 1");
  }
  if (bottleneck_dropout_p < 0.0 || bottleneck_dropout_p >= 1.0) {
    throw std::invalid_argument("BackboneConfig: dropout_p outside [0, 1)");
  }
  if (normalization != "none" && normalization != "batch") {
    throw std::invalid_argument("BackboneConfig: normalization must be 'none' or 'batch'");
  }
}

nlohmann::json BackboneConfig::to_json() const {
  return {{"in_channels", in_channels},
          {"base_channels", base_channels},
          {"depth", depth},
          {"convs_per_block", convs_per_block},
          {"bottleneck_dropout_p", bottleneck_dropout_p},
          {"normalization", normalization}};
}

BackboneConfig BackboneConfig::from_json(const nlohmann::json& j) {
  BackboneConfig c;
  c.in_channels = j.value("in_channels", c.in_channels);
  c.base_channels = j.value("base_channels", c.base_channels);
  c.depth = j.value("depth", c.depth);
  c.convs_per_block = j.value("convs_per_block", c.convs_per_block);
  c.bottleneck_dropout_p = j.value("bottleneck_dropout_p", c.bottleneck_dropout_p);
  c.normalization = j.value("normalization", c.normalization);
  c.validate();
  return c;
}

void check_spatial(const torch::Tensor& x, int depth) {
  if (x.dim() != 4) {
    throw std::invalid_argument("expected an N x C x H x W tensor");
  }
  const long factor = 1L << depth;
  if (x.size(2) % factor != 0 || x.size(3) % factor != 0) {
    throw std::invalid_argument(
        "spatial dimensions must be divisible by " + std::to_string(factor) +
        ", got " + std::to_string(x.size(2)) + "x" + std::to_string(x.size(3)));
  }
}

ConvBlockImpl::ConvBlockImpl(int in_channels, int out_channels, int convs,
                             const std::string& normalization) {
  seq_ = torch::nn::Sequential();
  int ch = in_channels;
  for (int i = 0; i < convs; ++i) {
    auto conv = torch::nn::Conv2d(
        torch::nn::Conv2dOptions(ch, out_channels, 3).padding(1));
    // He initialization with zero bias: the default torch init attenuates
    // activations roughly sqrt(6)x per layer, which buries both image and
    // style information under the bias terms by the bottleneck.
    torch::NoGradGuard no_grad;
    torch::nn::init::kaiming_normal_(conv->weight, 0.0, torch::kFanIn,
                                     torch::kReLU);
    torch::nn::init::zeros_(conv->bias);
    seq_->push_back(conv);
    if (normalization == "batch") {
      seq_->push_back(torch::nn::BatchNorm2d(out_channels));
    }
    seq_->push_back(torch::nn::ReLU());
    ch = out_channels;
  }
  register_module("seq", seq_);
}

torch::Tensor ConvBlockImpl::forward(torch::Tensor x) {
  return seq_->forward(std::move(x));
}

EncoderPathImpl::EncoderPathImpl(const BackboneConfig& config) {
  config.validate();
  depth_ = config.depth;
  int ch = config.in_channels;
  for (int level = 0; level < config.depth; ++level) {
    const int out = config.base_channels << level;
    blocks_.push_back(ConvBlock(ch, out, config.convs_per_block,
                                config.normalization));
    register_module("enc" + std::to_string(level), blocks_.back());
    ch = out;
  }
  code_dim_ = config.base_channels << config.depth;
  bottleneck_ = ConvBlock(ch, code_dim_, config.convs_per_block,
                          config.normalization);
  register_module("bottleneck", bottleneck_);
  dropout_ = torch::nn::Dropout(
      torch::nn::DropoutOptions(config.bottleneck_dropout_p));
  register_module("dropout", dropout_);
}

std::pair<torch::Tensor, std::vector<torch::Tensor>>
EncoderPathImpl::forward_with_skips(torch::Tensor x) {
  check_spatial(x, depth_);
  std::vector<torch::Tensor> skips;
  for (auto& block : blocks_) {
    x = block->forward(x);
    skips.push_back(x);
    x = torch::nn::functional::max_pool2d(
        x, torch::nn::functional::MaxPool2dFuncOptions(2));
  }
  x = dropout_->forward(bottleneck_->forward(x));
  return {x, skips};
}

torch::Tensor EncoderPathImpl::code(torch::Tensor x) {
  auto [bottleneck, skips] = forward_with_skips(std::move(x));
  return bottleneck.mean({2, 3});
}

UNetBackboneImpl::UNetBackboneImpl(const BackboneConfig& config)
    : config_(config) {
  config_.validate();
  encoder_ = EncoderPath(config_);
  register_module("encoder", encoder_);
  for (int level = config.depth - 1; level >= 0; --level) {
    const int skip_ch = config.base_channels << level;
    const int in_ch = (config.base_channels << (level + 1)) + skip_ch;
    decoder_blocks_.push_back(
        ConvBlock(in_ch, skip_ch, config.convs_per_block, config.normalization));
    register_module("dec" + std::to_string(level), decoder_blocks_.back());
  }
}

torch::Tensor UNetBackboneImpl::forward(torch::Tensor x) {
  auto [features, skips] = encoder_->forward_with_skips(std::move(x));
  for (std::size_t i = 0; i < decoder_blocks_.size(); ++i) {
    features = torch::nn::functional::interpolate(
        features, torch::nn::functional::InterpolateFuncOptions()
                      .scale_factor(std::vector<double>{2.0, 2.0})
                      .mode(torch::kBilinear)
                      .align_corners(false));
    const auto& skip = skips[skips.size() - 1 - i];
    features = decoder_blocks_[i]->forward(torch::cat({features, skip}, 1));
  }
  return features;
}

}  // namespace styleseg
