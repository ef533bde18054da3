#pragma once

#include <torch/torch.h>

#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace styleseg {

/// U-net layout: `depth` encoder blocks (channel-doubling from
/// base_channels), a bottleneck block with dropout at 1/2^depth resolution,
/// and matching bilinear-upsample decoder blocks with skip connections;
/// convs_per_block 3x3 same-padding conv + ReLU layers per block. The
/// reference layout is depth 4 with 3 convolutions; smaller depths exist for
/// tests on inputs below 16x16.
struct BackboneConfig {
  int in_channels = 1;
  int base_channels = 32;
  int depth = 4;
  int convs_per_block = 3;
  double bottleneck_dropout_p = 0.5;
  std::string normalization = "none";  // "none" | "batch"

  void validate() const;
  nlohmann::json to_json() const;
  static BackboneConfig from_json(const nlohmann::json& j);
  bool operator==(const BackboneConfig&) const = default;
};

/// Throws when H or W is not divisible by 2^depth.
void check_spatial(const torch::Tensor& x, int depth = 4);

/// convs_per_block x (3x3 conv, optional batch norm, ReLU).
class ConvBlockImpl : public torch::nn::Module {
 public:
  ConvBlockImpl(int in_channels, int out_channels, int convs,
                const std::string& normalization);
  torch::Tensor forward(torch::Tensor x);

 private:
  torch::nn::Sequential seq_{nullptr};
};
TORCH_MODULE(ConvBlock);

/// Contraction path: blocks at widths b, 2b, 4b, 8b with 2x2 max pooling,
/// then a 16b bottleneck block with dropout. Doubles as the encoder of the
/// latent-Gaussian nets via the pooled code vector.
class EncoderPathImpl : public torch::nn::Module {
 public:
  explicit EncoderPathImpl(const BackboneConfig& config);

  /// Bottleneck map (N x 16b x H/16 x W/16) plus per-level skip maps.
  std::pair<torch::Tensor, std::vector<torch::Tensor>> forward_with_skips(
      torch::Tensor x);

  /// Global-average-pooled bottleneck code, N x 16b.
  torch::Tensor code(torch::Tensor x);

  int code_dim() const { return code_dim_; }

 private:
  std::vector<ConvBlock> blocks_;
  ConvBlock bottleneck_{nullptr};
  torch::nn::Dropout dropout_{nullptr};
  int code_dim_ = 0;
  int depth_ = 4;
};
TORCH_MODULE(EncoderPath);

/// Full U-net g(x): encoder, bottleneck, decoder with skip concatenation.
/// Output keeps the input resolution with base_channels feature channels.
class UNetBackboneImpl : public torch::nn::Module {
 public:
  explicit UNetBackboneImpl(const BackboneConfig& config);
  torch::Tensor forward(torch::Tensor x);
  const BackboneConfig& config() const { return config_; }
  int feature_channels() const { return config_.base_channels; }

 private:
  BackboneConfig config_;
  EncoderPath encoder_{nullptr};
  std::vector<ConvBlock> decoder_blocks_;
};
TORCH_MODULE(UNetBackbone);

}  // namespace styleseg
