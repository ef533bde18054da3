#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <string>

#include "json.hpp"
#include "styleseg/core/types.hpp"
#include "styleseg/metrics/metrics.hpp"
#include "styleseg/nn/backbone.hpp"

namespace styleseg {

/// Axis-aligned Gaussian over the latent code, batched N x latent_dim.
struct DiagonalGaussian {
  torch::Tensor mean;
  torch::Tensor std;  // strictly positive
};

/// KL(q || p) per batch element (shape N):
///   sum_d [ log(std_p/std_q) + (std_q^2 + (mean_q - mean_p)^2) / (2 std_p^2) - 1/2 ].
/// Throws on nonpositive std or dimension mismatch.
torch::Tensor kl_diagonal_gaussians(const DiagonalGaussian& q,
                                    const DiagonalGaussian& p);

struct CProbUNetConfig {
  int image_channels = 1;
  int num_styles = 1;
  /// Baselines "(all)" and "(subset)" use conditioned = false: same module,
  /// style planes removed. A conditioned model with a single style appends
  /// no planes either, since a one-level variable carries no information.
  bool conditioned = true;
  int latent_dim = 6;
  int base_channels = 32;
  int depth = 4;
  double beta = 1.0;
  double dropout_p = 0.5;
  std::string normalization = "none";

  int style_channels() const {
    return conditioned && num_styles > 1 ? num_styles : 0;
  }
  void validate() const;
  nlohmann::json to_json() const;
  static CProbUNetConfig from_json(const nlohmann::json& j);
  bool operator==(const CProbUNetConfig&) const = default;
};

/// Contraction path ending in a linear head that emits (mean, log-variance)
/// of the latent Gaussian. The head starts zero-initialized, so an untrained
/// encoder yields exactly N(0, I).
class GaussianEncoderImpl : public torch::nn::Module {
 public:
  GaussianEncoderImpl(const BackboneConfig& backbone_config, int latent_dim);
  DiagonalGaussian forward(torch::Tensor x);

 private:
  EncoderPath encoder_{nullptr};
  torch::nn::Linear head_{nullptr};
  int latent_dim_;
};
TORCH_MODULE(GaussianEncoder);

/// f(features, z): broadcasts z over the spatial grid, concatenates it to
/// the feature channels, and maps through three 1x1 convolutions to a
/// single logit channel.
class CombinerImpl : public torch::nn::Module {
 public:
  CombinerImpl(int feature_channels, int latent_dim);
  torch::Tensor forward(const torch::Tensor& features, const torch::Tensor& z);

 private:
  torch::nn::Conv2d conv1_{nullptr}, conv2_{nullptr}, conv3_{nullptr};
};
TORCH_MODULE(Combiner);

/// Conditioned probabilistic U-net. The U-net body sees the image alone;
/// the label style enters through the prior net P(z|x,l) and the posterior
/// net Q(z|x,a,l) as tiled one-hot input planes. The posterior additionally
/// receives the annotation as an extra input channel.
class CProbUNetImpl : public torch::nn::Module {
 public:
  explicit CProbUNetImpl(const CProbUNetConfig& config);

  const CProbUNetConfig& config() const { return config_; }

  torch::Tensor features(const torch::Tensor& x);
  DiagonalGaussian prior_encode(const torch::Tensor& x,
                                const torch::Tensor& style_ids);
  DiagonalGaussian posterior_encode(const torch::Tensor& x,
                                    const torch::Tensor& annotation,
                                    const torch::Tensor& style_ids);

  /// Logit field from features and a latent batch, clamped to |15| for a
  /// finite BCE even at saturation.
  torch::Tensor combine(const torch::Tensor& features, const torch::Tensor& z);

  /// Pixel-summed BCE of the posterior-sampled prediction plus
  /// beta * KL(Q || P), averaged over the batch.
  torch::Tensor elbo_loss(const torch::Tensor& x, const torch::Tensor& annotation,
                          const torch::Tensor& style_ids, double beta,
                          at::Generator& gen);

  /// Same loss with caller-supplied reparameterization noise (N x latent),
  /// for finite-difference checks.
  torch::Tensor elbo_loss_with_noise(const torch::Tensor& x,
                                     const torch::Tensor& annotation,
                                     const torch::Tensor& style_ids, double beta,
                                     const torch::Tensor& noise);

  /// combine(features, prior mean): the "mean prediction" logits.
  torch::Tensor mean_prediction_logits(const torch::Tensor& x,
                                       const torch::Tensor& style_ids);
  SegmentationMask mean_prediction(const Image& image, const LabelStyle& style);

  /// n thresholded samples with z drawn from the prior.
  PredictiveSampleSet sample_predictions(const Image& image,
                                         const LabelStyle& style, int n,
                                         at::Generator& gen);

  /// Mean sigmoid probability over n prior samples.
  ProbabilityField predictive_probability(const Image& image,
                                          const LabelStyle& style, int n,
                                          at::Generator& gen);

  /// Model card: architecture facts a reader needs to reuse a checkpoint.
  nlohmann::json model_card() const;

 private:
  torch::Tensor with_style(const torch::Tensor& x,
                           const torch::Tensor& style_ids) const;
  torch::Tensor style_tensor(const LabelStyle& style) const;
  torch::Tensor sample_logits_batch(const torch::Tensor& x,
                                    const LabelStyle& style, int n,
                                    at::Generator& gen);

  CProbUNetConfig config_;
  UNetBackbone backbone_{nullptr};
  GaussianEncoder prior_{nullptr};
  GaussianEncoder posterior_{nullptr};
  Combiner combiner_{nullptr};
};
TORCH_MODULE(CProbUNet);

}  // namespace styleseg
