#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <string>

#include "json.hpp"
#include "styleseg/core/types.hpp"
#include "styleseg/metrics/metrics.hpp"
#include "styleseg/nn/backbone.hpp"

namespace styleseg {

/// Low-rank Gaussian over the flattened pixel logit field, batched:
///   eta ~ N(mean, diag(diag) + factor factor^T)
/// with mean, diag of shape N x M (M = height * width pixels) and factor of
/// shape N x M x r. diag must be strictly positive, so the covariance is
/// positive definite for every parameter setting. r = 0 is the
/// pixel-independent (purely diagonal) special case.
struct LowRankLogitGaussian {
  torch::Tensor mean;
  torch::Tensor diag;
  torch::Tensor factor;
  int height = 0;
  int width = 0;

  int rank() const { return static_cast<int>(factor.size(2)); }
  std::int64_t pixels() const { return mean.size(1); }
  void validate() const;

  /// eta = mean + sqrt(diag) * eps1 + factor @ eps2 with caller-supplied
  /// standard-normal noise, eps1: S x N x M, eps2: S x N x r. Returns
  /// S x N x M and stays differentiable through mean, diag, factor.
  torch::Tensor sample_with_noise(const torch::Tensor& eps1,
                                  const torch::Tensor& eps2) const;

  /// n reparameterized draws (n x N x M) from the given generator. eps1 is
  /// drawn before eps2 so draws are reproducible from the seed alone.
  torch::Tensor sample(int n, at::Generator& gen) const;

  /// Materializes diag(diag) + factor factor^T as N x M x M. Guarded to
  /// M <= 4096; the training path never calls this.
  torch::Tensor dense_covariance() const;
};

/// Monte-Carlo loss on caller-supplied noise:
///   -logsumexp_s( sum_m log p(a_m | eta_s,m) ) + log S, averaged over the
/// batch, with log p the pixel-wise Bernoulli log-likelihood under
/// sigmoid(eta). logsumexp is max-shifted, so the loss is finite whenever
/// the per-sample log-likelihoods are.
torch::Tensor ssn_loss_from_distribution(const LowRankLogitGaussian& dist,
                                         const torch::Tensor& annotation,
                                         const torch::Tensor& eps1,
                                         const torch::Tensor& eps2);

struct CSSNConfig {
  int image_channels = 1;
  int num_styles = 1;
  /// Baselines "(all)" and "(subset)" use conditioned = false. As with the
  /// probabilistic U-net, a conditioned model with a single style appends no
  /// planes, keeping it byte-compatible with the unconditioned module.
  bool conditioned = true;
  int rank = 10;
  int mc_samples = 20;
  int base_channels = 32;
  int depth = 4;
  double dropout_p = 0.5;
  std::string normalization = "none";
  /// 0 tiles the raw one-hot style planes onto the feature map. A positive
  /// value routes the style id through a learned embedding of that width
  /// instead; tiling is the default behavior.
  int style_embedding_dim = 0;

  int style_channels() const {
    if (!conditioned || num_styles <= 1) return 0;
    return style_embedding_dim > 0 ? style_embedding_dim : num_styles;
  }
  void validate() const;
  nlohmann::json to_json() const;
  static CSSNConfig from_json(const nlohmann::json& j);
  bool operator==(const CSSNConfig&) const = default;
};

/// Conditioned stochastic segmentation network. The U-net body sees the
/// image alone; style planes are concatenated to its output feature map,
/// and three zero-initialized 1x1 convolution heads read mean, diagonal
/// (pre-softplus) and low-rank factor of the logit distribution from the
/// combined map. Untrained heads therefore give mean = 0, diag =
/// softplus(0) + 1e-5 and factor = 0: a diagonal Gaussian around an
/// all-tie logit field.
class CSSNImpl : public torch::nn::Module {
 public:
  explicit CSSNImpl(const CSSNConfig& config);

  const CSSNConfig& config() const { return config_; }

  /// Backbone features with the style block appended (channel count
  /// feature_channels + style_channels; unchanged when that width is 0).
  torch::Tensor style_feature_map(const torch::Tensor& features,
                                  const torch::Tensor& style_ids);

  LowRankLogitGaussian logit_distribution(const torch::Tensor& x,
                                          const torch::Tensor& style_ids);

  /// Reparameterized Monte-Carlo loss with S fresh noise draws.
  torch::Tensor ssn_loss(const torch::Tensor& x, const torch::Tensor& annotation,
                         const torch::Tensor& style_ids, int mc_samples,
                         at::Generator& gen);

  /// mean-field logits (N x 1 x H x W), i.e. the distribution mean.
  torch::Tensor mean_prediction_logits(const torch::Tensor& x,
                                       const torch::Tensor& style_ids);
  /// sigmoid(mean) thresholded at 0.5, ties to background.
  SegmentationMask mean_prediction(const Image& image, const LabelStyle& style);

  /// n thresholded samples from the logit distribution.
  PredictiveSampleSet sample_predictions(const Image& image,
                                         const LabelStyle& style, int n,
                                         at::Generator& gen);

  /// Mean sigmoid probability over n logit samples.
  ProbabilityField predictive_probability(const Image& image,
                                          const LabelStyle& style, int n,
                                          at::Generator& gen);

  nlohmann::json model_card() const;

 private:
  torch::Tensor style_tensor(const LabelStyle& style) const;

  CSSNConfig config_;
  UNetBackbone backbone_{nullptr};
  torch::nn::Embedding style_embedding_{nullptr};
  torch::nn::Conv2d mean_head_{nullptr};
  torch::nn::Conv2d diag_head_{nullptr};
  torch::nn::Conv2d factor_head_{nullptr};  // absent when rank = 0
};
TORCH_MODULE(CSSN);

}  // namespace styleseg
