#include "styleseg/models/cprob_unet.hpp"

#include <stdexcept>

#include "styleseg/nn/torch_bridge.hpp"

namespace F = torch::nn::functional;

namespace styleseg {

torch::Tensor kl_diagonal_gaussians(const DiagonalGaussian& q,
                                    const DiagonalGaussian& p) {
  if (!q.mean.sizes().equals(p.mean.sizes()) ||
      !q.std.sizes().equals(p.std.sizes())) {
    throw std::invalid_argument("kl_diagonal_gaussians: dimension mismatch");
  }
  if ((q.std <= 0).any().item<bool>() || (p.std <= 0).any().item<bool>()) {
    throw std::invalid_argument("kl_diagonal_gaussians: nonpositive std");
  }
  const auto var_q = q.std * q.std;
  const auto var_p = p.std * p.std;
  const auto delta = q.mean - p.mean;
  const auto per_dim =
      torch::log(p.std / q.std) + (var_q + delta * delta) / (2.0 * var_p) - 0.5;
  return per_dim.sum(-1);
}

void CProbUNetConfig::validate() const {
  if (image_channels < 1) {
    throw std::invalid_argument("CProbUNetConfig: image_channels must be >= 1");
  }
  if (num_styles < 1) {
    throw std::invalid_argument("CProbUNetConfig: num_styles must be >= 1");
  }
  if (latent_dim < 1) {
    throw std::invalid_argument("CProbUNetConfig: latent_dim must be >= 1");
  }
  if (beta < 0.0) {
    throw std::invalid_argument("CProbUNetConfig: beta must be >= 0");
  }
}

nlohmann::json CProbUNetConfig::to_json() const {
  return {{"model", "cprob_unet"},
          {"image_channels", image_channels},
          {"num_styles", num_styles},
          {"conditioned", conditioned},
          {"latent_dim", latent_dim},
          {"base_channels", base_channels},
          {"depth", depth},
          {"beta", beta},
          {"dropout_p", dropout_p},
          {"normalization", normalization}};
}

CProbUNetConfig CProbUNetConfig::from_json(const nlohmann::json& j) {
  CProbUNetConfig c;
  c.image_channels = j.value("image_channels", c.image_channels);
  c.num_styles = j.value("num_styles", c.num_styles);
  c.conditioned = j.value("conditioned", c.conditioned);
  c.latent_dim = j.value("latent_dim", c.latent_dim);
  c.base_channels = j.value("base_channels", c.base_channels);
  c.depth = j.value("depth", c.depth);
  c.beta = j.value("beta", c.beta);
  c.dropout_p = j.value("dropout_p", c.dropout_p);
  c.normalization = j.value("normalization", c.normalization);
  c.validate();
  return c;
}

GaussianEncoderImpl::GaussianEncoderImpl(const BackboneConfig& backbone_config,
                                         int latent_dim)
    : latent_dim_(latent_dim) {
  encoder_ = EncoderPath(backbone_config);
  register_module("encoder", encoder_);
  head_ = torch::nn::Linear(encoder_->code_dim(), 2 * latent_dim);
  register_module("head", head_);
  torch::NoGradGuard no_grad;
  head_->weight.zero_();
  head_->bias.zero_();
}

DiagonalGaussian GaussianEncoderImpl::forward(torch::Tensor x) {
  const auto stats = head_->forward(encoder_->code(std::move(x)));
  const auto mean = stats.slice(1, 0, latent_dim_);
  const auto log_var = stats.slice(1, latent_dim_, 2 * latent_dim_);
  return {mean, torch::exp(0.5 * log_var)};
}

CombinerImpl::CombinerImpl(int feature_channels, int latent_dim) {
  conv1_ = torch::nn::Conv2d(
      torch::nn::Conv2dOptions(feature_channels + latent_dim, feature_channels, 1));
  conv2_ = torch::nn::Conv2d(
      torch::nn::Conv2dOptions(feature_channels, feature_channels, 1));
  conv3_ = torch::nn::Conv2d(torch::nn::Conv2dOptions(feature_channels, 1, 1));
  register_module("conv1", conv1_);
  register_module("conv2", conv2_);
  register_module("conv3", conv3_);
  torch::NoGradGuard no_grad;
  for (auto conv : {conv1_, conv2_, conv3_}) {
    torch::nn::init::kaiming_normal_(conv->weight, 0.0, torch::kFanIn,
                                     torch::kReLU);
    torch::nn::init::zeros_(conv->bias);
  }
}

torch::Tensor CombinerImpl::forward(const torch::Tensor& features,
                                    const torch::Tensor& z) {
  const auto broadcast = z.unsqueeze(-1).unsqueeze(-1).expand(
      {z.size(0), z.size(1), features.size(2), features.size(3)});
  auto h = torch::cat({features, broadcast}, 1);
  h = torch::relu(conv1_->forward(h));
  h = torch::relu(conv2_->forward(h));
  return conv3_->forward(h);
}

CProbUNetImpl::CProbUNetImpl(const CProbUNetConfig& config) : config_(config) {
  config_.validate();

  BackboneConfig body;
  body.in_channels = config.image_channels;
  body.base_channels = config.base_channels;
  body.depth = config.depth;
  body.bottleneck_dropout_p = config.dropout_p;
  body.normalization = config.normalization;
  backbone_ = UNetBackbone(body);
  register_module("backbone", backbone_);

  BackboneConfig prior_cfg = body;
  prior_cfg.in_channels = config.image_channels + config_.style_channels();
  prior_ = GaussianEncoder(prior_cfg, config.latent_dim);
  register_module("prior", prior_);

  BackboneConfig posterior_cfg = body;
  posterior_cfg.in_channels =
      config.image_channels + config_.style_channels() + 1;
  posterior_ = GaussianEncoder(posterior_cfg, config.latent_dim);
  register_module("posterior", posterior_);

  combiner_ = Combiner(backbone_->feature_channels(), config.latent_dim);
  register_module("combiner", combiner_);
}

torch::Tensor CProbUNetImpl::with_style(const torch::Tensor& x,
                                        const torch::Tensor& style_ids) const {
  const int width = config_.style_channels();
  if (width == 0) return x;
  const auto planes = tile_one_hot(style_ids, width, static_cast<int>(x.size(2)),
                                   static_cast<int>(x.size(3)))
                          .to(x.dtype());
  return torch::cat({x, planes}, 1);
}

torch::Tensor CProbUNetImpl::style_tensor(const LabelStyle& style) const {
  if (style.num_styles != config_.num_styles || style.id < 0 ||
      style.id >= config_.num_styles) {
    throw std::invalid_argument("style does not match the model's num_styles");
  }
  return torch::full({1}, static_cast<long>(style.id), torch::kInt64);
}

torch::Tensor CProbUNetImpl::features(const torch::Tensor& x) {
  return backbone_->forward(x);
}

DiagonalGaussian CProbUNetImpl::prior_encode(const torch::Tensor& x,
                                             const torch::Tensor& style_ids) {
  return prior_->forward(with_style(x, style_ids));
}

DiagonalGaussian CProbUNetImpl::posterior_encode(const torch::Tensor& x,
                                                 const torch::Tensor& annotation,
                                                 const torch::Tensor& style_ids) {
  if (annotation.size(2) != x.size(2) || annotation.size(3) != x.size(3)) {
    throw std::invalid_argument("posterior_encode: annotation/image shape mismatch");
  }
  return posterior_->forward(
      with_style(torch::cat({x, annotation}, 1), style_ids));
}

torch::Tensor CProbUNetImpl::combine(const torch::Tensor& features,
                                     const torch::Tensor& z) {
  return combiner_->forward(features, z).clamp(-15.0, 15.0);
}

torch::Tensor CProbUNetImpl::elbo_loss_with_noise(const torch::Tensor& x,
                                                  const torch::Tensor& annotation,
                                                  const torch::Tensor& style_ids,
                                                  double beta,
                                                  const torch::Tensor& noise) {
  check_binary_annotation(annotation);
  const DiagonalGaussian q = posterior_encode(x, annotation, style_ids);
  const DiagonalGaussian p = prior_encode(x, style_ids);
  const auto z = q.mean + q.std * noise;
  const auto logits = combine(features(x), z);
  const auto bce = F::binary_cross_entropy_with_logits(
      logits, annotation,
      F::BinaryCrossEntropyWithLogitsFuncOptions().reduction(torch::kNone))
                       .sum({1, 2, 3});
  return (bce + beta * kl_diagonal_gaussians(q, p)).mean();
}

torch::Tensor CProbUNetImpl::elbo_loss(const torch::Tensor& x,
                                       const torch::Tensor& annotation,
                                       const torch::Tensor& style_ids,
                                       double beta, at::Generator& gen) {
  const auto noise = torch::randn({x.size(0), config_.latent_dim}, gen,
                                  torch::TensorOptions().dtype(x.dtype()));
  return elbo_loss_with_noise(x, annotation, style_ids, beta, noise);
}

torch::Tensor CProbUNetImpl::mean_prediction_logits(
    const torch::Tensor& x, const torch::Tensor& style_ids) {
  const DiagonalGaussian p = prior_encode(x, style_ids);
  return combine(features(x), p.mean);
}

SegmentationMask CProbUNetImpl::mean_prediction(const Image& image,
                                                const LabelStyle& style) {
  torch::NoGradGuard no_grad;
  return mask_from_logits(
      mean_prediction_logits(to_tensor(image), style_tensor(style)));
}

torch::Tensor CProbUNetImpl::sample_logits_batch(const torch::Tensor& x,
                                                 const LabelStyle& style, int n,
                                                 at::Generator& gen) {
  const auto style_ids = style_tensor(style);
  const DiagonalGaussian p = prior_encode(x, style_ids);
  const auto feats = features(x).expand({n, -1, -1, -1});
  const auto eps = torch::randn({n, config_.latent_dim}, gen,
                                torch::TensorOptions().dtype(torch::kFloat32));
  const auto z = p.mean + p.std * eps;  // broadcast over the n draws
  return combine(feats, z);
}

PredictiveSampleSet CProbUNetImpl::sample_predictions(const Image& image,
                                                      const LabelStyle& style,
                                                      int n, at::Generator& gen) {
  if (n < 1) throw std::invalid_argument("sample_predictions: n must be >= 1");
  torch::NoGradGuard no_grad;
  const auto logits = sample_logits_batch(to_tensor(image), style, n, gen);
  PredictiveSampleSet set;
  set.source = "cprob_unet";
  set.conditioning = config_.conditioned ? std::optional<LabelStyle>(style)
                                         : std::nullopt;
  for (int i = 0; i < n; ++i) set.masks.push_back(mask_from_logits(logits[i]));
  return set;
}

ProbabilityField CProbUNetImpl::predictive_probability(const Image& image,
                                                       const LabelStyle& style,
                                                       int n, at::Generator& gen) {
  if (n < 1) throw std::invalid_argument("predictive_probability: n must be >= 1");
  torch::NoGradGuard no_grad;
  const auto logits = sample_logits_batch(to_tensor(image), style, n, gen);
  return probability_field_from_tensor(torch::sigmoid(logits).mean(0));
}

nlohmann::json CProbUNetImpl::model_card() const {
  nlohmann::json card = config_.to_json();
  card["posterior_annotation_input"] =
      "annotation concatenated as an extra input channel";
  card["style_encoding"] = "tiled one-hot planes on prior/posterior inputs";
  return card;
}

}  // namespace styleseg
