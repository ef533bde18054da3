#include "styleseg/models/cssn.hpp"

#include <cmath>
#include <stdexcept>

#include "styleseg/nn/torch_bridge.hpp"

namespace F = torch::nn::functional;

namespace styleseg {

namespace {

constexpr double kDiagFloor = 1e-5;

void zero_init(torch::nn::Conv2d& conv) {
  torch::NoGradGuard no_grad;
  conv->weight.zero_();
  conv->bias.zero_();
}

}  // namespace

void LowRankLogitGaussian::validate() const {
  if (mean.dim() != 2 || diag.dim() != 2 || factor.dim() != 3) {
    throw std::invalid_argument(
        "LowRankLogitGaussian: mean/diag must be N x M, factor N x M x r");
  }
  if (!mean.sizes().equals(diag.sizes()) || factor.size(0) != mean.size(0) ||
      factor.size(1) != mean.size(1)) {
    throw std::invalid_argument("LowRankLogitGaussian: shape mismatch");
  }
  if (static_cast<std::int64_t>(height) * width != mean.size(1)) {
    throw std::invalid_argument(
        "LowRankLogitGaussian: height * width != pixel count");
  }
  if ((diag <= 0).any().item<bool>()) {
    throw std::invalid_argument("LowRankLogitGaussian: diag must be positive");
  }
}

torch::Tensor LowRankLogitGaussian::sample_with_noise(
    const torch::Tensor& eps1, const torch::Tensor& eps2) const {
  if (eps1.dim() != 3 || eps1.size(1) != mean.size(0) ||
      eps1.size(2) != mean.size(1)) {
    throw std::invalid_argument("sample_with_noise: eps1 must be S x N x M");
  }
  if (eps2.dim() != 3 || eps2.size(0) != eps1.size(0) ||
      eps2.size(1) != mean.size(0) || eps2.size(2) != rank()) {
    throw std::invalid_argument("sample_with_noise: eps2 must be S x N x r");
  }
  auto eta = mean.unsqueeze(0) + torch::sqrt(diag).unsqueeze(0) * eps1;
  if (rank() > 0) {
    eta = eta + torch::matmul(factor.unsqueeze(0), eps2.unsqueeze(-1)).squeeze(-1);
  }
  return eta;
}

torch::Tensor LowRankLogitGaussian::sample(int n, at::Generator& gen) const {
  if (n < 1) throw std::invalid_argument("sample: n must be >= 1");
  const auto opts = torch::TensorOptions().dtype(mean.dtype());
  const auto eps1 = torch::randn({n, mean.size(0), mean.size(1)}, gen, opts);
  const auto eps2 = torch::randn({n, mean.size(0), factor.size(2)}, gen, opts);
  return sample_with_noise(eps1, eps2);
}

torch::Tensor LowRankLogitGaussian::dense_covariance() const {
  if (pixels() > 4096) {
    throw std::invalid_argument(
        "dense_covariance: refusing to materialize M > 4096");
  }
  auto cov = torch::diag_embed(diag);
  if (rank() > 0) cov = cov + torch::matmul(factor, factor.transpose(1, 2));
  return cov;
}

torch::Tensor ssn_loss_from_distribution(const LowRankLogitGaussian& dist,
                                         const torch::Tensor& annotation,
                                         const torch::Tensor& eps1,
                                         const torch::Tensor& eps2) {
  check_binary_annotation(annotation);
  const auto n = dist.mean.size(0);
  const auto target = annotation.reshape({1, n, dist.pixels()}).to(dist.mean.dtype());
  const auto eta = dist.sample_with_noise(eps1, eps2);
  const auto nll = F::binary_cross_entropy_with_logits(
      eta, target.expand_as(eta),
      F::BinaryCrossEntropyWithLogitsFuncOptions().reduction(torch::kNone));
  const auto log_lik = -nll.sum(-1);  // S x N
  const auto s = eps1.size(0);
  const auto per_item =
      -torch::logsumexp(log_lik, 0) + std::log(static_cast<double>(s));
  return per_item.mean();
}

void CSSNConfig::validate() const {
  if (image_channels < 1) {
    throw std::invalid_argument("CSSNConfig: image_channels must be >= 1");
  }
  if (num_styles < 1) {
    throw std::invalid_argument("CSSNConfig: num_styles must be >= 1");
  }
  if (rank < 0) {
    throw std::invalid_argument("CSSNConfig: rank must be >= 0");
  }
  if (mc_samples < 1) {
    throw std::invalid_argument("CSSNConfig: mc_samples must be >= 1");
  }
  if (style_embedding_dim < 0) {
    throw std::invalid_argument("CSSNConfig: style_embedding_dim must be >= 0");
  }
}

nlohmann::json CSSNConfig::to_json() const {
  return {{"model", "cssn"},
          {"image_channels", image_channels},
          {"num_styles", num_styles},
          {"conditioned", conditioned},
          {"rank", rank},
          {"mc_samples", mc_samples},
          {"base_channels", base_channels},
          {"depth", depth},
          {"dropout_p", dropout_p},
          {"normalization", normalization},
          {"style_embedding_dim", style_embedding_dim}};
}

CSSNConfig CSSNConfig::from_json(const nlohmann::json& j) {
  CSSNConfig c;
  c.image_channels = j.value("image_channels", c.image_channels);
  c.num_styles = j.value("num_styles", c.num_styles);
  c.conditioned = j.value("conditioned", c.conditioned);
  c.rank = j.value("rank", c.rank);
  c.mc_samples = j.value("mc_samples", c.mc_samples);
  c.base_channels = j.value("base_channels", c.base_channels);
  c.depth = j.value("depth", c.depth);
  c.dropout_p = j.value("dropout_p", c.dropout_p);
  c.normalization = j.value("normalization", c.normalization);
  c.style_embedding_dim = j.value("style_embedding_dim", c.style_embedding_dim);
  c.validate();
  return c;
}

CSSNImpl::CSSNImpl(const CSSNConfig& config) : config_(config) {
  config_.validate();

  BackboneConfig body;
  body.in_channels = config.image_channels;
  body.base_channels = config.base_channels;
  body.depth = config.depth;
  body.bottleneck_dropout_p = config.dropout_p;
  body.normalization = config.normalization;
  backbone_ = UNetBackbone(body);
  register_module("backbone", backbone_);

  if (config_.style_channels() > 0 && config_.style_embedding_dim > 0) {
    style_embedding_ =
        torch::nn::Embedding(config_.num_styles, config_.style_embedding_dim);
    register_module("style_embedding", style_embedding_);
  }

  const int head_in = backbone_->feature_channels() + config_.style_channels();
  mean_head_ = torch::nn::Conv2d(torch::nn::Conv2dOptions(head_in, 1, 1));
  diag_head_ = torch::nn::Conv2d(torch::nn::Conv2dOptions(head_in, 1, 1));
  register_module("mean_head", mean_head_);
  register_module("diag_head", diag_head_);
  zero_init(mean_head_);
  zero_init(diag_head_);
  if (config_.rank > 0) {
    factor_head_ =
        torch::nn::Conv2d(torch::nn::Conv2dOptions(head_in, config_.rank, 1));
    register_module("factor_head", factor_head_);
    zero_init(factor_head_);
  }
}

torch::Tensor CSSNImpl::style_tensor(const LabelStyle& style) const {
  if (style.num_styles != config_.num_styles || style.id < 0 ||
      style.id >= config_.num_styles) {
    throw std::invalid_argument("style does not match the model's num_styles");
  }
  return torch::full({1}, static_cast<long>(style.id), torch::kInt64);
}

torch::Tensor CSSNImpl::style_feature_map(const torch::Tensor& features,
                                          const torch::Tensor& style_ids) {
  const int width = config_.style_channels();
  if (width == 0) return features;
  const auto h = features.size(2);
  const auto w = features.size(3);
  torch::Tensor planes;
  if (config_.style_embedding_dim > 0) {
    const auto codes = style_embedding_->forward(style_ids);  // N x E
    planes = codes.unsqueeze(-1).unsqueeze(-1).expand(
        {codes.size(0), codes.size(1), h, w});
  } else {
    planes = tile_one_hot(style_ids, width, static_cast<int>(h),
                          static_cast<int>(w));
  }
  return torch::cat({features, planes.to(features.dtype())}, 1);
}

LowRankLogitGaussian CSSNImpl::logit_distribution(const torch::Tensor& x,
                                                  const torch::Tensor& style_ids) {
  const auto combined = style_feature_map(backbone_->forward(x), style_ids);
  const auto n = combined.size(0);
  const auto h = combined.size(2);
  const auto w = combined.size(3);

  LowRankLogitGaussian dist;
  dist.height = static_cast<int>(h);
  dist.width = static_cast<int>(w);
  dist.mean = mean_head_->forward(combined).reshape({n, h * w});
  dist.diag =
      torch::softplus(diag_head_->forward(combined)).reshape({n, h * w}) +
      kDiagFloor;
  if (config_.rank > 0) {
    dist.factor = factor_head_->forward(combined)
                      .reshape({n, config_.rank, h * w})
                      .transpose(1, 2);
  } else {
    dist.factor = torch::zeros({n, h * w, 0}, dist.mean.options());
  }
  return dist;
}

torch::Tensor CSSNImpl::ssn_loss(const torch::Tensor& x,
                                 const torch::Tensor& annotation,
                                 const torch::Tensor& style_ids, int mc_samples,
                                 at::Generator& gen) {
  if (mc_samples < 1) {
    throw std::invalid_argument("ssn_loss: mc_samples must be >= 1");
  }
  const auto dist = logit_distribution(x, style_ids);
  const auto opts = torch::TensorOptions().dtype(dist.mean.dtype());
  const auto eps1 =
      torch::randn({mc_samples, dist.mean.size(0), dist.pixels()}, gen, opts);
  const auto eps2 =
      torch::randn({mc_samples, dist.mean.size(0), dist.rank()}, gen, opts);
  return ssn_loss_from_distribution(dist, annotation, eps1, eps2);
}

torch::Tensor CSSNImpl::mean_prediction_logits(const torch::Tensor& x,
                                               const torch::Tensor& style_ids) {
  const auto dist = logit_distribution(x, style_ids);
  return dist.mean.reshape({dist.mean.size(0), 1, dist.height, dist.width});
}

SegmentationMask CSSNImpl::mean_prediction(const Image& image,
                                           const LabelStyle& style) {
  torch::NoGradGuard no_grad;
  return mask_from_logits(
      mean_prediction_logits(to_tensor(image), style_tensor(style)));
}

PredictiveSampleSet CSSNImpl::sample_predictions(const Image& image,
                                                 const LabelStyle& style, int n,
                                                 at::Generator& gen) {
  if (n < 1) throw std::invalid_argument("sample_predictions: n must be >= 1");
  torch::NoGradGuard no_grad;
  const auto dist = logit_distribution(to_tensor(image), style_tensor(style));
  const auto eta = dist.sample(n, gen);  // n x 1 x M
  PredictiveSampleSet set;
  set.source = "cssn";
  set.conditioning = config_.conditioned ? std::optional<LabelStyle>(style)
                                         : std::nullopt;
  for (int i = 0; i < n; ++i) {
    set.masks.push_back(
        mask_from_logits(eta[i].reshape({dist.height, dist.width})));
  }
  return set;
}

ProbabilityField CSSNImpl::predictive_probability(const Image& image,
                                                  const LabelStyle& style, int n,
                                                  at::Generator& gen) {
  if (n < 1) throw std::invalid_argument("predictive_probability: n must be >= 1");
  torch::NoGradGuard no_grad;
  const auto dist = logit_distribution(to_tensor(image), style_tensor(style));
  const auto probs = torch::sigmoid(dist.sample(n, gen)).mean(0);  // 1 x M
  return probability_field_from_tensor(
      probs.reshape({dist.height, dist.width}));
}

nlohmann::json CSSNImpl::model_card() const {
  nlohmann::json card = config_.to_json();
  card["style_encoding"] = config_.style_embedding_dim > 0
                               ? "learned embedding tiled onto features"
                               : "tiled one-hot planes on features";
  card["covariance"] = "diag(softplus + 1e-5) + low-rank factor";
  return card;
}

}  // namespace styleseg
