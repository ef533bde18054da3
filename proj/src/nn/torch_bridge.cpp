#include "styleseg/nn/torch_bridge.hpp"

#include <functional>
#include <stdexcept>

namespace styleseg {

torch::Tensor to_tensor(const Image& image) {
  return torch::from_blob(const_cast<float*>(image.data.data()),
                          {1, image.channels, image.height, image.width},
                          torch::kFloat32)
      .clone();
}

torch::Tensor to_tensor(const SegmentationMask& mask) {
  torch::Tensor t = torch::empty({1, 1, mask.height, mask.width}, torch::kFloat32);
  float* out = t.data_ptr<float>();
  for (std::size_t i = 0; i < mask.grid.size(); ++i) {
    out[i] = static_cast<float>(mask.grid[i]);
  }
  return t;
}

namespace {

SegmentationMask mask_from_2d(const torch::Tensor& field2d,
                              const std::function<bool(float)>& fg) {
  const auto contiguous = field2d.contiguous();
  const int h = static_cast<int>(contiguous.size(0));
  const int w = static_cast<int>(contiguous.size(1));
  SegmentationMask mask(h, w);
  const float* data = contiguous.data_ptr<float>();
  for (std::size_t i = 0; i < mask.grid.size(); ++i) {
    mask.grid[i] = fg(data[i]) ? 1 : 0;
  }
  return mask;
}

torch::Tensor squeeze_to_2d(const torch::Tensor& t) {
  const auto s = t.squeeze();
  if (s.dim() != 2) {
    throw std::invalid_argument("expected a tensor squeezable to H x W");
  }
  return s.to(torch::kFloat32);
}

}  // namespace

SegmentationMask mask_from_probabilities(const torch::Tensor& probs) {
  return mask_from_2d(squeeze_to_2d(probs), [](float p) { return p > 0.5f; });
}

SegmentationMask mask_from_logits(const torch::Tensor& logits) {
  return mask_from_2d(squeeze_to_2d(logits), [](float v) { return v > 0.0f; });
}

ProbabilityField probability_field_from_tensor(const torch::Tensor& probs) {
  const auto t = squeeze_to_2d(probs).contiguous();
  ProbabilityField field(static_cast<int>(t.size(0)), static_cast<int>(t.size(1)));
  const float* data = t.data_ptr<float>();
  std::copy(data, data + field.p.size(), field.p.begin());
  return field;
}

at::Generator make_generator(std::uint64_t seed) {
  auto gen = at::detail::createCPUGenerator(seed);
  return gen;
}

torch::Tensor tile_one_hot(const torch::Tensor& style_ids, int num_channels,
                           int height, int width) {
  if (style_ids.dim() != 1) {
    throw std::invalid_argument("tile_one_hot: style_ids must be 1-D");
  }
  const auto n = style_ids.size(0);
  if ((style_ids < 0).any().item<bool>() ||
      (style_ids >= num_channels).any().item<bool>()) {
    throw std::invalid_argument("tile_one_hot: style id out of range");
  }
  torch::Tensor planes = torch::zeros({n, num_channels, height, width});
  planes.scatter_(
      1, style_ids.view({n, 1, 1, 1}).expand({n, 1, height, width}), 1.0);
  return planes;
}

void check_binary_annotation(const torch::Tensor& annotation) {
  const auto bad = (annotation != 0.0) & (annotation != 1.0);
  if (bad.any().item<bool>()) {
    throw std::invalid_argument("annotation must be binary (0/1)");
  }
}

}  // namespace styleseg
