#pragma once

#include <torch/torch.h>

#include <cstdint>

#include "styleseg/core/types.hpp"
#include "styleseg/metrics/metrics.hpp"

namespace styleseg {

/// Image -> 1 x C x H x W float32 tensor.
torch::Tensor to_tensor(const Image& image);

/// Mask -> 1 x 1 x H x W float32 tensor with values in {0, 1}.
torch::Tensor to_tensor(const SegmentationMask& mask);

/// Probabilities (any shape reshapable to H x W) -> mask, foreground iff
/// p > 0.5; the tie at exactly 0.5 counts as background.
SegmentationMask mask_from_probabilities(const torch::Tensor& probs);

/// Logits -> mask, foreground iff logit > 0 (equivalent to p > 0.5).
SegmentationMask mask_from_logits(const torch::Tensor& logits);

ProbabilityField probability_field_from_tensor(const torch::Tensor& probs);

/// Seeded CPU generator for reproducible sampling independent of the
/// global RNG state.
at::Generator make_generator(std::uint64_t seed);

/// N x num_channels x H x W one-hot style planes from per-sample style ids
/// (int64 tensor of length N): plane style_id is all ones.
torch::Tensor tile_one_hot(const torch::Tensor& style_ids, int num_channels,
                           int height, int width);

/// Throws std::invalid_argument unless every entry of the annotation tensor
/// is exactly 0 or 1.
void check_binary_annotation(const torch::Tensor& annotation);

}  // namespace styleseg
