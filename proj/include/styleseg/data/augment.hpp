#pragma once

#include <vector>

#include "styleseg/core/types.hpp"

namespace styleseg {

/// Morphological dilation with a disk structuring element: a pixel is set
/// when any input pixel within Euclidean distance <= radius is set.
SegmentationMask dilate_disk(const SegmentationMask& mask, int radius);

/// Separable Gaussian blur over a dense float field, zero padded beyond
/// the border. sigma <= 0 returns the field unchanged.
std::vector<float> gaussian_blur(const std::vector<float>& field, int height,
                                 int width, double sigma);

/// Coarsens a fine mask: disk dilation followed by a Gaussian filter and
/// re-binarization at 0.5. radius 0 with sigma <= 0 is the identity; the
/// empty mask maps to itself.
SegmentationMask dilate_blur_augment(const SegmentationMask& fine_mask,
                                     int dilation_radius, double sigma);

}  // namespace styleseg
