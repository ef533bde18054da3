#pragma once

#include "styleseg/core/types.hpp"

namespace styleseg {

/// One-hot style block of shape num_styles x H x W: plane style.id is all
/// ones, every other plane all zeros.
Image one_hot_tile(const LabelStyle& style, int height, int width);

/// Appends the style block to the channel axis. The image channels are
/// carried over bit-exact; output has C + num_styles channels.
Image concat_style(const Image& image, const Image& style_block);

/// Drops the trailing n channels (inverse of concat_style).
Image drop_trailing_channels(const Image& image, int n);

}  // namespace styleseg
