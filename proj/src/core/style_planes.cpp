#include "styleseg/core/style_planes.hpp"

#include <stdexcept>

namespace styleseg {

Image one_hot_tile(const LabelStyle& style, int height, int width) {
  if (height <= 0 || width <= 0) {
    throw std::invalid_argument("one_hot_tile: dimensions must be positive");
  }
  Image block(style.num_styles, height, width);
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  std::fill_n(block.data.begin() + style.id * plane, plane, 1.0f);
  return block;
}

Image concat_style(const Image& image, const Image& style_block) {
  if (image.height != style_block.height || image.width != style_block.width) {
    throw std::invalid_argument(
        "concat_style: image and style block have different spatial sizes");
  }
  Image out(image.channels + style_block.channels, image.height, image.width);
  std::copy(image.data.begin(), image.data.end(), out.data.begin());
  std::copy(style_block.data.begin(), style_block.data.end(),
            out.data.begin() + image.data.size());
  return out;
}

Image drop_trailing_channels(const Image& image, int n) {
  if (n < 0 || n >= image.channels) {
    throw std::invalid_argument(
        "drop_trailing_channels: n out of range");
  }
  Image out(image.channels - n, image.height, image.width);
  std::copy(image.data.begin(), image.data.begin() + out.data.size(),
            out.data.begin());
  return out;
}

}  // namespace styleseg
