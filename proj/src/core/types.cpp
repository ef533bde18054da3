#include "styleseg/core/types.hpp"

#include <numeric>
#include <stdexcept>

namespace styleseg {

LabelStyle::LabelStyle(int id_, int num_styles_) : id(id_), num_styles(num_styles_) {
  if (num_styles < 1) {
    throw std::invalid_argument("LabelStyle: num_styles must be >= 1");
  }
  if (id < 0 || id >= num_styles) {
    throw std::invalid_argument("LabelStyle: id " + std::to_string(id) +
                                " out of range [0, " + std::to_string(num_styles) + ")");
  }
}

SegmentationMask::SegmentationMask(int height_, int width_)
    : height(height_), width(width_),
      grid(static_cast<std::size_t>(height_) * width_, 0) {
  if (height <= 0 || width <= 0) {
    throw std::invalid_argument("SegmentationMask: height and width must be positive");
  }
}

SegmentationMask::SegmentationMask(int height_, int width_,
                                   std::vector<std::uint8_t> values)
    : height(height_), width(width_), grid(std::move(values)) {
  if (height <= 0 || width <= 0) {
    throw std::invalid_argument("SegmentationMask: height and width must be positive");
  }
  if (grid.size() != static_cast<std::size_t>(height) * width) {
    throw std::invalid_argument("SegmentationMask: value count does not match H*W");
  }
  for (std::uint8_t v : grid) {
    if (v > 1) {
      throw std::invalid_argument("SegmentationMask: values must be 0 or 1");
    }
  }
}

long SegmentationMask::area() const {
  return std::accumulate(grid.begin(), grid.end(), 0L,
                         [](long acc, std::uint8_t v) { return acc + v; });
}

Image::Image(int channels_, int height_, int width_, float fill)
    : channels(channels_), height(height_), width(width_),
      data(static_cast<std::size_t>(channels_) * height_ * width_, fill) {
  if (channels <= 0 || height <= 0 || width <= 0) {
    throw std::invalid_argument("Image: dimensions must be positive");
  }
}

Image::Image(int channels_, int height_, int width_, std::vector<float> values)
    : channels(channels_), height(height_), width(width_), data(std::move(values)) {
  if (channels <= 0 || height <= 0 || width <= 0) {
    throw std::invalid_argument("Image: dimensions must be positive");
  }
  if (data.size() != static_cast<std::size_t>(channels) * height * width) {
    throw std::invalid_argument("Image: value count does not match C*H*W");
  }
}

void AnnotatedSample::validate() const {
  if (annotations.empty()) {
    throw std::invalid_argument("AnnotatedSample '" + sample_id +
                                "': needs at least one annotation");
  }
  for (const Annotation& ann : annotations) {
    if (ann.mask.height != image.height || ann.mask.width != image.width) {
      throw std::invalid_argument("AnnotatedSample '" + sample_id +
                                  "': annotation shape does not match image");
    }
    if (ann.style.id < 0 || ann.style.id >= ann.style.num_styles) {
      throw std::invalid_argument("AnnotatedSample '" + sample_id +
                                  "': invalid label style");
    }
  }
}

long count_pairs(const std::vector<AnnotatedSample>& samples) {
  long n = 0;
  for (const auto& s : samples) n += static_cast<long>(s.annotations.size());
  return n;
}

long count_pairs_of_style(const std::vector<AnnotatedSample>& samples, int style_id) {
  long n = 0;
  for (const auto& s : samples) {
    for (const auto& a : s.annotations) {
      if (a.style.id == style_id) ++n;
    }
  }
  return n;
}

}  // namespace styleseg
