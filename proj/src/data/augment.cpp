#include "styleseg/data/augment.hpp"

#include <cmath>
#include <stdexcept>

namespace styleseg {

namespace {

/// Offsets (dr, dc) with dr*dr + dc*dc <= radius*radius.
std::vector<std::pair<int, int>> disk_offsets(int radius) {
  std::vector<std::pair<int, int>> offsets;
  for (int dr = -radius; dr <= radius; ++dr) {
    for (int dc = -radius; dc <= radius; ++dc) {
      if (dr * dr + dc * dc <= radius * radius) offsets.emplace_back(dr, dc);
    }
  }
  return offsets;
}

}  // namespace

SegmentationMask dilate_disk(const SegmentationMask& mask, int radius) {
  if (radius < 0) throw std::invalid_argument("dilate_disk: negative radius");
  if (radius == 0) return mask;

  const auto offsets = disk_offsets(radius);
  SegmentationMask out(mask.height, mask.width);
  for (int r = 0; r < mask.height; ++r) {
    for (int c = 0; c < mask.width; ++c) {
      if (!mask.at(r, c)) continue;
      for (const auto& [dr, dc] : offsets) {
        const int rr = r + dr;
        const int cc = c + dc;
        if (rr >= 0 && rr < mask.height && cc >= 0 && cc < mask.width) {
          out.set(rr, cc, 1);
        }
      }
    }
  }
  return out;
}

std::vector<float> gaussian_blur(const std::vector<float>& field, int height,
                                 int width, double sigma) {
  if (field.size() != static_cast<std::size_t>(height) * width) {
    throw std::invalid_argument("gaussian_blur: field size mismatch");
  }
  if (sigma <= 0.0) return field;

  const int half = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(2 * half + 1);
  double norm = 0.0;
  for (int k = -half; k <= half; ++k) {
    kernel[k + half] = std::exp(-0.5 * (k * k) / (sigma * sigma));
    norm += kernel[k + half];
  }
  for (double& v : kernel) v /= norm;

  std::vector<float> tmp(field.size(), 0.0f);
  std::vector<float> out(field.size(), 0.0f);

  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      double acc = 0.0;
      for (int k = -half; k <= half; ++k) {
        const int cc = c + k;
        if (cc >= 0 && cc < width) {
          acc += kernel[k + half] * field[static_cast<std::size_t>(r) * width + cc];
        }
      }
      tmp[static_cast<std::size_t>(r) * width + c] = static_cast<float>(acc);
    }
  }
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      double acc = 0.0;
      for (int k = -half; k <= half; ++k) {
        const int rr = r + k;
        if (rr >= 0 && rr < height) {
          acc += kernel[k + half] * tmp[static_cast<std::size_t>(rr) * width + c];
        }
      }
      out[static_cast<std::size_t>(r) * width + c] = static_cast<float>(acc);
    }
  }
  return out;
}

SegmentationMask dilate_blur_augment(const SegmentationMask& fine_mask,
                                     int dilation_radius, double sigma) {
  SegmentationMask dilated = dilate_disk(fine_mask, dilation_radius);
  if (sigma <= 0.0) return dilated;

  std::vector<float> field(dilated.grid.begin(), dilated.grid.end());
  field = gaussian_blur(field, dilated.height, dilated.width, sigma);

  SegmentationMask out(dilated.height, dilated.width);
  for (std::size_t i = 0; i < field.size(); ++i) {
    out.grid[i] = field[i] >= 0.5f ? 1 : 0;
  }
  return out;
}

}  // namespace styleseg
