#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace styleseg {

/// Discrete annotation-generation mode: id in {0, ..., num_styles-1}.
struct LabelStyle {
  int id = 0;
  int num_styles = 1;

  LabelStyle() = default;
  LabelStyle(int id, int num_styles);

  bool operator==(const LabelStyle&) const = default;
};

/// H x W binary mask, row-major, values in {0, 1}.
struct SegmentationMask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> grid;

  SegmentationMask() = default;
  SegmentationMask(int height, int width);
  SegmentationMask(int height, int width, std::vector<std::uint8_t> values);

  std::uint8_t at(int row, int col) const {
    return grid[static_cast<std::size_t>(row) * width + col];
  }
  void set(int row, int col, bool on) {
    grid[static_cast<std::size_t>(row) * width + col] = on ? 1 : 0;
  }

  long area() const;
  bool same_shape(const SegmentationMask& other) const {
    return height == other.height && width == other.width;
  }

  bool operator==(const SegmentationMask&) const = default;
};

/// C x H x W image, channel-first row-major, values in [0, 1].
struct Image {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<float> data;

  Image() = default;
  Image(int channels, int height, int width, float fill = 0.0f);
  Image(int channels, int height, int width, std::vector<float> values);

  float at(int channel, int row, int col) const {
    return data[(static_cast<std::size_t>(channel) * height + row) * width + col];
  }
  void set(int channel, int row, int col, float v) {
    data[(static_cast<std::size_t>(channel) * height + row) * width + col] = v;
  }

  bool operator==(const Image&) const = default;
};

struct Annotation {
  SegmentationMask mask;
  LabelStyle style;
};

/// One image with k >= 1 annotations; several annotations may share a style.
struct AnnotatedSample {
  std::string sample_id;
  Image image;
  std::vector<Annotation> annotations;

  /// Throws std::invalid_argument on shape/style violations.
  void validate() const;
};

struct SplitRatios {
  double train = 0.6;
  double val = 0.2;
  double test = 0.2;

  double sum() const { return train + val + test; }
};

/// Disjoint train/val/test partition, keyed by sample_id (all annotations of
/// one image stay together).
struct DatasetSplit {
  std::vector<AnnotatedSample> train;
  std::vector<AnnotatedSample> val;
  std::vector<AnnotatedSample> test;
  SplitRatios ratios;
  std::uint64_t seed = 0;
};

/// Number of image-annotation pairs (the unit used for dataset accounting).
long count_pairs(const std::vector<AnnotatedSample>& samples);

/// Pairs of a single style only.
long count_pairs_of_style(const std::vector<AnnotatedSample>& samples,
                          int style_id);

}  // namespace styleseg
