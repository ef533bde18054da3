#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "styleseg/core/types.hpp"

namespace styleseg {

/// Inclusive pixel rectangle.
struct PixelRect {
  int row_min = 0;
  int row_max = 0;
  int col_min = 0;
  int col_max = 0;

  int height() const { return row_max - row_min + 1; }
  int width() const { return col_max - col_min + 1; }
  bool within(int frame_height, int frame_width) const {
    return row_min >= 0 && col_min >= 0 && row_max < frame_height &&
           col_max < frame_width;
  }
};

struct CropSpec {
  PixelRect bbox;
  int margin = 20;
  int target_size = 128;
};

/// Smallest rectangle covering all foreground pixels; throws on an empty mask.
PixelRect mask_bounding_box(const SegmentationMask& mask);

PixelRect extend_rect(const PixelRect& rect, int margin);

/// 8-connected foreground components, one binary mask per component,
/// ordered by first-encountered pixel in row-major scan.
std::vector<SegmentationMask> connected_components(const SegmentationMask& mask);

Image crop_image(const Image& image, const PixelRect& rect);
SegmentationMask crop_mask(const SegmentationMask& mask, const PixelRect& rect);

/// Sampling at (i + 0.5) * in/out - 0.5 with edge clamping (half-pixel
/// centers, no corner alignment).
Image resize_bilinear(const Image& image, int out_height, int out_width);
SegmentationMask resize_nearest(const SegmentationMask& mask, int out_height,
                                int out_width);

/// A full-frame recording: image, ground-truth instance foreground (its
/// connected components are the individual cells), and the frame-level
/// annotations from each annotator.
struct FullFrame {
  std::string frame_id;
  Image image;
  SegmentationMask gt_instances;
  std::vector<Annotation> annotations;
};

/// Cuts one sample per ground-truth cell: the bounding box of the cell is
/// extended by `margin` on all sides, crops that leave the frame are
/// dropped, survivors are resized to target x target (bilinear image,
/// nearest-neighbor masks). Each annotation is restricted to its components
/// overlapping the cell before cropping, so neighbouring cells do not leak
/// into the sample.
std::vector<AnnotatedSample> curate_cell_crops(
    const std::vector<FullFrame>& frames, int margin = 20, int target = 128);

/// Convenience overload: the ground-truth mask doubles as the single
/// (style 0 of 1) annotation of each frame.
std::vector<AnnotatedSample> curate_cell_crops(
    const std::vector<Image>& full_images,
    const std::vector<SegmentationMask>& gt_masks, int margin = 20,
    int target = 128);

/// An image with named annotator masks, before style assignment.
struct RawAnnotated {
  std::string sample_id;
  Image image;
  std::vector<std::pair<std::string, SegmentationMask>> annotations;
};

/// Maps every annotator to its style id and builds AnnotatedSamples,
/// optionally rescaling to rescale_to x rescale_to (0 keeps the original
/// size). Unknown annotators and image/mask shape mismatches throw.
std::vector<AnnotatedSample> assemble_style_dataset(
    const std::vector<RawAnnotated>& raw_annotations,
    const std::map<std::string, int>& style_assignment, int num_styles,
    int rescale_to = 0);

}  // namespace styleseg
