#include "styleseg/data/curation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace styleseg {

PixelRect mask_bounding_box(const SegmentationMask& mask) {
  PixelRect rect{mask.height, -1, mask.width, -1};
  for (int r = 0; r < mask.height; ++r) {
    for (int c = 0; c < mask.width; ++c) {
      if (!mask.at(r, c)) continue;
      rect.row_min = std::min(rect.row_min, r);
      rect.row_max = std::max(rect.row_max, r);
      rect.col_min = std::min(rect.col_min, c);
      rect.col_max = std::max(rect.col_max, c);
    }
  }
  if (rect.row_max < 0) {
    throw std::invalid_argument("mask_bounding_box: empty mask");
  }
  return rect;
}

PixelRect extend_rect(const PixelRect& rect, int margin) {
  return {rect.row_min - margin, rect.row_max + margin, rect.col_min - margin,
          rect.col_max + margin};
}

std::vector<SegmentationMask> connected_components(
    const SegmentationMask& mask) {
  std::vector<int> label(mask.grid.size(), -1);
  std::vector<SegmentationMask> components;
  std::vector<std::size_t> stack;

  for (int r = 0; r < mask.height; ++r) {
    for (int c = 0; c < mask.width; ++c) {
      const std::size_t start = static_cast<std::size_t>(r) * mask.width + c;
      if (!mask.grid[start] || label[start] >= 0) continue;

      const int id = static_cast<int>(components.size());
      components.emplace_back(mask.height, mask.width);
      stack.assign(1, start);
      label[start] = id;
      while (!stack.empty()) {
        const std::size_t px = stack.back();
        stack.pop_back();
        components[id].grid[px] = 1;
        const int pr = static_cast<int>(px) / mask.width;
        const int pc = static_cast<int>(px) % mask.width;
        for (int dr = -1; dr <= 1; ++dr) {
          for (int dc = -1; dc <= 1; ++dc) {
            const int nr = pr + dr;
            const int nc = pc + dc;
            if (nr < 0 || nr >= mask.height || nc < 0 || nc >= mask.width) {
              continue;
            }
            const std::size_t np = static_cast<std::size_t>(nr) * mask.width + nc;
            if (mask.grid[np] && label[np] < 0) {
              label[np] = id;
              stack.push_back(np);
            }
          }
        }
      }
    }
  }
  return components;
}

Image crop_image(const Image& image, const PixelRect& rect) {
  if (!rect.within(image.height, image.width)) {
    throw std::invalid_argument("crop_image: rectangle outside frame");
  }
  Image out(image.channels, rect.height(), rect.width());
  for (int ch = 0; ch < image.channels; ++ch) {
    for (int r = 0; r < out.height; ++r) {
      for (int c = 0; c < out.width; ++c) {
        out.set(ch, r, c, image.at(ch, rect.row_min + r, rect.col_min + c));
      }
    }
  }
  return out;
}

SegmentationMask crop_mask(const SegmentationMask& mask, const PixelRect& rect) {
  if (!rect.within(mask.height, mask.width)) {
    throw std::invalid_argument("crop_mask: rectangle outside frame");
  }
  SegmentationMask out(rect.height(), rect.width());
  for (int r = 0; r < out.height; ++r) {
    for (int c = 0; c < out.width; ++c) {
      out.set(r, c, mask.at(rect.row_min + r, rect.col_min + c));
    }
  }
  return out;
}

Image resize_bilinear(const Image& image, int out_height, int out_width) {
  if (out_height <= 0 || out_width <= 0) {
    throw std::invalid_argument("resize_bilinear: non-positive output size");
  }
  Image out(image.channels, out_height, out_width);
  const double sr = static_cast<double>(image.height) / out_height;
  const double sc = static_cast<double>(image.width) / out_width;
  for (int r = 0; r < out_height; ++r) {
    const double fr = std::clamp((r + 0.5) * sr - 0.5, 0.0,
                                 static_cast<double>(image.height - 1));
    const int r0 = static_cast<int>(std::floor(fr));
    const int r1 = std::min(r0 + 1, image.height - 1);
    const double wr = fr - r0;
    for (int c = 0; c < out_width; ++c) {
      const double fc = std::clamp((c + 0.5) * sc - 0.5, 0.0,
                                   static_cast<double>(image.width - 1));
      const int c0 = static_cast<int>(std::floor(fc));
      const int c1 = std::min(c0 + 1, image.width - 1);
      const double wc = fc - c0;
      for (int ch = 0; ch < image.channels; ++ch) {
        const double v =
            (1 - wr) * ((1 - wc) * image.at(ch, r0, c0) + wc * image.at(ch, r0, c1)) +
            wr * ((1 - wc) * image.at(ch, r1, c0) + wc * image.at(ch, r1, c1));
        out.set(ch, r, c, static_cast<float>(v));
      }
    }
  }
  return out;
}

SegmentationMask resize_nearest(const SegmentationMask& mask, int out_height,
                                int out_width) {
  if (out_height <= 0 || out_width <= 0) {
    throw std::invalid_argument("resize_nearest: non-positive output size");
  }
  SegmentationMask out(out_height, out_width);
  const double sr = static_cast<double>(mask.height) / out_height;
  const double sc = static_cast<double>(mask.width) / out_width;
  for (int r = 0; r < out_height; ++r) {
    const int rr =
        std::min(static_cast<int>(std::floor((r + 0.5) * sr)), mask.height - 1);
    for (int c = 0; c < out_width; ++c) {
      const int cc =
          std::min(static_cast<int>(std::floor((c + 0.5) * sc)), mask.width - 1);
      out.set(r, c, mask.at(rr, cc));
    }
  }
  return out;
}

namespace {

bool masks_overlap(const SegmentationMask& a, const SegmentationMask& b) {
  for (std::size_t i = 0; i < a.grid.size(); ++i) {
    if (a.grid[i] && b.grid[i]) return true;
  }
  return false;
}

/// Union of the components of `annotation` that touch `cell`.
SegmentationMask restrict_to_cell(
    const std::vector<SegmentationMask>& annotation_components,
    const SegmentationMask& cell) {
  SegmentationMask out(cell.height, cell.width);
  for (const auto& component : annotation_components) {
    if (!masks_overlap(component, cell)) continue;
    for (std::size_t i = 0; i < out.grid.size(); ++i) {
      if (component.grid[i]) out.grid[i] = 1;
    }
  }
  return out;
}

}  // namespace

std::vector<AnnotatedSample> curate_cell_crops(
    const std::vector<FullFrame>& frames, int margin, int target) {
  std::vector<AnnotatedSample> samples;
  for (const auto& frame : frames) {
    if (frame.image.height != frame.gt_instances.height ||
        frame.image.width != frame.gt_instances.width) {
      throw std::invalid_argument(
          "curate_cell_crops: image and instance mask shapes differ");
    }
    std::vector<std::vector<SegmentationMask>> annotation_components;
    annotation_components.reserve(frame.annotations.size());
    for (const auto& ann : frame.annotations) {
      annotation_components.push_back(connected_components(ann.mask));
    }

    const auto cells = connected_components(frame.gt_instances);
    for (std::size_t k = 0; k < cells.size(); ++k) {
      const PixelRect box = extend_rect(mask_bounding_box(cells[k]), margin);
      if (!box.within(frame.image.height, frame.image.width)) continue;

      AnnotatedSample sample;
      sample.sample_id = frame.frame_id + "_cell" + std::to_string(k);
      sample.image = resize_bilinear(crop_image(frame.image, box), target, target);
      for (std::size_t a = 0; a < frame.annotations.size(); ++a) {
        const SegmentationMask restricted =
            restrict_to_cell(annotation_components[a], cells[k]);
        sample.annotations.push_back(
            {resize_nearest(crop_mask(restricted, box), target, target),
             frame.annotations[a].style});
      }
      sample.validate();
      samples.push_back(std::move(sample));
    }
  }
  return samples;
}

std::vector<AnnotatedSample> curate_cell_crops(
    const std::vector<Image>& full_images,
    const std::vector<SegmentationMask>& gt_masks, int margin, int target) {
  if (full_images.size() != gt_masks.size()) {
    throw std::invalid_argument(
        "curate_cell_crops: image and mask counts differ");
  }
  std::vector<FullFrame> frames;
  frames.reserve(full_images.size());
  for (std::size_t i = 0; i < full_images.size(); ++i) {
    FullFrame frame;
    frame.frame_id = "frame" + std::to_string(i);
    frame.image = full_images[i];
    frame.gt_instances = gt_masks[i];
    frame.annotations.push_back({gt_masks[i], LabelStyle(0, 1)});
    frames.push_back(std::move(frame));
  }
  return curate_cell_crops(frames, margin, target);
}

std::vector<AnnotatedSample> assemble_style_dataset(
    const std::vector<RawAnnotated>& raw_annotations,
    const std::map<std::string, int>& style_assignment, int num_styles,
    int rescale_to) {
  std::vector<AnnotatedSample> samples;
  samples.reserve(raw_annotations.size());
  for (const auto& raw : raw_annotations) {
    AnnotatedSample sample;
    sample.sample_id = raw.sample_id;
    sample.image = rescale_to > 0
                       ? resize_bilinear(raw.image, rescale_to, rescale_to)
                       : raw.image;
    for (const auto& [annotator, mask] : raw.annotations) {
      const auto it = style_assignment.find(annotator);
      if (it == style_assignment.end()) {
        throw std::invalid_argument(
            "assemble_style_dataset: annotator '" + annotator +
            "' has no style assignment");
      }
      if (mask.height != raw.image.height || mask.width != raw.image.width) {
        throw std::invalid_argument(
            "assemble_style_dataset: annotation shape differs from image (" +
            raw.sample_id + ")");
      }
      const SegmentationMask scaled =
          rescale_to > 0 ? resize_nearest(mask, rescale_to, rescale_to) : mask;
      sample.annotations.push_back({scaled, LabelStyle(it->second, num_styles)});
    }
    sample.validate();
    samples.push_back(std::move(sample));
  }
  return samples;
}

}  // namespace styleseg
