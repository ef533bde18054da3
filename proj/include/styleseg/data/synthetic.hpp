#pragma once

#include <cstdint>
#include <vector>

#include "styleseg/core/types.hpp"

namespace styleseg {

/// True annotator distribution of one label style. Style 0 is the
/// ground-truth style: zero mean boundary offset, no smoothing required.
struct SyntheticStyleSpec {
  LabelStyle style_id{0, 1};
  double boundary_offset_mean = 0.0;
  double boundary_offset_std = 0.0;
  double smoothing_sigma = 0.0;
};

/// Generated samples plus everything needed for oracle checks: the true
/// object mask per sample and the style specs the annotations were drawn
/// from.
struct SyntheticDataset {
  std::vector<AnnotatedSample> samples;
  std::vector<SegmentationMask> true_masks;
  std::vector<SyntheticStyleSpec> specs;
  int image_size = 0;
  int annotators_per_style = 1;
  std::uint64_t seed = 0;
};

/// Draws n_samples images of a single randomly perturbed ellipse. Each
/// style contributes annotators_per_style annotations per image whose
/// boundary is offset radially by N(offset_mean, offset_std^2) plus angular
/// wobble, then optionally smoothed. The radial offset delta enters through
/// R_ann^2 = R^2 + 2*R*delta, which keeps the expected annotation area equal
/// to the true area plus offset_mean * (boundary integral of R), so style 0
/// has zero expected signed area error.
///
/// Deterministic in seed: sample i uses the stream mix_seed(seed, i).
/// Throws when the image is too small to contain the object with the
/// requested offsets.
SyntheticDataset generate_synthetic(int n_samples, int image_size,
                                    const std::vector<SyntheticStyleSpec>& specs,
                                    int annotators_per_style,
                                    std::uint64_t seed);

}  // namespace styleseg
