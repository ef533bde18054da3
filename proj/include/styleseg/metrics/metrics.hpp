#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "styleseg/core/rng.hpp"
#include "styleseg/core/types.hpp"

namespace styleseg {

/// Intersection over union. Both masks empty counts as perfect agreement
/// (IoU 1), so the induced distance 1 - IoU is 0 for two empty masks.
double iou(const SegmentationMask& a, const SegmentationMask& b);

/// Jaccard distance d = 1 - IoU.
double jaccard_distance(const SegmentationMask& a, const SegmentationMask& b);

/// A batch of mask samples drawn from one model for one input.
struct PredictiveSampleSet {
  std::vector<SegmentationMask> masks;
  std::string source;
  std::optional<LabelStyle> conditioning;  // nullopt: unconditioned / pooled

  int n() const { return static_cast<int>(masks.size()); }
  void validate() const;
};

/// Squared generalized energy distance
///   D^2 = 2 E[d(y, yhat)] - E[d(y, y')] - E[d(yhat, yhat')]
/// with d the Jaccard distance. Plug-in estimator: the cross term averages
/// over all n*m ordered pairs, the within-set terms over all n^2 (resp. m^2)
/// ordered pairs including self-pairs, whose distance is 0.
double ged_squared(const std::vector<SegmentationMask>& set_a,
                   const std::vector<SegmentationMask>& set_b);
double ged_squared(const PredictiveSampleSet& predictions,
                   const std::vector<SegmentationMask>& annotations);

/// Draws one mask conditioned on the given style; callers bind their model
/// and input image.
using StyleConditionedSampler =
    std::function<SegmentationMask(const LabelStyle& style)>;

/// Samples the full annotator distribution: each of the n draws picks a
/// style from the categorical style_probs, then one prediction conditioned
/// on it. style_probs must be non-negative and sum to 1; its length defines
/// the number of styles.
PredictiveSampleSet sample_full_distribution(
    const StyleConditionedSampler& sample_given_style, int n,
    const std::vector<double>& style_probs, Rng& rng);

/// Dense per-pixel foreground probability.
struct ProbabilityField {
  int height = 0;
  int width = 0;
  std::vector<float> p;  // row-major, size height * width

  ProbabilityField() = default;
  ProbabilityField(int h, int w)
      : height(h), width(w), p(static_cast<std::size_t>(h) * w, 0.0f) {}

  float at(int r, int c) const {
    return p[static_cast<std::size_t>(r) * width + c];
  }
  void set(int r, int c, float v) {
    p[static_cast<std::size_t>(r) * width + c] = v;
  }
};

/// Fraction of samples marking each pixel foreground.
ProbabilityField foreground_frequency(const PredictiveSampleSet& samples);

/// Binary entropy in nats, -p ln p - (1-p) ln(1-p) with 0 ln 0 := 0.
/// Evaluated through min(p, 1-p) so that H(p) == H(1-p) bit-exactly.
double binary_entropy(double p);

/// Per-pixel binary entropy of a probability field.
std::vector<double> pixel_entropy(const ProbabilityField& field);

/// Pooled (micro) rank-based AUROC over all pixels of all images, ties
/// resolved by midranks. Throws when the pooled ground truth has a single
/// class.
double auroc_pixelwise(const std::vector<ProbabilityField>& p_fields,
                       const std::vector<SegmentationMask>& gt_masks);

/// Signed area differences area(prediction) - area(ground truth) over all
/// (prediction, ground-truth) pairs, with pooled mean and population
/// standard deviation.
struct AreaBias {
  std::vector<double> differences;
  double mean = 0.0;
  double stddev = 0.0;

  static AreaBias from_differences(std::vector<double> differences);
};

AreaBias area_bias(const PredictiveSampleSet& predictions,
                   const std::vector<SegmentationMask>& gt0);

/// Per-pixel entropies grouped by the confusion class of the thresholded
/// prediction (foreground iff p > 0.5, ties count as background) against
/// the ground truth.
struct ErrorStrata {
  std::vector<double> tp;
  std::vector<double> fp;
  std::vector<double> tn;
  std::vector<double> fn;

  void merge(const ErrorStrata& other);
  std::size_t total() const {
    return tp.size() + fp.size() + tn.size() + fn.size();
  }
};

ErrorStrata error_entropy_strata(const ProbabilityField& p,
                                 const SegmentationMask& gt);

/// Median of a value list; NaN for an empty list.
double median(std::vector<double> values);

}  // namespace styleseg
