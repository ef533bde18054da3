#include "styleseg/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace styleseg {

double iou(const SegmentationMask& a, const SegmentationMask& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("iou: shape mismatch");
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (std::size_t i = 0; i < a.grid.size(); ++i) {
    inter += a.grid[i] & b.grid[i];
    uni += a.grid[i] | b.grid[i];
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double jaccard_distance(const SegmentationMask& a, const SegmentationMask& b) {
  return 1.0 - iou(a, b);
}

void PredictiveSampleSet::validate() const {
  if (masks.empty()) {
    throw std::invalid_argument("PredictiveSampleSet: no samples");
  }
  for (const auto& m : masks) {
    if (!m.same_shape(masks.front())) {
      throw std::invalid_argument("PredictiveSampleSet: non-uniform shapes");
    }
  }
}

namespace {

void check_uniform(const std::vector<SegmentationMask>& set, const char* name) {
  if (set.empty()) {
    throw std::invalid_argument(std::string("ged_squared: empty set ") + name);
  }
  for (const auto& m : set) {
    if (!m.same_shape(set.front())) {
      throw std::invalid_argument(
          std::string("ged_squared: non-uniform shapes in set ") + name);
    }
  }
}

/// Mean Jaccard distance over all ordered within-set pairs, self-pairs
/// included (they contribute 0).
double mean_within_distance(const std::vector<SegmentationMask>& set) {
  const std::size_t n = set.size();
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      sum += 2.0 * jaccard_distance(set[i], set[j]);
    }
  }
  return sum / static_cast<double>(n * n);
}

}  // namespace

double ged_squared(const std::vector<SegmentationMask>& set_a,
                   const std::vector<SegmentationMask>& set_b) {
  check_uniform(set_a, "A");
  check_uniform(set_b, "B");
  if (!set_a.front().same_shape(set_b.front())) {
    throw std::invalid_argument("ged_squared: sets have different shapes");
  }

  double cross = 0.0;
  for (const auto& a : set_a) {
    for (const auto& b : set_b) {
      cross += jaccard_distance(a, b);
    }
  }
  cross /= static_cast<double>(set_a.size() * set_b.size());

  return 2.0 * cross - mean_within_distance(set_a) - mean_within_distance(set_b);
}

double ged_squared(const PredictiveSampleSet& predictions,
                   const std::vector<SegmentationMask>& annotations) {
  predictions.validate();
  return ged_squared(annotations, predictions.masks);
}

PredictiveSampleSet sample_full_distribution(
    const StyleConditionedSampler& sample_given_style, int n,
    const std::vector<double>& style_probs, Rng& rng) {
  if (n <= 0) {
    throw std::invalid_argument("sample_full_distribution: n must be positive");
  }
  if (style_probs.empty()) {
    throw std::invalid_argument("sample_full_distribution: no style probs");
  }
  double sum = 0.0;
  for (double p : style_probs) {
    if (p < 0.0) {
      throw std::invalid_argument(
          "sample_full_distribution: negative style probability");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw std::invalid_argument(
        "sample_full_distribution: style probabilities must sum to 1");
  }

  const int num_styles = static_cast<int>(style_probs.size());
  PredictiveSampleSet out;
  out.masks.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    double acc = 0.0;
    int style = num_styles - 1;
    for (int k = 0; k < num_styles; ++k) {
      acc += style_probs[k];
      if (u < acc) {
        style = k;
        break;
      }
    }
    out.masks.push_back(sample_given_style(LabelStyle(style, num_styles)));
  }
  out.validate();
  return out;
}

ProbabilityField foreground_frequency(const PredictiveSampleSet& samples) {
  samples.validate();
  const auto& first = samples.masks.front();
  ProbabilityField field(first.height, first.width);
  for (const auto& mask : samples.masks) {
    for (std::size_t i = 0; i < mask.grid.size(); ++i) {
      field.p[i] += mask.grid[i];
    }
  }
  const float inv = 1.0f / static_cast<float>(samples.n());
  for (float& v : field.p) v *= inv;
  return field;
}

double binary_entropy(double p) {
  if (p < 0.0 || p > 1.0) {
    throw std::invalid_argument("binary_entropy: p outside [0,1]");
  }
  const double a = std::min(p, 1.0 - p);
  if (a == 0.0) return 0.0;
  return -a * std::log(a) - (1.0 - a) * std::log(1.0 - a);
}

std::vector<double> pixel_entropy(const ProbabilityField& field) {
  std::vector<double> out(field.p.size());
  for (std::size_t i = 0; i < field.p.size(); ++i) {
    out[i] = binary_entropy(field.p[i]);
  }
  return out;
}

double auroc_pixelwise(const std::vector<ProbabilityField>& p_fields,
                       const std::vector<SegmentationMask>& gt_masks) {
  if (p_fields.size() != gt_masks.size() || p_fields.empty()) {
    throw std::invalid_argument("auroc_pixelwise: field/mask count mismatch");
  }

  struct Scored {
    float score;
    std::uint8_t label;
  };
  std::vector<Scored> pixels;
  for (std::size_t i = 0; i < p_fields.size(); ++i) {
    if (p_fields[i].height != gt_masks[i].height ||
        p_fields[i].width != gt_masks[i].width) {
      throw std::invalid_argument("auroc_pixelwise: shape mismatch");
    }
    for (std::size_t j = 0; j < p_fields[i].p.size(); ++j) {
      pixels.push_back({p_fields[i].p[j], gt_masks[i].grid[j]});
    }
  }

  std::sort(pixels.begin(), pixels.end(),
            [](const Scored& a, const Scored& b) { return a.score < b.score; });

  std::size_t n_pos = 0;
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < pixels.size()) {
    std::size_t j = i;
    while (j < pixels.size() && pixels[j].score == pixels[i].score) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based
    for (std::size_t k = i; k < j; ++k) {
      if (pixels[k].label) {
        ++n_pos;
        rank_sum_pos += midrank;
      }
    }
    i = j;
  }

  const std::size_t n_neg = pixels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    throw std::invalid_argument(
        "auroc_pixelwise: ground truth contains a single class");
  }
  const double u =
      rank_sum_pos - 0.5 * static_cast<double>(n_pos) * (n_pos + 1);
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

AreaBias AreaBias::from_differences(std::vector<double> differences) {
  AreaBias bias;
  bias.differences = std::move(differences);
  if (bias.differences.empty()) return bias;
  bias.mean = std::accumulate(bias.differences.begin(), bias.differences.end(),
                              0.0) /
              static_cast<double>(bias.differences.size());
  double sq = 0.0;
  for (double d : bias.differences) sq += (d - bias.mean) * (d - bias.mean);
  bias.stddev = std::sqrt(sq / static_cast<double>(bias.differences.size()));
  return bias;
}

AreaBias area_bias(const PredictiveSampleSet& predictions,
                   const std::vector<SegmentationMask>& gt0) {
  predictions.validate();
  if (gt0.empty()) {
    throw std::invalid_argument("area_bias: no ground-truth masks");
  }
  std::vector<double> diffs;
  diffs.reserve(predictions.masks.size() * gt0.size());
  for (const auto& pred : predictions.masks) {
    for (const auto& gt : gt0) {
      diffs.push_back(static_cast<double>(pred.area()) -
                      static_cast<double>(gt.area()));
    }
  }
  return AreaBias::from_differences(std::move(diffs));
}

void ErrorStrata::merge(const ErrorStrata& other) {
  tp.insert(tp.end(), other.tp.begin(), other.tp.end());
  fp.insert(fp.end(), other.fp.begin(), other.fp.end());
  tn.insert(tn.end(), other.tn.begin(), other.tn.end());
  fn.insert(fn.end(), other.fn.begin(), other.fn.end());
}

ErrorStrata error_entropy_strata(const ProbabilityField& p,
                                 const SegmentationMask& gt) {
  if (p.height != gt.height || p.width != gt.width) {
    throw std::invalid_argument("error_entropy_strata: shape mismatch");
  }
  ErrorStrata strata;
  for (std::size_t i = 0; i < p.p.size(); ++i) {
    const bool predicted = p.p[i] > 0.5f;
    const bool actual = gt.grid[i] != 0;
    const double h = binary_entropy(p.p[i]);
    if (predicted && actual) {
      strata.tp.push_back(h);
    } else if (predicted && !actual) {
      strata.fp.push_back(h);
    } else if (!predicted && !actual) {
      strata.tn.push_back(h);
    } else {
      strata.fn.push_back(h);
    }
  }
  return strata;
}

double median(std::vector<double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  double hi = values[mid];
  if (values.size() % 2 == 1) return hi;
  const double lo = *std::max_element(values.begin(), values.begin() + mid);
  return 0.5 * (lo + hi);
}

}  // namespace styleseg
