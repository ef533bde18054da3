#include "styleseg/data/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>

#include "styleseg/core/rng.hpp"
#include "styleseg/data/augment.hpp"

namespace styleseg {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// One random blob: a rotated ellipse whose radius is modulated by a few
/// low-frequency cosines.
struct BlobShape {
  double center_row = 0.0;
  double center_col = 0.0;
  double semi_a = 0.0;
  double semi_b = 0.0;
  double rotation = 0.0;
  std::array<double, 3> wave_amp{};    // harmonics k = 2, 3, 4
  std::array<double, 3> wave_phase{};

  double radius(double theta) const {
    const double t = theta - rotation;
    const double ca = semi_b * std::cos(t);
    const double sa = semi_a * std::sin(t);
    double r = semi_a * semi_b / std::sqrt(ca * ca + sa * sa);
    double mod = 1.0;
    for (int k = 0; k < 3; ++k) {
      mod += wave_amp[k] * std::cos((k + 2) * theta + wave_phase[k]);
    }
    return r * mod;
  }
};

BlobShape draw_blob(Rng& rng, int size) {
  BlobShape blob;
  blob.center_row = rng.uniform(0.45, 0.55) * size;
  blob.center_col = rng.uniform(0.45, 0.55) * size;
  blob.semi_a = rng.uniform(0.12, 0.20) * size;
  blob.semi_b = rng.uniform(0.12, 0.20) * size;
  blob.rotation = rng.uniform(0.0, kTwoPi);
  for (int k = 0; k < 3; ++k) {
    blob.wave_amp[k] = rng.uniform(0.0, 0.06);
    blob.wave_phase[k] = rng.uniform(0.0, kTwoPi);
  }
  return blob;
}

/// Per-annotation boundary noise: a constant radial offset plus smooth
/// angular wobble.
struct BoundaryNoise {
  double offset = 0.0;
  std::array<double, 5> wobble_amp{};
  std::array<double, 5> wobble_phase{};

  double delta(double theta) const {
    double d = offset;
    for (int k = 0; k < 5; ++k) {
      d += wobble_amp[k] * std::cos((k + 1) * theta + wobble_phase[k]);
    }
    return d;
  }
};

BoundaryNoise draw_noise(Rng& rng, const SyntheticStyleSpec& spec) {
  BoundaryNoise noise;
  noise.offset = spec.boundary_offset_mean +
                 spec.boundary_offset_std * rng.normal();
  const double wobble_sigma = 0.5 * spec.boundary_offset_std + 0.25;
  for (int k = 0; k < 5; ++k) {
    noise.wobble_amp[k] = wobble_sigma * rng.normal();
    noise.wobble_phase[k] = rng.uniform(0.0, kTwoPi);
  }
  return noise;
}

/// Rasterizes {(r,c) : dist(r,c) <= R_ann(theta)} where R_ann^2 = R^2 + 2*R*delta.
SegmentationMask rasterize_offset_boundary(const BlobShape& blob,
                                           const BoundaryNoise& noise,
                                           int size) {
  SegmentationMask mask(size, size);
  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c) {
      const double dy = r - blob.center_row;
      const double dx = c - blob.center_col;
      const double theta = std::atan2(dy, dx);
      const double radius = blob.radius(theta);
      const double r2 =
          radius * radius + 2.0 * radius * noise.delta(theta);
      if (r2 > 0.0 && dy * dy + dx * dx <= r2) mask.set(r, c, 1);
    }
  }
  return mask;
}

SegmentationMask smooth_mask(const SegmentationMask& mask, double sigma) {
  if (sigma <= 0.0) return mask;
  std::vector<float> field(mask.grid.begin(), mask.grid.end());
  field = gaussian_blur(field, mask.height, mask.width, sigma);
  SegmentationMask out(mask.height, mask.width);
  for (std::size_t i = 0; i < field.size(); ++i) {
    out.grid[i] = field[i] >= 0.5f ? 1 : 0;
  }
  return out;
}

float smoothstep01(double t) {
  t = std::clamp(t, 0.0, 1.0);
  return static_cast<float>(t * t * (3.0 - 2.0 * t));
}

/// Foreground 0.8 on background 0.2 with a ~1.5 px soft edge and mild
/// pixel noise, quantized to 8-bit levels so PNG round-trips are exact.
Image render_image(const BlobShape& blob, int size, Rng& rng) {
  constexpr double kEdgeWidth = 1.5;
  Image image(1, size, size);
  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c) {
      const double dy = r - blob.center_row;
      const double dx = c - blob.center_col;
      const double dist = std::hypot(dy, dx);
      const double radius = blob.radius(std::atan2(dy, dx));
      const float inside =
          smoothstep01((radius - dist) / (2.0 * kEdgeWidth) + 0.5);
      float v = 0.2f + 0.6f * inside;
      v += static_cast<float>(0.05 * rng.normal());
      v = std::clamp(v, 0.0f, 1.0f);
      image.set(0, r, c,
                static_cast<float>(std::lround(v * 255.0f)) / 255.0f);
    }
  }
  return image;
}

}  // namespace

SyntheticDataset generate_synthetic(int n_samples, int image_size,
                                    const std::vector<SyntheticStyleSpec>& specs,
                                    int annotators_per_style,
                                    std::uint64_t seed) {
  if (n_samples <= 0) {
    throw std::invalid_argument("generate_synthetic: n_samples must be positive");
  }
  if (annotators_per_style <= 0) {
    throw std::invalid_argument(
        "generate_synthetic: annotators_per_style must be positive");
  }
  if (specs.empty()) {
    throw std::invalid_argument("generate_synthetic: need at least one style");
  }
  const int num_styles = static_cast<int>(specs.size());
  double max_offset = 0.0;
  for (int s = 0; s < num_styles; ++s) {
    if (specs[s].style_id.id != s || specs[s].style_id.num_styles != num_styles) {
      throw std::invalid_argument(
          "generate_synthetic: style specs must cover ids 0..k-1 in order");
    }
    if (specs[s].boundary_offset_std < 0.0 || specs[s].smoothing_sigma < 0.0) {
      throw std::invalid_argument(
          "generate_synthetic: negative std or smoothing sigma");
    }
    max_offset = std::max(max_offset, specs[s].boundary_offset_mean +
                                          3.0 * specs[s].boundary_offset_std +
                                          specs[s].smoothing_sigma);
  }
  if (specs[0].boundary_offset_mean != 0.0) {
    throw std::invalid_argument(
        "generate_synthetic: style 0 must have zero offset mean");
  }
  if (image_size < 32 || max_offset > 0.2 * image_size) {
    throw std::invalid_argument(
        "generate_synthetic: image too small to contain the requested object");
  }

  SyntheticDataset dataset;
  dataset.specs = specs;
  dataset.image_size = image_size;
  dataset.annotators_per_style = annotators_per_style;
  dataset.seed = seed;
  dataset.samples.reserve(n_samples);
  dataset.true_masks.reserve(n_samples);

  for (int i = 0; i < n_samples; ++i) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(i)));
    const BlobShape blob = draw_blob(rng, image_size);

    AnnotatedSample sample;
    char id[32];
    std::snprintf(id, sizeof(id), "synth_%06d", i);
    sample.sample_id = id;
    sample.image = render_image(blob, image_size, rng);

    dataset.true_masks.push_back(
        rasterize_offset_boundary(blob, BoundaryNoise{}, image_size));

    for (const auto& spec : specs) {
      for (int a = 0; a < annotators_per_style; ++a) {
        const BoundaryNoise noise = draw_noise(rng, spec);
        SegmentationMask mask =
            rasterize_offset_boundary(blob, noise, image_size);
        mask = smooth_mask(mask, spec.smoothing_sigma);
        sample.annotations.push_back({std::move(mask), spec.style_id});
      }
    }
    sample.validate();
    dataset.samples.push_back(std::move(sample));
  }
  return dataset;
}

}  // namespace styleseg
