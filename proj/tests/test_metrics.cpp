#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "styleseg/core/rng.hpp"
#include "styleseg/metrics/metrics.hpp"

using namespace styleseg;

namespace {

SegmentationMask random_mask(int size, Rng& rng, double fg_prob = 0.4) {
  SegmentationMask mask(size, size);
  for (auto& v : mask.grid) v = rng.uniform() < fg_prob ? 1 : 0;
  return mask;
}

std::vector<SegmentationMask> random_mask_set(int count, int size, Rng& rng) {
  std::vector<SegmentationMask> set;
  for (int i = 0; i < count; ++i) set.push_back(random_mask(size, rng));
  return set;
}

/// Straight transcription of the squared-energy-distance definition with
/// all ordered pairs, kept separate from the library implementation.
double ged_oracle(const std::vector<SegmentationMask>& a,
                  const std::vector<SegmentationMask>& b) {
  double cross = 0.0;
  for (const auto& x : a) {
    for (const auto& y : b) cross += 1.0 - iou(x, y);
  }
  cross /= static_cast<double>(a.size() * b.size());
  double within_a = 0.0;
  for (const auto& x : a) {
    for (const auto& y : a) within_a += 1.0 - iou(x, y);
  }
  within_a /= static_cast<double>(a.size() * a.size());
  double within_b = 0.0;
  for (const auto& x : b) {
    for (const auto& y : b) within_b += 1.0 - iou(x, y);
  }
  within_b /= static_cast<double>(b.size() * b.size());
  return 2.0 * cross - within_a - within_b;
}

/// AUROC by exhaustive pair counting: concordant pairs count 1, ties 0.5.
double auroc_oracle(const std::vector<float>& scores,
                    const std::vector<std::uint8_t>& labels) {
  double wins = 0.0;
  long pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!labels[i]) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j]) continue;
      ++pairs;
      if (scores[i] > scores[j]) {
        wins += 1.0;
      } else if (scores[i] == scores[j]) {
        wins += 0.5;
      }
    }
  }
  return wins / static_cast<double>(pairs);
}

}  // namespace

TEST_CASE("iou handles the documented cases") {
  SegmentationMask a(2, 2, {1, 1, 0, 0});
  CHECK(iou(a, a) == 1.0);

  SegmentationMask b(2, 2, {0, 0, 1, 1});
  CHECK(iou(a, b) == 0.0);

  SegmentationMask c(2, 2, {1, 1, 0, 0});
  SegmentationMask d(2, 2, {0, 1, 1, 0});
  CHECK(iou(c, d) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  SegmentationMask empty1(3, 3), empty2(3, 3);
  CHECK(iou(empty1, empty2) == 1.0);
  CHECK(jaccard_distance(empty1, empty2) == 0.0);

  CHECK_THROWS_AS(iou(a, SegmentationMask(3, 3)), std::invalid_argument);
}

TEST_CASE("iou is symmetric and jaccard distance obeys the triangle inequality") {
  Rng rng(31);
  for (int t = 0; t < 200; ++t) {
    const SegmentationMask x = random_mask(6, rng);
    const SegmentationMask y = random_mask(6, rng);
    const SegmentationMask z = random_mask(6, rng);
    CHECK(iou(x, y) == iou(y, x));
    CHECK(jaccard_distance(x, z) <=
          jaccard_distance(x, y) + jaccard_distance(y, z) + 1e-12);
  }
}

TEST_CASE("ged trivial cases") {
  SegmentationMask m(2, 2, {1, 0, 0, 0});
  CHECK(ged_squared({m}, {m}) == 0.0);

  // Singletons with IoU 0.5: distance terms are 2*0.5 - 0 - 0.
  SegmentationMask m1(2, 2, {1, 1, 0, 0});
  SegmentationMask m2(2, 2, {1, 0, 0, 0});
  CHECK(iou(m1, m2) == 0.5);
  CHECK(ged_squared({m1}, {m2}) == doctest::Approx(1.0).epsilon(1e-12));

  const std::vector<SegmentationMask> none;
  const std::vector<SegmentationMask> one{m};
  CHECK_THROWS_AS(ged_squared(none, one), std::invalid_argument);
  CHECK_THROWS_AS(ged_squared(one, none), std::invalid_argument);
}

TEST_CASE("ged matches the exhaustive oracle on random 4x4 sets") {
  Rng rng(77);
  for (int t = 0; t < 50; ++t) {
    const auto a = random_mask_set(rng.uniform_int(1, 4), 4, rng);
    const auto b = random_mask_set(rng.uniform_int(1, 4), 4, rng);
    CHECK(std::abs(ged_squared(a, b) - ged_oracle(a, b)) < 1e-12);
  }
}

TEST_CASE("ged is symmetric and vanishes on identical uniform sets") {
  Rng rng(78);
  for (int t = 0; t < 20; ++t) {
    const auto a = random_mask_set(3, 4, rng);
    const auto b = random_mask_set(2, 4, rng);
    CHECK(std::abs(ged_squared(a, b) - ged_squared(b, a)) < 1e-12);
  }

  const SegmentationMask m(3, 3, {1, 1, 0, 0, 1, 0, 0, 0, 0});
  const std::vector<SegmentationMask> same(4, m);
  CHECK(ged_squared(same, same) == 0.0);

  PredictiveSampleSet p;
  p.masks = same;
  p.source = "stub";
  CHECK(ged_squared(p, same) == 0.0);
}

TEST_CASE("sample_full_distribution draws styles as requested") {
  Rng rng(9);
  std::vector<int> seen;
  const StyleConditionedSampler sampler = [&](const LabelStyle& style) {
    seen.push_back(style.id);
    SegmentationMask m(2, 2);
    m.set(0, 0, true);
    return m;
  };

  const auto degenerate =
      sample_full_distribution(sampler, 50, {1.0, 0.0, 0.0}, rng);
  CHECK(degenerate.n() == 50);
  for (int s : seen) CHECK(s == 0);

  seen.clear();
  sample_full_distribution(sampler, 3000, {1.0 / 3, 1.0 / 3, 1.0 / 3}, rng);
  int counts[3] = {0, 0, 0};
  for (int s : seen) ++counts[s];
  // 3 sigma of Binomial(3000, 1/3) is about 78.
  for (int k = 0; k < 3; ++k) CHECK(std::abs(counts[k] - 1000) < 80);

  CHECK_THROWS_AS(sample_full_distribution(sampler, 10, {0.5, 0.2}, rng),
                  std::invalid_argument);
  CHECK_THROWS_AS(sample_full_distribution(sampler, 10, {1.5, -0.5}, rng),
                  std::invalid_argument);
  CHECK_THROWS_AS(sample_full_distribution(sampler, 0, {1.0}, rng),
                  std::invalid_argument);
}

TEST_CASE("binary entropy values") {
  CHECK(std::abs(binary_entropy(0.5) - std::log(2.0)) < 1e-12);
  CHECK(binary_entropy(0.0) == 0.0);
  CHECK(binary_entropy(1.0) == 0.0);
  CHECK(binary_entropy(0.9) == doctest::Approx(0.3250829733914482).epsilon(1e-12));
  CHECK_THROWS_AS(binary_entropy(-0.1), std::invalid_argument);
  CHECK_THROWS_AS(binary_entropy(1.1), std::invalid_argument);
}

TEST_CASE("binary entropy is bit-exactly symmetric") {
  Rng rng(55);
  for (int t = 0; t < 100; ++t) {
    // Construct p in [0.5, 1]; 1-p is then exactly representable.
    const double p = 0.5 + 0.5 * rng.uniform();
    CHECK(binary_entropy(p) == binary_entropy(1.0 - p));
  }
}

TEST_CASE("pixel_entropy maps a field") {
  ProbabilityField field(1, 3);
  field.set(0, 0, 0.5f);
  field.set(0, 1, 0.0f);
  field.set(0, 2, 1.0f);
  const auto h = pixel_entropy(field);
  CHECK(h[0] == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(h[1] == 0.0);
  CHECK(h[2] == 0.0);
}

TEST_CASE("auroc trivial cases") {
  SegmentationMask gt(2, 2, {1, 0, 1, 0});
  ProbabilityField perfect(2, 2);
  perfect.p = {1.0f, 0.0f, 1.0f, 0.0f};
  CHECK(auroc_pixelwise({perfect}, {gt}) == 1.0);

  ProbabilityField constant(2, 2);
  constant.p = {0.3f, 0.3f, 0.3f, 0.3f};
  CHECK(auroc_pixelwise({constant}, {gt}) == 0.5);

  ProbabilityField anti(2, 2);
  anti.p = {0.0f, 1.0f, 0.0f, 1.0f};
  CHECK(auroc_pixelwise({anti}, {gt}) == 0.0);

  SegmentationMask ones(2, 2, {1, 1, 1, 1});
  CHECK_THROWS_AS(auroc_pixelwise({perfect}, {ones}), std::invalid_argument);
}

TEST_CASE("auroc matches exhaustive pair counting") {
  {
    // Hand case with a tie between a positive and a negative pixel.
    ProbabilityField f(2, 4);
    f.p = {0.1f, 0.4f, 0.4f, 0.8f, 0.2f, 0.9f, 0.6f, 0.3f};
    SegmentationMask gt(2, 4, {0, 1, 0, 1, 0, 1, 1, 0});
    // positives: 0.4, 0.8, 0.9, 0.6; negatives: 0.1, 0.4, 0.2, 0.3
    // wins: 0.4 beats {0.1,0.2,0.3}=3 + tie 0.5; 0.8, 0.9, 0.6 beat all 4.
    const double expected = (3.5 + 4 + 4 + 4) / 16.0;
    CHECK(auroc_pixelwise({f}, {gt}) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(auroc_oracle(f.p, gt.grid) == doctest::Approx(expected).epsilon(1e-12));
  }

  Rng rng(83);
  for (int t = 0; t < 30; ++t) {
    const int h = rng.uniform_int(1, 4);
    const int w = rng.uniform_int(1, 4);
    ProbabilityField f(h, w);
    SegmentationMask gt(h, w);
    bool has_pos = false, has_neg = false;
    for (std::size_t i = 0; i < f.p.size(); ++i) {
      // Coarse score grid makes ties common.
      f.p[i] = static_cast<float>(rng.uniform_int(0, 4)) / 4.0f;
      gt.grid[i] = rng.uniform() < 0.5 ? 1 : 0;
      (gt.grid[i] ? has_pos : has_neg) = true;
    }
    if (!has_pos || !has_neg) continue;
    CHECK(std::abs(auroc_pixelwise({f}, {gt}) - auroc_oracle(f.p, gt.grid)) < 1e-12);
  }
}

TEST_CASE("auroc pools across images and ignores monotone rescaling") {
  Rng rng(84);
  std::vector<ProbabilityField> fields(3, ProbabilityField(5, 5));
  std::vector<SegmentationMask> gts(3, SegmentationMask(5, 5));
  for (int i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < fields[i].p.size(); ++j) {
      fields[i].p[j] = static_cast<float>(rng.uniform());
      gts[i].grid[j] = rng.uniform() < 0.4 ? 1 : 0;
    }
  }
  const double base = auroc_pixelwise(fields, gts);

  std::vector<ProbabilityField> scaled = fields;
  for (auto& f : scaled) {
    for (auto& v : f.p) v = 0.5f * v + 0.25f;  // strictly monotone
  }
  CHECK(auroc_pixelwise(scaled, gts) == base);
}

TEST_CASE("area bias statistics") {
  SegmentationMask gt(10, 10);
  for (int r = 2; r < 7; ++r) {
    for (int c = 2; c < 7; ++c) gt.set(r, c, true);
  }

  PredictiveSampleSet same;
  same.masks = {gt};
  const AreaBias zero = area_bias(same, {gt});
  CHECK(zero.mean == 0.0);
  CHECK(zero.stddev == 0.0);
  CHECK(zero.differences.size() == 1);

  SegmentationMask bigger = gt;
  int added = 0;
  for (int c = 0; c < 10 && added < 37; ++c) {
    for (int r = 8; r < 10 && added < 37; ++r) {
      if (!bigger.at(r, c)) {
        bigger.set(r, c, true);
        ++added;
      }
    }
  }
  // Only 20 free pixels in rows 8-9; extend into row 7.
  for (int c = 0; c < 10 && added < 37; ++c) {
    if (!bigger.at(7, c)) {
      bigger.set(7, c, true);
      ++added;
    }
  }
  for (int c = 7; c < 10 && added < 37; ++c) {
    for (int r = 0; r < 7 && added < 37; ++r) {
      if (!bigger.at(r, c)) {
        bigger.set(r, c, true);
        ++added;
      }
    }
  }
  REQUIRE(added == 37);
  PredictiveSampleSet dilated;
  dilated.masks = {bigger};
  CHECK(area_bias(dilated, {gt}).mean == 37.0);

  PredictiveSampleSet both;
  both.masks = {gt, bigger};
  const AreaBias pooled = area_bias(both, {gt, gt});
  CHECK(pooled.differences.size() == 4);
  CHECK(pooled.mean == doctest::Approx(18.5));
}

TEST_CASE("error strata partition pixels with the tie-to-background rule") {
  {
    SegmentationMask gt(2, 2, {1, 0, 0, 1});
    ProbabilityField perfect(2, 2);
    perfect.p = {1.0f, 0.0f, 0.0f, 1.0f};
    const ErrorStrata strata = error_entropy_strata(perfect, gt);
    CHECK(strata.tp.size() == 2);
    CHECK(strata.tn.size() == 2);
    CHECK(strata.fp.empty());
    CHECK(strata.fn.empty());
    for (double h : strata.tp) CHECK(h == 0.0);
    for (double h : strata.tn) CHECK(h == 0.0);
  }
  {
    SegmentationMask gt(2, 2, {1, 1, 0, 0});
    ProbabilityField half(2, 2);
    half.p = {0.5f, 0.5f, 0.5f, 0.5f};
    const ErrorStrata strata = error_entropy_strata(half, gt);
    CHECK(strata.tp.empty());
    CHECK(strata.fp.empty());
    CHECK(strata.fn.size() == 2);
    CHECK(strata.tn.size() == 2);
    for (double h : strata.fn) CHECK(h == doctest::Approx(std::log(2.0)));
  }
}

TEST_CASE("error strata match brute-force classification on a random field") {
  Rng rng(66);
  ProbabilityField p(6, 6);
  SegmentationMask gt(6, 6);
  for (std::size_t i = 0; i < p.p.size(); ++i) {
    p.p[i] = static_cast<float>(rng.uniform());
    gt.grid[i] = rng.uniform() < 0.5 ? 1 : 0;
  }
  const ErrorStrata strata = error_entropy_strata(p, gt);

  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (std::size_t i = 0; i < p.p.size(); ++i) {
    const bool pred = p.p[i] > 0.5f;
    if (pred && gt.grid[i]) ++tp;
    if (pred && !gt.grid[i]) ++fp;
    if (!pred && !gt.grid[i]) ++tn;
    if (!pred && gt.grid[i]) ++fn;
  }
  CHECK(strata.tp.size() == tp);
  CHECK(strata.fp.size() == fp);
  CHECK(strata.tn.size() == tn);
  CHECK(strata.fn.size() == fn);
  CHECK(strata.total() == 36);

  ErrorStrata merged = strata;
  merged.merge(strata);
  CHECK(merged.total() == 72);
}

TEST_CASE("median handles odd, even, and empty inputs") {
  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
  CHECK(median({7.0}) == 7.0);
  CHECK(std::isnan(median({})));
}

TEST_CASE("foreground frequency averages sample masks") {
  PredictiveSampleSet set;
  set.masks.push_back(SegmentationMask(1, 2, {1, 0}));
  set.masks.push_back(SegmentationMask(1, 2, {1, 1}));
  set.masks.push_back(SegmentationMask(1, 2, {0, 1}));
  set.masks.push_back(SegmentationMask(1, 2, {1, 0}));
  const ProbabilityField f = foreground_frequency(set);
  CHECK(f.at(0, 0) == doctest::Approx(0.75));
  CHECK(f.at(0, 1) == doctest::Approx(0.5));
}
