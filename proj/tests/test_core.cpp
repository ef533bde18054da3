#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "styleseg/core/rng.hpp"
#include "styleseg/core/split.hpp"
#include "styleseg/core/style_planes.hpp"
#include "styleseg/core/types.hpp"

using namespace styleseg;

namespace {

AnnotatedSample make_sample(const std::string& id, int annotations = 1,
                            int num_styles = 1, int size = 4) {
  AnnotatedSample s;
  s.sample_id = id;
  s.image = Image(1, size, size, 0.5f);
  for (int k = 0; k < annotations; ++k) {
    Annotation a;
    a.mask = SegmentationMask(size, size);
    a.mask.set(0, 0, true);
    a.style = LabelStyle(k % num_styles, num_styles);
    s.annotations.push_back(std::move(a));
  }
  return s;
}

}  // namespace

TEST_CASE("LabelStyle validates its range") {
  CHECK_NOTHROW(LabelStyle(0, 1));
  CHECK_NOTHROW(LabelStyle(2, 3));
  CHECK_THROWS_AS(LabelStyle(3, 3), std::invalid_argument);
  CHECK_THROWS_AS(LabelStyle(-1, 3), std::invalid_argument);
  CHECK_THROWS_AS(LabelStyle(0, 0), std::invalid_argument);
}

TEST_CASE("SegmentationMask construction and area") {
  SegmentationMask m(3, 4);
  CHECK(m.area() == 0);
  m.set(1, 2, true);
  m.set(2, 3, true);
  CHECK(m.area() == 2);
  CHECK(m.at(1, 2) == 1);

  CHECK_THROWS_AS(SegmentationMask(0, 4), std::invalid_argument);
  CHECK_THROWS_AS(SegmentationMask(2, 2, {0, 1, 2, 0}), std::invalid_argument);
  CHECK_THROWS_AS(SegmentationMask(2, 2, {0, 1}), std::invalid_argument);
  CHECK_NOTHROW(SegmentationMask(2, 2, {0, 1, 1, 0}));
}

TEST_CASE("Image construction") {
  Image img(3, 2, 2, 0.25f);
  CHECK(img.data.size() == 12);
  CHECK(img.at(2, 1, 1) == 0.25f);
  CHECK_THROWS_AS(Image(0, 2, 2), std::invalid_argument);
  CHECK_THROWS_AS(Image(1, 2, 2, std::vector<float>{0.f}), std::invalid_argument);
}

TEST_CASE("AnnotatedSample validation") {
  AnnotatedSample s = make_sample("ok", 2, 2);
  CHECK_NOTHROW(s.validate());

  AnnotatedSample empty = s;
  empty.annotations.clear();
  CHECK_THROWS_AS(empty.validate(), std::invalid_argument);

  AnnotatedSample mismatch = s;
  mismatch.annotations[0].mask = SegmentationMask(8, 8);
  CHECK_THROWS_AS(mismatch.validate(), std::invalid_argument);
}

TEST_CASE("one_hot_tile basic shapes") {
  const Image block = one_hot_tile(LabelStyle(2, 3), 4, 4);
  CHECK(block.channels == 3);
  CHECK(block.height == 4);
  CHECK(block.width == 4);
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      CHECK(block.at(0, r, c) == 0.0f);
      CHECK(block.at(1, r, c) == 0.0f);
      CHECK(block.at(2, r, c) == 1.0f);
    }
  }

  const Image single = one_hot_tile(LabelStyle(0, 1), 2, 2);
  CHECK(single.channels == 1);
  CHECK(std::all_of(single.data.begin(), single.data.end(),
                    [](float v) { return v == 1.0f; }));

  CHECK_THROWS_AS(one_hot_tile(LabelStyle(0, 1), 0, 4), std::invalid_argument);
}

TEST_CASE("one_hot_tile sums to H*W") {
  const Image big = one_hot_tile(LabelStyle(1, 2), 128, 128);
  double sum = 0.0;
  for (float v : big.data) sum += v;
  CHECK(sum == 128.0 * 128.0);

  Rng rng(11);
  for (int t = 0; t < 20; ++t) {
    const int ns = rng.uniform_int(1, 5);
    const int id = rng.uniform_int(0, ns - 1);
    const int h = rng.uniform_int(1, 17);
    const int w = rng.uniform_int(1, 17);
    const Image block = one_hot_tile(LabelStyle(id, ns), h, w);
    double s = 0.0;
    for (float v : block.data) s += v;
    CHECK(s == static_cast<double>(h) * w);
  }
}

TEST_CASE("concat_style shapes and exact channel carryover") {
  {
    const Image img(3, 256, 256, 0.5f);
    const Image block = one_hot_tile(LabelStyle(1, 3), 256, 256);
    const Image cat = concat_style(img, block);
    CHECK(cat.channels == 6);
    CHECK(cat.height == 256);
    CHECK(cat.width == 256);
  }
  {
    const Image img(1, 128, 128, 0.25f);
    const Image cat = concat_style(img, one_hot_tile(LabelStyle(0, 2), 128, 128));
    CHECK(cat.channels == 3);
  }

  Rng rng(5);
  Image img(2, 9, 7);
  for (float& v : img.data) v = static_cast<float>(rng.uniform());
  const Image cat = concat_style(img, one_hot_tile(LabelStyle(1, 3), 9, 7));
  CHECK(drop_trailing_channels(cat, 3) == img);

  CHECK_THROWS_AS(concat_style(img, one_hot_tile(LabelStyle(0, 1), 4, 4)),
                  std::invalid_argument);
}

TEST_CASE("split sizes follow floor arithmetic") {
  const SplitRatios ratios;
  SplitSizes s = split_sizes(10, ratios);
  CHECK(s.train == 6);
  CHECK(s.val == 2);
  CHECK(s.test == 2);

  s = split_sizes(651, ratios);
  CHECK(s.train == 390);
  CHECK(s.val == 130);
  CHECK(s.test == 131);
}

TEST_CASE("split_dataset partitions deterministically") {
  std::vector<AnnotatedSample> samples;
  for (int i = 0; i < 10; ++i) {
    samples.push_back(make_sample("s" + std::to_string(i)));
  }

  const DatasetSplit a = split_dataset(samples, SplitRatios{}, 7);
  CHECK(a.train.size() == 6);
  CHECK(a.val.size() == 2);
  CHECK(a.test.size() == 2);

  const DatasetSplit b = split_dataset(samples, SplitRatios{}, 7);
  for (std::size_t i = 0; i < a.train.size(); ++i) {
    CHECK(a.train[i].sample_id == b.train[i].sample_id);
  }
  for (std::size_t i = 0; i < a.test.size(); ++i) {
    CHECK(a.test[i].sample_id == b.test[i].sample_id);
  }

  std::set<std::string> seen;
  for (const auto* bucket : {&a.train, &a.val, &a.test}) {
    for (const auto& s : *bucket) {
      CHECK(seen.insert(s.sample_id).second);  // disjoint
    }
  }
  CHECK(seen.size() == samples.size());  // union = input
}

TEST_CASE("651 samples with 6 annotations give the documented pair counts") {
  std::vector<AnnotatedSample> samples;
  for (int i = 0; i < 651; ++i) {
    samples.push_back(make_sample("cell" + std::to_string(i), 6, 2));
  }
  const DatasetSplit split = split_dataset(samples, SplitRatios{}, 1);
  CHECK(count_pairs(split.train) == 2340);
  CHECK(count_pairs(split.val) == 780);
  CHECK(count_pairs(split.test) == 786);
  CHECK(count_pairs_of_style(split.train, 0) == 1170);
  CHECK(count_pairs_of_style(split.train, 1) == 1170);
}

TEST_CASE("split_dataset rejects bad inputs") {
  std::vector<AnnotatedSample> four;
  for (int i = 0; i < 4; ++i) four.push_back(make_sample("x" + std::to_string(i)));
  CHECK_THROWS_AS(split_dataset(four, SplitRatios{}, 1), std::invalid_argument);

  std::vector<AnnotatedSample> ten;
  for (int i = 0; i < 10; ++i) ten.push_back(make_sample("y" + std::to_string(i)));
  CHECK_THROWS_AS(split_dataset(ten, SplitRatios{0.5, 0.2, 0.2}, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(split_dataset(ten, SplitRatios{1.0, 0.0, 0.0}, 1),
                  std::invalid_argument);
}

TEST_CASE("mix_seed separates streams") {
  CHECK(mix_seed(1, 0) != mix_seed(1, 1));
  CHECK(mix_seed(1, 0) != mix_seed(2, 0));
  CHECK(mix_seed(42, 7) == mix_seed(42, 7));
}

TEST_CASE("Rng uniform stays in range and is deterministic") {
  Rng a(123), b(123);
  for (int i = 0; i < 1000; ++i) {
    const double u = a.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(u == b.uniform());
  }
  for (int i = 0; i < 1000; ++i) {
    const int v = a.uniform_int(-3, 5);
    CHECK(v >= -3);
    CHECK(v <= 5);
  }
}

TEST_CASE("Rng normal has the right first two moments") {
  Rng rng(999);
  const int n = 100000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    sum += x;
    sq += x * x;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  CHECK(std::abs(mean) < 0.015);
  CHECK(std::abs(var - 1.0) < 0.03);
}

TEST_CASE("Rng shuffle is a permutation") {
  std::vector<int> items(50);
  for (int i = 0; i < 50; ++i) items[i] = i;
  Rng rng(3);
  rng.shuffle(items);
  std::vector<int> sorted = items;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 50; ++i) CHECK(sorted[i] == i);
}
