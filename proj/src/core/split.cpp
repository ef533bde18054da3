#include "styleseg/core/split.hpp"

#include <cmath>
#include <stdexcept>

#include "styleseg/core/rng.hpp"

namespace styleseg {

SplitSizes split_sizes(int n, const SplitRatios& ratios) {
  SplitSizes s;
  s.train = static_cast<int>(std::floor(n * ratios.train + 1e-9));
  s.val = static_cast<int>(std::floor(n * ratios.val + 1e-9));
  s.test = n - s.train - s.val;
  return s;
}

DatasetSplit split_dataset(std::vector<AnnotatedSample> samples,
                           const SplitRatios& ratios, std::uint64_t seed) {
  if (std::abs(ratios.sum() - 1.0) > 1e-9) {
    throw std::invalid_argument("split_dataset: ratios must sum to 1");
  }
  if (ratios.train <= 0.0 || ratios.val <= 0.0 || ratios.test <= 0.0) {
    throw std::invalid_argument("split_dataset: ratios must be positive");
  }
  const int n = static_cast<int>(samples.size());
  const SplitSizes sizes = split_sizes(n, ratios);
  if (n < 5 || sizes.train < 1 || sizes.val < 1 || sizes.test < 1) {
    throw std::invalid_argument(
        "split_dataset: too few samples for a three-way split");
  }

  Rng rng(seed);
  rng.shuffle(samples);

  DatasetSplit split;
  split.ratios = ratios;
  split.seed = seed;
  split.train.assign(samples.begin(), samples.begin() + sizes.train);
  split.val.assign(samples.begin() + sizes.train,
                   samples.begin() + sizes.train + sizes.val);
  split.test.assign(samples.begin() + sizes.train + sizes.val, samples.end());
  return split;
}

}  // namespace styleseg
