#pragma once

#include <cstdint>
#include <vector>

#include "styleseg/core/types.hpp"

namespace styleseg {

/// Number of samples per bucket for a dataset of size n: train and val
/// take floor(n * ratio) each (with a tiny epsilon so exact products such
/// as 651 * 0.6 do not round down), test takes the remainder.
struct SplitSizes {
  int train = 0;
  int val = 0;
  int test = 0;
};
SplitSizes split_sizes(int n, const SplitRatios& ratios);

/// Shuffles the samples with the given seed and partitions them image-wise
/// (a sample with all its annotations lands in exactly one bucket).
/// Requires ratios summing to 1, n >= 5, and every bucket non-empty.
DatasetSplit split_dataset(std::vector<AnnotatedSample> samples,
                           const SplitRatios& ratios, std::uint64_t seed);

}  // namespace styleseg
