#pragma once

#include <map>
#include <string>

#include "json.hpp"
#include "styleseg/core/types.hpp"
#include "styleseg/data/curation.hpp"
#include "styleseg/data/synthetic.hpp"
#include "styleseg/metrics/metrics.hpp"

namespace styleseg {

/// On-disk layout under `root`:
///   manifest.json
///   <sample_id>/image.png
///   <sample_id>/ann_<k>_style<l>.png
///   <sample_id>/truth.png            (synthetic datasets only)
/// The manifest records format tag, num_styles, ratios, seed, split
/// membership, per-sample annotation listing, and optional generator info.
inline constexpr const char* kDatasetFormatTag = "styleseg-dataset-v1";

struct LoadedDataset {
  DatasetSplit split;
  int num_styles = 0;
  std::map<std::string, SegmentationMask> truths;
  nlohmann::json generator_info;  // null when the dataset was not generated

  std::vector<AnnotatedSample>& bucket(const std::string& name);
  const std::vector<AnnotatedSample>& bucket(const std::string& name) const;
};

void save_dataset(const std::string& root, const DatasetSplit& split,
                  int num_styles,
                  const std::map<std::string, SegmentationMask>& truths = {},
                  const nlohmann::json& generator_info = nullptr);

LoadedDataset load_dataset(const std::string& root);

/// Splits a synthetic dataset by sample and writes it with its truth masks
/// and generator parameters attached.
void save_synthetic_dataset(const std::string& root,
                            const SyntheticDataset& dataset,
                            const SplitRatios& ratios, std::uint64_t split_seed);

/// Multi-page mask archive: the n pages are stacked vertically into one
/// (n*H) x W PNG at `path`, with a `<path>.json` sidecar recording the page
/// count, page shape, sample source and conditioning. Requires n >= 1.
void save_mask_archive(const std::string& path,
                       const PredictiveSampleSet& samples);
PredictiveSampleSet load_mask_archive(const std::string& path);

/// Full-frame recordings for the curation pipeline. Layout under `root`:
///   manifest.json                      (format tag, num_styles, frame list)
///   <frame_id>/image.png
///   <frame_id>/instances.png           (ground-truth instance foreground)
///   <frame_id>/ann_<k>_style<l>.png
void save_frames(const std::string& root, const std::vector<FullFrame>& frames,
                 int num_styles);
std::vector<FullFrame> load_frames(const std::string& root);
int frames_num_styles(const std::string& root);

}  // namespace styleseg
