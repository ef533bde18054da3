#include "styleseg/data/dataset_io.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "styleseg/core/split.hpp"
#include "styleseg/data/png_io.hpp"

namespace fs = std::filesystem;

namespace styleseg {

std::vector<AnnotatedSample>& LoadedDataset::bucket(const std::string& name) {
  if (name == "train") return split.train;
  if (name == "val") return split.val;
  if (name == "test") return split.test;
  throw std::invalid_argument("unknown split bucket: " + name);
}

const std::vector<AnnotatedSample>& LoadedDataset::bucket(
    const std::string& name) const {
  return const_cast<LoadedDataset*>(this)->bucket(name);
}

namespace {

void write_samples(const fs::path& root, const std::vector<AnnotatedSample>& bucket,
                   const std::string& bucket_name,
                   const std::map<std::string, SegmentationMask>& truths,
                   nlohmann::json& manifest_samples) {
  for (const auto& sample : bucket) {
    const fs::path dir = root / sample.sample_id;
    fs::create_directories(dir);
    write_png((dir / "image.png").string(), sample.image);

    nlohmann::json entry;
    entry["id"] = sample.sample_id;
    entry["split"] = bucket_name;
    entry["annotations"] = nlohmann::json::array();
    for (std::size_t k = 0; k < sample.annotations.size(); ++k) {
      const auto& ann = sample.annotations[k];
      const std::string file =
          "ann_" + std::to_string(k) + "_style" + std::to_string(ann.style.id) +
          ".png";
      write_png_mask((dir / file).string(), ann.mask);
      entry["annotations"].push_back({{"file", file}, {"style", ann.style.id}});
    }
    if (const auto it = truths.find(sample.sample_id); it != truths.end()) {
      write_png_mask((dir / "truth.png").string(), it->second);
      entry["truth"] = "truth.png";
    }
    manifest_samples.push_back(std::move(entry));
  }
}

}  // namespace

void save_dataset(const std::string& root, const DatasetSplit& split,
                  int num_styles,
                  const std::map<std::string, SegmentationMask>& truths,
                  const nlohmann::json& generator_info) {
  fs::create_directories(root);

  nlohmann::json manifest;
  manifest["format"] = kDatasetFormatTag;
  manifest["num_styles"] = num_styles;
  manifest["seed"] = split.seed;
  manifest["ratios"] = {split.ratios.train, split.ratios.val, split.ratios.test};
  manifest["samples"] = nlohmann::json::array();
  write_samples(root, split.train, "train", truths, manifest["samples"]);
  write_samples(root, split.val, "val", truths, manifest["samples"]);
  write_samples(root, split.test, "test", truths, manifest["samples"]);
  if (!generator_info.is_null()) manifest["generator"] = generator_info;

  std::ofstream out(fs::path(root) / "manifest.json");
  if (!out) throw std::runtime_error("save_dataset: cannot write manifest");
  out << manifest.dump(2) << "\n";
}

LoadedDataset load_dataset(const std::string& root) {
  const fs::path root_path(root);
  std::ifstream in(root_path / "manifest.json");
  if (!in) {
    throw std::runtime_error("load_dataset: missing manifest.json in " + root);
  }
  nlohmann::json manifest;
  in >> manifest;
  if (manifest.value("format", "") != kDatasetFormatTag) {
    throw std::runtime_error("load_dataset: unrecognized dataset format tag");
  }

  LoadedDataset loaded;
  loaded.num_styles = manifest.at("num_styles").get<int>();
  loaded.split.seed = manifest.value("seed", 0ULL);
  if (manifest.contains("ratios")) {
    const auto& r = manifest["ratios"];
    loaded.split.ratios = {r.at(0).get<double>(), r.at(1).get<double>(),
                           r.at(2).get<double>()};
  }
  if (manifest.contains("generator")) {
    loaded.generator_info = manifest["generator"];
  }

  for (const auto& entry : manifest.at("samples")) {
    const std::string id = entry.at("id").get<std::string>();
    const fs::path dir = root_path / id;

    AnnotatedSample sample;
    sample.sample_id = id;
    sample.image = read_png((dir / "image.png").string());
    for (const auto& ann : entry.at("annotations")) {
      sample.annotations.push_back(
          {read_png_mask((dir / ann.at("file").get<std::string>()).string()),
           LabelStyle(ann.at("style").get<int>(), loaded.num_styles)});
    }
    sample.validate();
    if (entry.contains("truth")) {
      loaded.truths.emplace(
          id, read_png_mask((dir / entry.at("truth").get<std::string>()).string()));
    }
    loaded.bucket(entry.at("split").get<std::string>()).push_back(std::move(sample));
  }
  return loaded;
}

void save_mask_archive(const std::string& path,
                       const PredictiveSampleSet& samples) {
  samples.validate();
  const int h = samples.masks.front().height;
  const int w = samples.masks.front().width;

  SegmentationMask pages(h * samples.n(), w);
  for (int i = 0; i < samples.n(); ++i) {
    const auto& mask = samples.masks[i];
    std::copy(mask.grid.begin(), mask.grid.end(),
              pages.grid.begin() + static_cast<std::size_t>(i) * h * w);
  }
  write_png_mask(path, pages);

  nlohmann::json sidecar;
  sidecar["format"] = "styleseg-mask-archive-v1";
  sidecar["pages"] = samples.n();
  sidecar["height"] = h;
  sidecar["width"] = w;
  sidecar["source"] = samples.source;
  if (samples.conditioning) {
    sidecar["conditioning"] = {{"id", samples.conditioning->id},
                               {"num_styles", samples.conditioning->num_styles}};
  } else {
    sidecar["conditioning"] = nullptr;
  }
  std::ofstream out(path + ".json");
  if (!out) throw std::runtime_error("save_mask_archive: cannot write sidecar");
  out << sidecar.dump(2) << "\n";
}

PredictiveSampleSet load_mask_archive(const std::string& path) {
  std::ifstream in(path + ".json");
  if (!in) {
    throw std::runtime_error("load_mask_archive: missing sidecar " + path +
                             ".json");
  }
  nlohmann::json sidecar;
  in >> sidecar;
  if (sidecar.value("format", "") != "styleseg-mask-archive-v1") {
    throw std::runtime_error("load_mask_archive: unrecognized archive format");
  }
  const int pages = sidecar.at("pages").get<int>();
  const int h = sidecar.at("height").get<int>();
  const int w = sidecar.at("width").get<int>();

  const SegmentationMask stacked = read_png_mask(path);
  if (stacked.height != pages * h || stacked.width != w) {
    throw std::runtime_error("load_mask_archive: page shape does not match PNG");
  }

  PredictiveSampleSet samples;
  samples.source = sidecar.value("source", "");
  if (!sidecar.at("conditioning").is_null()) {
    const auto& c = sidecar["conditioning"];
    samples.conditioning =
        LabelStyle(c.at("id").get<int>(), c.at("num_styles").get<int>());
  }
  for (int i = 0; i < pages; ++i) {
    SegmentationMask mask(h, w);
    const auto begin =
        stacked.grid.begin() + static_cast<std::size_t>(i) * h * w;
    std::copy(begin, begin + static_cast<std::size_t>(h) * w, mask.grid.begin());
    samples.masks.push_back(std::move(mask));
  }
  samples.validate();
  return samples;
}

inline constexpr const char* kFramesFormatTag = "styleseg-frames-v1";

void save_frames(const std::string& root, const std::vector<FullFrame>& frames,
                 int num_styles) {
  fs::create_directories(root);
  nlohmann::json manifest;
  manifest["format"] = kFramesFormatTag;
  manifest["num_styles"] = num_styles;
  manifest["frames"] = nlohmann::json::array();

  for (const auto& frame : frames) {
    const fs::path dir = fs::path(root) / frame.frame_id;
    fs::create_directories(dir);
    write_png((dir / "image.png").string(), frame.image);
    write_png_mask((dir / "instances.png").string(), frame.gt_instances);

    nlohmann::json entry;
    entry["id"] = frame.frame_id;
    entry["annotations"] = nlohmann::json::array();
    for (std::size_t k = 0; k < frame.annotations.size(); ++k) {
      const auto& ann = frame.annotations[k];
      const std::string file = "ann_" + std::to_string(k) + "_style" +
                               std::to_string(ann.style.id) + ".png";
      write_png_mask((dir / file).string(), ann.mask);
      entry["annotations"].push_back({{"file", file}, {"style", ann.style.id}});
    }
    manifest["frames"].push_back(std::move(entry));
  }

  std::ofstream out(fs::path(root) / "manifest.json");
  if (!out) throw std::runtime_error("save_frames: cannot write manifest");
  out << manifest.dump(2) << "\n";
}

namespace {

nlohmann::json read_frames_manifest(const std::string& root) {
  std::ifstream in(fs::path(root) / "manifest.json");
  if (!in) {
    throw std::runtime_error("load_frames: missing manifest.json in " + root);
  }
  nlohmann::json manifest;
  in >> manifest;
  if (manifest.value("format", "") != kFramesFormatTag) {
    throw std::runtime_error("load_frames: unrecognized frames format tag");
  }
  return manifest;
}

}  // namespace

std::vector<FullFrame> load_frames(const std::string& root) {
  const auto manifest = read_frames_manifest(root);
  const int num_styles = manifest.at("num_styles").get<int>();

  std::vector<FullFrame> frames;
  for (const auto& entry : manifest.at("frames")) {
    FullFrame frame;
    frame.frame_id = entry.at("id").get<std::string>();
    const fs::path dir = fs::path(root) / frame.frame_id;
    frame.image = read_png((dir / "image.png").string());
    frame.gt_instances = read_png_mask((dir / "instances.png").string());
    for (const auto& ann : entry.at("annotations")) {
      frame.annotations.push_back(
          {read_png_mask((dir / ann.at("file").get<std::string>()).string()),
           LabelStyle(ann.at("style").get<int>(), num_styles)});
    }
    frames.push_back(std::move(frame));
  }
  return frames;
}

int frames_num_styles(const std::string& root) {
  return read_frames_manifest(root).at("num_styles").get<int>();
}

void save_synthetic_dataset(const std::string& root,
                            const SyntheticDataset& dataset,
                            const SplitRatios& ratios, std::uint64_t split_seed) {
  std::map<std::string, SegmentationMask> truths;
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    truths.emplace(dataset.samples[i].sample_id, dataset.true_masks[i]);
  }

  nlohmann::json generator;
  generator["type"] = "synthetic-ellipse-v1";
  generator["image_size"] = dataset.image_size;
  generator["annotators_per_style"] = dataset.annotators_per_style;
  generator["seed"] = dataset.seed;
  generator["styles"] = nlohmann::json::array();
  for (const auto& spec : dataset.specs) {
    generator["styles"].push_back(
        {{"id", spec.style_id.id},
         {"offset_mean", spec.boundary_offset_mean},
         {"offset_std", spec.boundary_offset_std},
         {"smoothing_sigma", spec.smoothing_sigma}});
  }

  const DatasetSplit split =
      split_dataset(dataset.samples, ratios, split_seed);
  save_dataset(root, split, static_cast<int>(dataset.specs.size()), truths,
               generator);
}

}  // namespace styleseg
