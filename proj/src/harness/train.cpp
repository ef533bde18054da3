#include "styleseg/harness/train.hpp"

#include <torch/torch.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <vector>

#include "styleseg/core/rng.hpp"
#include "styleseg/data/augment.hpp"
#include "styleseg/models/cprob_unet.hpp"
#include "styleseg/models/cssn.hpp"
#include "styleseg/nn/checkpoint.hpp"
#include "styleseg/nn/torch_bridge.hpp"

namespace fs = std::filesystem;

namespace styleseg {

nlohmann::json model_config_json(const ExperimentConfig& config,
                                 int num_styles, int image_channels) {
  const bool conditioned = config.conditioning == ConditioningMode::kConditioned;
  if (config.model == ModelKind::kCProbUNet) {
    CProbUNetConfig m;
    m.image_channels = image_channels;
    m.num_styles = num_styles;
    m.conditioned = conditioned;
    m.latent_dim = config.latent_dim;
    m.base_channels = config.base_channels;
    m.depth = config.depth;
    m.beta = config.beta;
    m.dropout_p = config.dropout_p;
    m.normalization = config.normalization;
    m.validate();
    return m.to_json();
  }
  CSSNConfig m;
  m.image_channels = image_channels;
  m.num_styles = num_styles;
  m.conditioned = conditioned;
  m.rank = config.rank;
  m.mc_samples = config.mc_samples;
  m.base_channels = config.base_channels;
  m.depth = config.depth;
  m.dropout_p = config.dropout_p;
  m.normalization = config.normalization;
  m.validate();
  return m.to_json();
}

namespace {

struct PairRef {
  int sample = 0;
  int annotation = 0;
};

// Seed-stream tags so the independent randomness sources (init, loss noise,
// validation noise, batch order, dropout) never collide.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kTrainNoiseStream = 2;
constexpr std::uint64_t kValNoiseStream = 3;
constexpr std::uint64_t kOrderStream = 4;
constexpr std::uint64_t kDropoutStream = 5;

std::vector<PairRef> pair_refs(const std::vector<AnnotatedSample>& samples,
                               const ExperimentConfig& config,
                               const std::string& bucket_name) {
  std::vector<PairRef> refs;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& anns = samples[i].annotations;
    for (std::size_t k = 0; k < anns.size(); ++k) {
      if (config.conditioning == ConditioningMode::kSubset &&
          anns[k].style.id != config.subset_style) {
        continue;
      }
      refs.push_back({static_cast<int>(i), static_cast<int>(k)});
    }
  }
  if (refs.empty()) {
    throw std::runtime_error("no trainable annotation pairs in the " +
                             bucket_name + " split (subset style " +
                             std::to_string(config.subset_style) + " missing?)");
  }
  return refs;
}

// The "(aug)" baseline: every annotation of a style above 0 is replaced by
// a dilated-and-blurred copy of the sample's first style-0 annotation, so
// the coarse styles the model sees are synthetic, not human.
long apply_augment_baseline(std::vector<AnnotatedSample>& samples,
                            const ExperimentConfig& config) {
  long replaced = 0;
  for (auto& sample : samples) {
    const Annotation* fine = nullptr;
    for (const auto& ann : sample.annotations) {
      if (ann.style.id == 0) {
        fine = &ann;
        break;
      }
    }
    if (fine == nullptr) {
      throw std::runtime_error(
          "augment baseline requires a style-0 annotation on sample " +
          sample.sample_id);
    }
    const SegmentationMask coarse = dilate_blur_augment(
        fine->mask, config.augment_radius, config.augment_sigma);
    for (auto& ann : sample.annotations) {
      if (ann.style.id != 0) {
        ann.mask = coarse;
        ++replaced;
      }
    }
  }
  return replaced;
}

struct Batch {
  torch::Tensor images;       // N x C x H x W
  torch::Tensor annotations;  // N x 1 x H x W
  torch::Tensor style_ids;    // N, int64
  std::vector<std::string> sample_ids;
  int size = 0;
};

Batch assemble(const std::vector<AnnotatedSample>& samples,
               const std::vector<PairRef>& refs, std::size_t begin,
               std::size_t end) {
  std::vector<torch::Tensor> images, annotations;
  std::vector<std::int64_t> styles;
  Batch batch;
  for (std::size_t i = begin; i < end; ++i) {
    const auto& sample = samples[refs[i].sample];
    const auto& ann = sample.annotations[refs[i].annotation];
    images.push_back(to_tensor(sample.image));
    annotations.push_back(to_tensor(ann.mask));
    styles.push_back(ann.style.id);
    batch.sample_ids.push_back(sample.sample_id);
  }
  batch.images = torch::cat(images, 0);
  batch.annotations = torch::cat(annotations, 0);
  batch.style_ids = torch::tensor(styles, torch::kInt64);
  batch.size = static_cast<int>(end - begin);
  return batch;
}

// Single entry point for both model families so the epoch loop below stays
// model-agnostic.
struct ModelHandle {
  CProbUNet cprob{nullptr};
  CSSN cssn{nullptr};

  torch::nn::Module& module() {
    if (cprob) return *cprob;
    return *cssn;
  }
  void train_mode(bool on) {
    if (cprob) cprob->train(on);
    if (cssn) cssn->train(on);
  }
  torch::Tensor loss(const ExperimentConfig& config, const Batch& batch,
                     at::Generator& gen) {
    if (cprob) {
      return cprob->elbo_loss(batch.images, batch.annotations, batch.style_ids,
                              config.beta, gen);
    }
    return cssn->ssn_loss(batch.images, batch.annotations, batch.style_ids,
                          config.mc_samples, gen);
  }
};

ModelHandle build_model(const nlohmann::json& model_config, ModelKind kind) {
  ModelHandle handle;
  if (kind == ModelKind::kCProbUNet) {
    handle.cprob = CProbUNet(CProbUNetConfig::from_json(model_config));
  } else {
    handle.cssn = CSSN(CSSNConfig::from_json(model_config));
  }
  return handle;
}

void write_json_file(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

}  // namespace

RunRecord train(const ExperimentConfig& config) {
  return train(config, load_dataset(resolve_data_path(config.dataset_root)));
}

RunRecord train(const ExperimentConfig& config, const LoadedDataset& dataset) {
  config.validate();
  if (dataset.split.train.empty() || dataset.split.val.empty()) {
    throw std::runtime_error("dataset has an empty train or val split");
  }

  std::vector<AnnotatedSample> train_samples = dataset.split.train;
  std::vector<AnnotatedSample> val_samples = dataset.split.val;

  RunRecord record;
  record.config = config;
  record.style_pairs_used.assign(dataset.num_styles, 0);
  if (config.augment_baseline) {
    record.augmented_pairs += apply_augment_baseline(train_samples, config);
    record.augmented_pairs += apply_augment_baseline(val_samples, config);
  }

  const auto train_refs = pair_refs(train_samples, config, "train");
  const auto val_refs = pair_refs(val_samples, config, "val");

  const fs::path run_dir = config.run_dir();
  const fs::path ckpt_dir = run_dir / "checkpoints";
  fs::create_directories(ckpt_dir);
  write_json_file(run_dir / "config.json", config.to_json());

  const int image_channels = train_samples.front().image.channels;
  const nlohmann::json model_config =
      model_config_json(config, dataset.num_styles, image_channels);

  torch::manual_seed(mix_seed(config.seed, kInitStream));
  ModelHandle model = build_model(model_config, config.model);

  torch::optim::Adam optimizer(model.module().parameters(),
                               torch::optim::AdamOptions(config.learning_rate));
  auto train_noise =
      make_generator(mix_seed(config.seed, kTrainNoiseStream));

  record.best_checkpoint = (ckpt_dir / "best.ckpt").string();
  record.last_checkpoint = (ckpt_dir / "last.ckpt").string();
  record.best_val_loss = std::numeric_limits<double>::infinity();

  auto mutable_refs = train_refs;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    model.train_mode(true);
    torch::manual_seed(
        mix_seed(mix_seed(config.seed, kDropoutStream), epoch));
    Rng order_rng(mix_seed(mix_seed(config.seed, kOrderStream), epoch));
    order_rng.shuffle(mutable_refs);

    double train_loss_sum = 0.0;
    long train_pairs = 0;
    for (std::size_t begin = 0; begin < mutable_refs.size();
         begin += config.batch_size) {
      const std::size_t end =
          std::min(begin + config.batch_size, mutable_refs.size());
      const Batch batch = assemble(train_samples, mutable_refs, begin, end);

      optimizer.zero_grad();
      auto loss = model.loss(config, batch, train_noise);
      const double loss_value = loss.item<double>();
      if (!std::isfinite(loss_value)) {
        save_module_checkpoint((ckpt_dir / "diagnostic.ckpt").string(),
                               model_config, model.module());
        write_json_file(run_dir / "diagnostic.json",
                        {{"epoch", epoch},
                         {"batch_start", begin},
                         {"loss", std::to_string(loss_value)},
                         {"sample_ids", batch.sample_ids}});
        throw std::runtime_error(
            "training loss became non-finite at epoch " +
            std::to_string(epoch) + "; diagnostic snapshot written to " +
            run_dir.string());
      }
      loss.backward();
      optimizer.step();

      train_loss_sum += loss_value * batch.size;
      train_pairs += batch.size;
      for (int i = 0; i < batch.size; ++i) {
        ++record.style_pairs_used[batch.style_ids[i].item<std::int64_t>()];
      }
    }

    // Validation noise restarts from the same stream every epoch, so the
    // numbers are comparable and best-epoch selection is stable.
    model.train_mode(false);
    auto val_noise = make_generator(mix_seed(config.seed, kValNoiseStream));
    double val_loss_sum = 0.0;
    long val_pairs = 0;
    {
      torch::NoGradGuard no_grad;
      for (std::size_t begin = 0; begin < val_refs.size();
           begin += config.batch_size) {
        const std::size_t end =
            std::min(begin + config.batch_size, val_refs.size());
        const Batch batch = assemble(val_samples, val_refs, begin, end);
        val_loss_sum +=
            model.loss(config, batch, val_noise).item<double>() * batch.size;
        val_pairs += batch.size;
      }
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = train_loss_sum / static_cast<double>(train_pairs);
    stats.val_loss = val_loss_sum / static_cast<double>(val_pairs);
    record.curve.push_back(stats);

    if (stats.val_loss < record.best_val_loss) {
      record.best_val_loss = stats.val_loss;
      record.best_epoch = epoch;
      save_module_checkpoint(record.best_checkpoint, model_config,
                             model.module());
    }
  }

  model.train_mode(false);
  save_module_checkpoint(record.last_checkpoint, model_config, model.module());
  if (config.epochs == 0) {
    // Untrained run: the fresh initialization is both first and best.
    record.best_val_loss = 0.0;
    save_module_checkpoint(record.best_checkpoint, model_config,
                           model.module());
  }

  write_json_file(run_dir / "record.json", record.to_json());
  return record;
}

RunRecord load_run_record(const std::string& run_dir) {
  std::ifstream in(fs::path(run_dir) / "record.json");
  if (!in) {
    throw std::runtime_error("load_run_record: missing record.json in " +
                             run_dir);
  }
  nlohmann::json j;
  in >> j;
  return RunRecord::from_json(j);
}

}  // namespace styleseg
