#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace styleseg {

enum class ModelKind { kCProbUNet, kCSSN };

/// Training regimes:
///   conditioned  - style-aware model trained on every (image, annotation,
///                  style) triple
///   all          - unconditioned model trained on every pair, styles mixed
///   subset       - unconditioned model trained only on pairs of
///                  subset_style
enum class ConditioningMode { kConditioned, kAll, kSubset };

std::string to_string(ModelKind kind);
std::string to_string(ConditioningMode mode);
ModelKind model_kind_from_string(const std::string& name);
ConditioningMode conditioning_from_string(const std::string& name);

/// Resolved description of one training run. Serialized verbatim into
/// runs/<run_id>/config.json so every reported number traces back to a
/// config and a seed.
struct ExperimentConfig {
  std::string run_id;
  ModelKind model = ModelKind::kCProbUNet;
  ConditioningMode conditioning = ConditioningMode::kConditioned;
  int subset_style = 0;

  /// Replaces every annotation of a style > 0 with a dilate-and-blur
  /// coarsened copy of the sample's first style-0 annotation, turning the
  /// coarse styles into synthetic augmentations of the fine one.
  bool augment_baseline = false;
  int augment_radius = 5;
  double augment_sigma = 2.0;

  std::string dataset_root;
  std::string output_root = "runs";

  double learning_rate = 1e-4;
  int epochs = 20;
  int batch_size = 16;

  double beta = 1.0;     // probabilistic U-net KL weight
  int latent_dim = 6;    // probabilistic U-net latent size
  int mc_samples = 20;   // stochastic segmentation net loss samples
  int rank = 10;         // stochastic segmentation net covariance rank

  int base_channels = 32;
  int depth = 4;
  double dropout_p = 0.5;
  std::string normalization = "none";

  std::uint64_t seed = 0;
  int eval_samples = 100;  // predictive draws per image at evaluation time

  std::string run_dir() const;
  void validate() const;
  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
  bool operator==(const ExperimentConfig&) const = default;

  /// Paper-scale presets: skin-lesion regime (600 epochs, batch 16) and
  /// phase-contrast regime (200 epochs, batch 32), both at learning rate
  /// 1e-4. The desk preset is the small synthetic regime every test and
  /// acceptance run uses: 64x64 inputs, base 16, at most 30 epochs.
  static ExperimentConfig isic_like();
  static ExperimentConfig phc_like();
  static ExperimentConfig synthetic_desk();
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

/// Everything a run leaves behind besides the checkpoints themselves.
struct RunRecord {
  ExperimentConfig config;
  std::vector<EpochStats> curve;
  int best_epoch = -1;  // -1 when epochs == 0 (untrained checkpoint)
  double best_val_loss = 0.0;
  std::string best_checkpoint;
  std::string last_checkpoint;

  /// Audit counters: pairs per style actually used for gradient steps.
  /// Subset runs must show zeros everywhere except the subset style.
  std::vector<long> style_pairs_used;
  long augmented_pairs = 0;

  /// Single-threaded CPU backend; results are reproducible bit-for-bit.
  std::string backend = "cpu-deterministic";

  nlohmann::json to_json() const;
  static RunRecord from_json(const nlohmann::json& j);
};

/// Prefixes a relative path with $STYLESEG_DATA_ROOT when the variable is
/// set; absolute paths and unset environments pass through unchanged.
std::string resolve_data_path(const std::string& path);

}  // namespace styleseg
