#include "styleseg/harness/experiment.hpp"

#include <cstdlib>
#include <filesystem>
#include <stdexcept>

namespace styleseg {

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kCProbUNet: return "cprob_unet";
    case ModelKind::kCSSN: return "cssn";
  }
  throw std::logic_error("unhandled ModelKind");
}

std::string to_string(ConditioningMode mode) {
  switch (mode) {
    case ConditioningMode::kConditioned: return "conditioned";
    case ConditioningMode::kAll: return "all";
    case ConditioningMode::kSubset: return "subset";
  }
  throw std::logic_error("unhandled ConditioningMode");
}

ModelKind model_kind_from_string(const std::string& name) {
  if (name == "cprob_unet") return ModelKind::kCProbUNet;
  if (name == "cssn") return ModelKind::kCSSN;
  throw std::invalid_argument("unknown model kind: " + name);
}

ConditioningMode conditioning_from_string(const std::string& name) {
  if (name == "conditioned") return ConditioningMode::kConditioned;
  if (name == "all") return ConditioningMode::kAll;
  if (name == "subset") return ConditioningMode::kSubset;
  throw std::invalid_argument("unknown conditioning mode: " + name);
}

std::string ExperimentConfig::run_dir() const {
  return (std::filesystem::path(output_root) / run_id).string();
}

void ExperimentConfig::validate() const {
  if (run_id.empty()) throw std::invalid_argument("run_id must be set");
  if (run_id.find('/') != std::string::npos ||
      run_id.find("..") != std::string::npos) {
    throw std::invalid_argument("run_id must be a plain directory name");
  }
  if (dataset_root.empty()) {
    throw std::invalid_argument("dataset_root must be set");
  }
  if (learning_rate <= 0.0) {
    throw std::invalid_argument("learning_rate must be positive");
  }
  if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (beta < 0.0) throw std::invalid_argument("beta must be >= 0");
  if (latent_dim < 1) throw std::invalid_argument("latent_dim must be >= 1");
  if (mc_samples < 1) throw std::invalid_argument("mc_samples must be >= 1");
  if (rank < 0) throw std::invalid_argument("rank must be >= 0");
  if (subset_style < 0) throw std::invalid_argument("subset_style must be >= 0");
  if (eval_samples < 1) throw std::invalid_argument("eval_samples must be >= 1");
  if (augment_radius < 0 || augment_sigma < 0.0) {
    throw std::invalid_argument("augmentation parameters must be >= 0");
  }
}

nlohmann::json ExperimentConfig::to_json() const {
  return {{"run_id", run_id},
          {"model", to_string(model)},
          {"conditioning", to_string(conditioning)},
          {"subset_style", subset_style},
          {"augment_baseline", augment_baseline},
          {"augment_radius", augment_radius},
          {"augment_sigma", augment_sigma},
          {"dataset_root", dataset_root},
          {"output_root", output_root},
          {"learning_rate", learning_rate},
          {"epochs", epochs},
          {"batch_size", batch_size},
          {"beta", beta},
          {"latent_dim", latent_dim},
          {"mc_samples", mc_samples},
          {"rank", rank},
          {"base_channels", base_channels},
          {"depth", depth},
          {"dropout_p", dropout_p},
          {"normalization", normalization},
          {"seed", seed},
          {"eval_samples", eval_samples}};
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  c.run_id = j.value("run_id", c.run_id);
  if (j.contains("model")) {
    c.model = model_kind_from_string(j["model"].get<std::string>());
  }
  if (j.contains("conditioning")) {
    c.conditioning =
        conditioning_from_string(j["conditioning"].get<std::string>());
  }
  c.subset_style = j.value("subset_style", c.subset_style);
  c.augment_baseline = j.value("augment_baseline", c.augment_baseline);
  c.augment_radius = j.value("augment_radius", c.augment_radius);
  c.augment_sigma = j.value("augment_sigma", c.augment_sigma);
  c.dataset_root = j.value("dataset_root", c.dataset_root);
  c.output_root = j.value("output_root", c.output_root);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.beta = j.value("beta", c.beta);
  c.latent_dim = j.value("latent_dim", c.latent_dim);
  c.mc_samples = j.value("mc_samples", c.mc_samples);
  c.rank = j.value("rank", c.rank);
  c.base_channels = j.value("base_channels", c.base_channels);
  c.depth = j.value("depth", c.depth);
  c.dropout_p = j.value("dropout_p", c.dropout_p);
  c.normalization = j.value("normalization", c.normalization);
  c.seed = j.value("seed", c.seed);
  c.eval_samples = j.value("eval_samples", c.eval_samples);
  return c;
}

ExperimentConfig ExperimentConfig::isic_like() {
  ExperimentConfig c;
  c.learning_rate = 1e-4;
  c.epochs = 600;
  c.batch_size = 16;
  c.base_channels = 32;
  c.depth = 4;
  return c;
}

ExperimentConfig ExperimentConfig::phc_like() {
  ExperimentConfig c;
  c.learning_rate = 1e-4;
  c.epochs = 200;
  c.batch_size = 32;
  c.base_channels = 32;
  c.depth = 4;
  return c;
}

ExperimentConfig ExperimentConfig::synthetic_desk() {
  ExperimentConfig c;
  // Summed BCE makes gradients scale with pixel count; above ~3e-4 the
  // first steps throw every logit past the clamp and training flatlines.
  c.learning_rate = 1e-4;
  c.epochs = 24;
  c.batch_size = 16;
  c.base_channels = 16;
  c.depth = 4;
  c.dropout_p = 0.5;
  return c;
}

nlohmann::json RunRecord::to_json() const {
  nlohmann::json curve_json = nlohmann::json::array();
  for (const auto& stats : curve) {
    curve_json.push_back({{"epoch", stats.epoch},
                          {"train_loss", stats.train_loss},
                          {"val_loss", stats.val_loss}});
  }
  return {{"config", config.to_json()},
          {"curve", curve_json},
          {"best_epoch", best_epoch},
          {"best_val_loss", best_val_loss},
          {"best_checkpoint", best_checkpoint},
          {"last_checkpoint", last_checkpoint},
          {"style_pairs_used", style_pairs_used},
          {"augmented_pairs", augmented_pairs},
          {"backend", backend}};
}

RunRecord RunRecord::from_json(const nlohmann::json& j) {
  RunRecord record;
  record.config = ExperimentConfig::from_json(j.at("config"));
  for (const auto& entry : j.at("curve")) {
    record.curve.push_back({entry.at("epoch").get<int>(),
                            entry.at("train_loss").get<double>(),
                            entry.at("val_loss").get<double>()});
  }
  record.best_epoch = j.at("best_epoch").get<int>();
  record.best_val_loss = j.at("best_val_loss").get<double>();
  record.best_checkpoint = j.at("best_checkpoint").get<std::string>();
  record.last_checkpoint = j.at("last_checkpoint").get<std::string>();
  record.style_pairs_used = j.at("style_pairs_used").get<std::vector<long>>();
  record.augmented_pairs = j.at("augmented_pairs").get<long>();
  record.backend = j.value("backend", record.backend);
  return record;
}

std::string resolve_data_path(const std::string& path) {
  if (path.empty() || std::filesystem::path(path).is_absolute()) return path;
  const char* root = std::getenv("STYLESEG_DATA_ROOT");
  if (root == nullptr || *root == '\0') return path;
  return (std::filesystem::path(root) / path).string();
}

}  // namespace styleseg
