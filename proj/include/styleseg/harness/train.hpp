#pragma once

#include <string>

#include "json.hpp"
#include "styleseg/data/dataset_io.hpp"
#include "styleseg/harness/experiment.hpp"

namespace styleseg {

/// Model hyperparameters implied by an experiment config plus dataset facts
/// (style count, image channels). The result is exactly the model's own
/// config JSON and doubles as the checkpoint config echo, so a checkpoint
/// can only be loaded back into an identically configured model.
nlohmann::json model_config_json(const ExperimentConfig& config,
                                 int num_styles, int image_channels);

/// Trains one model per the config and leaves behind
///   <run_dir>/config.json          resolved experiment config
///   <run_dir>/record.json          loss curve, checkpoints, audit counters
///   <run_dir>/checkpoints/best.ckpt, last.ckpt
/// Best = lowest validation loss (validation noise is drawn from a fixed
/// stream so epochs are comparable). epochs = 0 stores the untrained model
/// with an empty curve. A non-finite loss aborts with a diagnostic snapshot
/// (checkpoint + JSON) under <run_dir>/diagnostic/.
///
/// Subset runs batch only pairs of subset_style and fail when the style is
/// absent from the train or val split; the per-style audit counters in the
/// record prove no other style contributed a gradient step.
RunRecord train(const ExperimentConfig& config);
RunRecord train(const ExperimentConfig& config, const LoadedDataset& dataset);

RunRecord load_run_record(const std::string& run_dir);

}  // namespace styleseg
