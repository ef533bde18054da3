#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "styleseg/core/split.hpp"
#include "styleseg/data/curation.hpp"
#include "styleseg/data/dataset_io.hpp"
#include "styleseg/data/synthetic.hpp"
#include "styleseg/harness/evaluate.hpp"
#include "styleseg/harness/experiment.hpp"
#include "styleseg/harness/svg_plots.hpp"
#include "styleseg/harness/train.hpp"

namespace fs = std::filesystem;
using namespace styleseg;

namespace {

std::vector<double> parse_doubles(const std::string& text) {
  std::vector<double> values;
  std::stringstream stream(text);
  std::string item;
  while (std::getline(stream, item, ',')) values.push_back(std::stod(item));
  return values;
}

SplitRatios parse_ratios(const std::string& text) {
  const auto v = parse_doubles(text);
  if (v.size() != 3) {
    throw CLI::ValidationError("--ratios", "expected train,val,test");
  }
  return {v[0], v[1], v[2]};
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  nlohmann::json j;
  in >> j;
  return j;
}

int run_synth(const std::string& out, int n, int size,
              const std::vector<std::string>& style_specs, int annotators,
              std::uint64_t seed, const std::string& ratios_text) {
  std::vector<SyntheticStyleSpec> specs;
  const int num_styles = static_cast<int>(style_specs.size());
  for (int i = 0; i < num_styles; ++i) {
    const auto v = parse_doubles(style_specs[i]);
    if (v.size() != 3) {
      throw CLI::ValidationError("--style", "expected offset_mean,offset_std,sigma");
    }
    specs.push_back({LabelStyle(i, num_styles), v[0], v[1], v[2]});
  }
  const auto dataset = generate_synthetic(n, size, specs, annotators, seed);
  save_synthetic_dataset(resolve_data_path(out), dataset,
                         parse_ratios(ratios_text), seed);
  std::cout << "wrote " << dataset.samples.size() << " samples ("
            << count_pairs(dataset.samples) << " annotation pairs, "
            << num_styles << " styles) to " << resolve_data_path(out) << "\n";
  return 0;
}

int run_curate(const std::string& frames_dir, const std::string& out, int margin,
               int target, std::uint64_t seed, const std::string& ratios_text) {
  const std::string frames_root = resolve_data_path(frames_dir);
  const auto frames = load_frames(frames_root);
  const int num_styles = frames_num_styles(frames_root);
  auto samples = curate_cell_crops(frames, margin, target);
  const auto split = split_dataset(samples, parse_ratios(ratios_text), seed);
  save_dataset(resolve_data_path(out), split, num_styles);
  std::cout << "curated " << samples.size() << " cell crops from "
            << frames.size() << " frames into " << resolve_data_path(out)
            << " (train " << split.train.size() << " / val "
            << split.val.size() << " / test " << split.test.size() << ")\n";
  return 0;
}

int run_train(const nlohmann::json& config_json) {
  const auto config = ExperimentConfig::from_json(config_json);
  const RunRecord record = train(config);
  std::cout << "run " << config.run_id << " finished: " << record.curve.size()
            << " epochs";
  if (!record.curve.empty()) {
    std::cout << ", best val loss " << record.best_val_loss << " at epoch "
              << record.best_epoch;
  }
  std::cout << "\nartifacts in " << config.run_dir() << "\n";
  return 0;
}

int run_eval(const std::string& run_dir, const std::string& dataset_root,
             const EvalOptions& options) {
  const RunRecord record = load_run_record(run_dir);
  const std::string root = dataset_root.empty()
                               ? record.config.dataset_root
                               : dataset_root;
  const auto dataset = load_dataset(resolve_data_path(root));
  const EvalReport report = evaluate_run(record, dataset, options);
  std::cout << "evaluated " << report.run_id << " on bucket '" << report.bucket
            << "'\n";
  for (const auto& m : report.per_style) {
    std::cout << "  style " << m.style_id << ": iou " << m.mean_iou
              << ", auroc " << m.auroc << ", ged^2 " << m.mean_ged_squared
              << " (" << m.pairs << " pairs)\n";
  }
  std::cout << "  pooled ged^2 " << report.pooled_ged_squared
            << "; area bias " << report.bias.mean << " +- "
            << report.bias.stddev << " px vs " << report.bias_reference
            << "\n  median entropy: errors " << report.median_entropy_error
            << ", correct " << report.median_entropy_correct << "\n"
            << "metrics and plots written under " << record.config.run_dir()
            << "\n";
  return 0;
}

int run_compare(const std::vector<std::string>& run_dirs,
                const std::string& out_json) {
  std::vector<EvalReport> reports;
  for (const auto& dir : run_dirs) {
    reports.push_back(
        EvalReport::from_json(read_json_file((fs::path(dir) / "metrics.json").string())));
  }
  const ComparisonReport comparison = compare_runs(reports);
  std::cout << comparison.to_text();
  if (!out_json.empty()) {
    std::ofstream out(out_json);
    if (!out) throw std::runtime_error("cannot write " + out_json);
    out << comparison.to_json().dump(2) << "\n";
    std::cout << "comparison written to " << out_json << "\n";
  }
  return 0;
}

int run_plot(const std::string& values_csv, const std::string& out_svg,
             const std::string& title, const std::string& y_label) {
  const auto groups = read_values_csv(values_csv);
  write_violin_svg(out_svg, title, y_label, groups);
  std::cout << "plot written to " << out_svg << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Label-style segmentation workbench: dataset curation, synthetic data, "
      "training and evaluation of style-conditioned segmentation models.\n"
      "Relative dataset paths are resolved against $STYLESEG_DATA_ROOT when "
      "set."};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand(
      "synth", "Generate a synthetic multi-style ellipse dataset");
  std::string synth_out;
  int synth_n = 500, synth_size = 64, synth_annotators = 1;
  std::uint64_t synth_seed = 1;
  std::string synth_ratios = "0.6,0.2,0.2";
  std::vector<std::string> synth_styles = {"0,0.75,0", "6,1.5,1"};
  synth->add_option("--out", synth_out, "output dataset directory")->required();
  synth->add_option("--n", synth_n, "number of images");
  synth->add_option("--size", synth_size, "image side length");
  synth->add_option("--style", synth_styles,
                    "one style as offset_mean,offset_std,sigma (repeatable; "
                    "default: a fine style 0 and a coarse style 1)");
  synth->add_option("--annotators", synth_annotators, "annotators per style");
  synth->add_option("--seed", synth_seed, "generator and split seed");
  synth->add_option("--ratios", synth_ratios, "train,val,test split ratios");

  // curate
  auto* curate = app.add_subcommand(
      "curate", "Cut per-cell crops from full frames into a dataset");
  std::string curate_frames, curate_out;
  int curate_margin = 20, curate_target = 128;
  std::uint64_t curate_seed = 1;
  std::string curate_ratios = "0.6,0.2,0.2";
  curate->add_option("--frames", curate_frames, "full-frame directory")->required();
  curate->add_option("--out", curate_out, "output dataset directory")->required();
  curate->add_option("--margin", curate_margin, "crop margin around each cell");
  curate->add_option("--size", curate_target, "output crop side length");
  curate->add_option("--seed", curate_seed, "split seed");
  curate->add_option("--ratios", curate_ratios, "train,val,test split ratios");

  // train
  auto* train_cmd = app.add_subcommand(
      "train", "Train one model; flags override the config file");
  std::string train_config, train_preset;
  std::string t_run_id, t_model, t_conditioning, t_dataset, t_output_root,
      t_normalization;
  int t_subset = 0, t_epochs = 0, t_batch = 0, t_latent = 0, t_rank = 0,
      t_mc = 0, t_base = 0, t_depth = 0, t_eval_samples = 0;
  double t_lr = 0.0, t_beta = 0.0, t_dropout = 0.0, t_aug_sigma = 0.0;
  int t_aug_radius = 0;
  std::uint64_t t_seed = 0;
  bool t_aug = false;
  train_cmd->add_option("--config", train_config, "experiment config JSON file");
  train_cmd->add_option("--preset", train_preset,
                        "hyperparameter preset: isic | phc | desk")
      ->check(CLI::IsMember({"isic", "phc", "desk"}));
  train_cmd->add_option("--run-id", t_run_id, "run directory name");
  train_cmd->add_option("--model", t_model, "cprob_unet | cssn");
  train_cmd->add_option("--conditioning", t_conditioning,
                        "conditioned | all | subset");
  train_cmd->add_option("--subset-style", t_subset, "style for subset runs");
  train_cmd->add_flag("--aug", t_aug,
                      "replace coarse-style annotations with dilate+blur "
                      "copies of the fine ones");
  train_cmd->add_option("--aug-radius", t_aug_radius, "augmentation dilation radius");
  train_cmd->add_option("--aug-sigma", t_aug_sigma, "augmentation blur sigma");
  train_cmd->add_option("--dataset", t_dataset, "dataset directory");
  train_cmd->add_option("--output-root", t_output_root, "runs directory");
  train_cmd->add_option("--lr", t_lr, "learning rate");
  train_cmd->add_option("--epochs", t_epochs, "training epochs");
  train_cmd->add_option("--batch", t_batch, "batch size");
  train_cmd->add_option("--beta", t_beta, "KL weight (probabilistic U-net)");
  train_cmd->add_option("--latent", t_latent, "latent dimension");
  train_cmd->add_option("--rank", t_rank, "covariance rank (ssn)");
  train_cmd->add_option("--mc-samples", t_mc, "loss samples (ssn)");
  train_cmd->add_option("--base", t_base, "backbone base channels");
  train_cmd->add_option("--depth", t_depth, "backbone depth");
  train_cmd->add_option("--dropout", t_dropout, "bottleneck dropout");
  train_cmd->add_option("--normalization", t_normalization, "none | batch");
  train_cmd->add_option("--seed", t_seed, "run seed");
  train_cmd->add_option("--eval-samples", t_eval_samples,
                        "predictive draws per image at evaluation");

  // eval
  auto* eval_cmd = app.add_subcommand(
      "eval", "Evaluate a finished run on a dataset bucket");
  std::string e_run, e_dataset, e_bucket = "test", e_style_probs;
  int e_samples = 100, e_threads = 1;
  std::uint64_t e_seed = 0;
  eval_cmd->add_option("--run", e_run, "run directory")->required();
  eval_cmd->add_option("--dataset", e_dataset,
                       "dataset directory (default: from the run config)");
  eval_cmd->add_option("--bucket", e_bucket, "train | val | test");
  eval_cmd->add_option("--samples", e_samples, "predictive draws per image");
  eval_cmd->add_option("--seed", e_seed, "evaluation seed");
  eval_cmd->add_option("--threads", e_threads, "worker threads across images");
  eval_cmd->add_option("--style-probs", e_style_probs,
                       "pooled sampling style mix, e.g. 0.5,0.5 (default "
                       "uniform)");

  // compare
  auto* compare_cmd = app.add_subcommand(
      "compare", "Side-by-side metric tables over evaluated runs");
  std::vector<std::string> c_runs;
  std::string c_out;
  compare_cmd->add_option("--runs", c_runs, "two or more run directories")
      ->required()
      ->expected(2, -1);
  compare_cmd->add_option("--out", c_out, "write the comparison as JSON");

  // plot
  auto* plot_cmd = app.add_subcommand(
      "plot", "Re-render a violin plot from a values CSV");
  std::string p_values, p_out, p_title = "Distribution", p_ylabel = "value";
  plot_cmd->add_option("--values", p_values, "values CSV file")->required();
  plot_cmd->add_option("--out", p_out, "output SVG file")->required();
  plot_cmd->add_option("--title", p_title, "plot title");
  plot_cmd->add_option("--ylabel", p_ylabel, "y axis label");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      return run_synth(synth_out, synth_n, synth_size, synth_styles,
                       synth_annotators, synth_seed, synth_ratios);
    }
    if (curate->parsed()) {
      return run_curate(curate_frames, curate_out, curate_margin, curate_target,
                        curate_seed, curate_ratios);
    }
    if (train_cmd->parsed()) {
      nlohmann::json config_json;
      if (!train_preset.empty()) {
        if (train_preset == "isic") {
          config_json = ExperimentConfig::isic_like().to_json();
        } else if (train_preset == "phc") {
          config_json = ExperimentConfig::phc_like().to_json();
        } else {
          config_json = ExperimentConfig::synthetic_desk().to_json();
        }
      }
      if (!train_config.empty()) {
        config_json.update(read_json_file(train_config));
      }
      const auto set_if = [&](const char* flag, const char* key, auto value) {
        if (train_cmd->count(flag) > 0) config_json[key] = value;
      };
      set_if("--run-id", "run_id", t_run_id);
      set_if("--model", "model", t_model);
      set_if("--conditioning", "conditioning", t_conditioning);
      set_if("--subset-style", "subset_style", t_subset);
      if (t_aug) config_json["augment_baseline"] = true;
      set_if("--aug-radius", "augment_radius", t_aug_radius);
      set_if("--aug-sigma", "augment_sigma", t_aug_sigma);
      set_if("--dataset", "dataset_root", t_dataset);
      set_if("--output-root", "output_root", t_output_root);
      set_if("--lr", "learning_rate", t_lr);
      set_if("--epochs", "epochs", t_epochs);
      set_if("--batch", "batch_size", t_batch);
      set_if("--beta", "beta", t_beta);
      set_if("--latent", "latent_dim", t_latent);
      set_if("--rank", "rank", t_rank);
      set_if("--mc-samples", "mc_samples", t_mc);
      set_if("--base", "base_channels", t_base);
      set_if("--depth", "depth", t_depth);
      set_if("--dropout", "dropout_p", t_dropout);
      set_if("--normalization", "normalization", t_normalization);
      set_if("--seed", "seed", t_seed);
      set_if("--eval-samples", "eval_samples", t_eval_samples);
      return run_train(config_json);
    }
    if (eval_cmd->parsed()) {
      EvalOptions options;
      options.bucket = e_bucket;
      options.samples_per_image = e_samples;
      options.seed = e_seed;
      options.threads = e_threads;
      if (!e_style_probs.empty()) options.style_probs = parse_doubles(e_style_probs);
      return run_eval(e_run, e_dataset, options);
    }
    if (compare_cmd->parsed()) return run_compare(c_runs, c_out);
    if (plot_cmd->parsed()) return run_plot(p_values, p_out, p_title, p_ylabel);
  } catch (const std::exception& error) {
    std::cerr << "error: " << error.what() << "\n";
    return 1;
  }
  return 0;
}
