#include <torch/torch.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "styleseg/core/split.hpp"
#include "styleseg/data/dataset_io.hpp"
#include "styleseg/data/synthetic.hpp"
#include "styleseg/harness/evaluate.hpp"
#include "styleseg/harness/experiment.hpp"
#include "styleseg/harness/train.hpp"
#include "styleseg/models/cprob_unet.hpp"
#include "styleseg/models/cssn.hpp"
#include "styleseg/nn/checkpoint.hpp"

// libtorch's logging layer claims CHECK-style macro names; clear them so the
// test framework's asserts are the ones in effect below.
#undef CHECK
#undef CHECK_EQ
#undef CHECK_NE
#undef CHECK_LE
#undef CHECK_LT
#undef CHECK_GE
#undef CHECK_GT

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

using namespace styleseg;
namespace fs = std::filesystem;

namespace {

// Small 32x32 synthetic dataset with offsets scaled to the canvas.
LoadedDataset small_dataset(const std::string& dir, int n = 14,
                            std::uint64_t seed = 9) {
  fs::remove_all(dir);
  const std::vector<SyntheticStyleSpec> specs = {
      {LabelStyle(0, 2), 0.0, 0.5, 0.0}, {LabelStyle(1, 2), 2.0, 0.8, 0.5}};
  const auto dataset = generate_synthetic(n, 32, specs, 1, seed);
  save_synthetic_dataset(dir, dataset, SplitRatios{}, seed);
  return load_dataset(dir);
}

ExperimentConfig quick_config(const std::string& run_id,
                              const std::string& data_dir) {
  ExperimentConfig config;
  config.run_id = run_id;
  config.dataset_root = data_dir;
  config.output_root = "harness_tmp/runs";
  config.model = ModelKind::kCProbUNet;
  config.conditioning = ConditioningMode::kConditioned;
  config.learning_rate = 1e-3;
  config.epochs = 2;
  config.batch_size = 8;
  config.base_channels = 4;
  config.depth = 3;
  config.dropout_p = 0.0;
  config.latent_dim = 4;
  config.rank = 2;
  config.mc_samples = 4;
  config.eval_samples = 8;
  config.seed = 5;
  return config;
}

bool same_file_bytes(const std::string& a, const std::string& b) {
  std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
  REQUIRE(fa.good());
  REQUIRE(fb.good());
  const std::string bytes_a((std::istreambuf_iterator<char>(fa)), {});
  const std::string bytes_b((std::istreambuf_iterator<char>(fb)), {});
  return bytes_a == bytes_b;
}

// Answers every query with the matching annotation of the requested style,
// located by image equality: the best possible model.
class OraclePredictor : public Predictor {
 public:
  explicit OraclePredictor(std::vector<AnnotatedSample> samples)
      : samples_(std::move(samples)) {}

  SegmentationMask mean_prediction(const Image& image,
                                   const LabelStyle& style) override {
    return annotation_for(image, style);
  }

  PredictiveSampleSet sample_predictions(const Image& image,
                                         const LabelStyle& style, int n,
                                         std::uint64_t) override {
    PredictiveSampleSet set;
    set.source = "oracle";
    set.conditioning = style;
    set.masks.assign(n, annotation_for(image, style));
    return set;
  }

  ProbabilityField predictive_probability(const Image& image,
                                          const LabelStyle& style, int,
                                          std::uint64_t) override {
    const auto mask = annotation_for(image, style);
    ProbabilityField field(mask.height, mask.width);
    for (std::size_t i = 0; i < mask.grid.size(); ++i) {
      field.p[i] = static_cast<float>(mask.grid[i]);
    }
    return field;
  }

 private:
  const SegmentationMask& annotation_for(const Image& image,
                                         const LabelStyle& style) const {
    for (const auto& sample : samples_) {
      if (sample.image == image) {
        for (const auto& ann : sample.annotations) {
          if (ann.style.id == style.id) return ann.mask;
        }
      }
    }
    throw std::logic_error("oracle queried with an unknown image");
  }

  std::vector<AnnotatedSample> samples_;
};

}  // namespace

TEST_CASE("experiment config round trip, presets and validation") {
  ExperimentConfig config = quick_config("roundtrip", "some/data");
  config.model = ModelKind::kCSSN;
  config.conditioning = ConditioningMode::kSubset;
  config.subset_style = 1;
  config.augment_baseline = true;
  config.beta = 2.5;
  config.normalization = "batch";

  const auto restored = ExperimentConfig::from_json(config.to_json());
  CHECK(restored == config);
  CHECK(restored.run_dir() == "harness_tmp/runs/roundtrip");

  const auto isic = ExperimentConfig::isic_like();
  CHECK(isic.epochs == 600);
  CHECK(isic.batch_size == 16);
  CHECK(isic.learning_rate == 1e-4);
  const auto phc = ExperimentConfig::phc_like();
  CHECK(phc.epochs == 200);
  CHECK(phc.batch_size == 32);
  const auto desk = ExperimentConfig::synthetic_desk();
  CHECK(desk.epochs <= 30);

  ExperimentConfig bad = config;
  bad.run_id = "";
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = config;
  bad.run_id = "a/b";
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = config;
  bad.learning_rate = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = config;
  bad.epochs = -1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = config;
  bad.dataset_root = "";
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  CHECK(to_string(ModelKind::kCSSN) == "cssn");
  CHECK(model_kind_from_string("cprob_unet") == ModelKind::kCProbUNet);
  CHECK_THROWS_AS(model_kind_from_string("mlp"), std::invalid_argument);
  CHECK(conditioning_from_string("subset") == ConditioningMode::kSubset);
  CHECK_THROWS_AS(conditioning_from_string("other"), std::invalid_argument);
}

TEST_CASE("data root resolution uses the environment variable") {
  const char* saved = std::getenv("STYLESEG_DATA_ROOT");
  const std::string saved_value = saved ? saved : "";

  unsetenv("STYLESEG_DATA_ROOT");
  CHECK(resolve_data_path("rel/dir") == "rel/dir");
  setenv("STYLESEG_DATA_ROOT", "/data/root", 1);
  CHECK(resolve_data_path("rel/dir") == "/data/root/rel/dir");
  CHECK(resolve_data_path("/abs/dir") == "/abs/dir");

  if (saved) {
    setenv("STYLESEG_DATA_ROOT", saved_value.c_str(), 1);
  } else {
    unsetenv("STYLESEG_DATA_ROOT");
  }
}

TEST_CASE("model config derivation matches the model families") {
  ExperimentConfig config = quick_config("derive", "d");
  const auto cprob_json = model_config_json(config, 3, 1);
  const auto cprob_config = CProbUNetConfig::from_json(cprob_json);
  CHECK(cprob_config.num_styles == 3);
  CHECK(cprob_config.conditioned);
  CHECK(cprob_config.latent_dim == 4);
  CHECK(cprob_config.base_channels == 4);
  CHECK(cprob_config.depth == 3);

  config.model = ModelKind::kCSSN;
  config.conditioning = ConditioningMode::kAll;
  const auto cssn_config = CSSNConfig::from_json(model_config_json(config, 3, 2));
  CHECK_FALSE(cssn_config.conditioned);
  CHECK(cssn_config.rank == 2);
  CHECK(cssn_config.mc_samples == 4);
  CHECK(cssn_config.image_channels == 2);
}

TEST_CASE("training writes a complete run directory") {
  const auto dataset = small_dataset("harness_tmp/data_main");
  const auto config = quick_config("complete", "harness_tmp/data_main");
  const RunRecord record = train(config, dataset);

  CHECK(record.curve.size() == 2);
  for (const auto& stats : record.curve) {
    CHECK(std::isfinite(stats.train_loss));
    CHECK(std::isfinite(stats.val_loss));
  }
  CHECK(record.best_epoch >= 0);
  CHECK(fs::exists(record.best_checkpoint));
  CHECK(fs::exists(record.last_checkpoint));
  CHECK(fs::exists("harness_tmp/runs/complete/config.json"));
  CHECK(fs::exists("harness_tmp/runs/complete/record.json"));

  // Every train pair contributes once per epoch.
  const long total_pairs = count_pairs(dataset.split.train);
  long counted = 0;
  for (long c : record.style_pairs_used) counted += c;
  CHECK(counted == config.epochs * total_pairs);

  const RunRecord loaded = load_run_record("harness_tmp/runs/complete");
  CHECK(loaded.config == record.config);
  CHECK(loaded.curve.size() == record.curve.size());
  CHECK(loaded.curve.back().val_loss ==
        doctest::Approx(record.curve.back().val_loss).epsilon(1e-12));
  CHECK(loaded.best_epoch == record.best_epoch);
  CHECK(loaded.style_pairs_used == record.style_pairs_used);
}

TEST_CASE("epochs zero stores an untrained checkpoint") {
  const auto dataset = small_dataset("harness_tmp/data_zero");
  auto config = quick_config("untrained", "harness_tmp/data_zero");
  config.epochs = 0;
  const RunRecord record = train(config, dataset);

  CHECK(record.curve.empty());
  CHECK(record.best_epoch == -1);
  CHECK(fs::exists(record.best_checkpoint));
  CHECK(fs::exists(record.last_checkpoint));

  // Both checkpoints hold the same untrained weights and load cleanly.
  CHECK(same_file_bytes(record.best_checkpoint, record.last_checkpoint));
  auto best = predictor_for_run(record, dataset, true);
  auto last = predictor_for_run(record, dataset, false);
  const auto& sample = dataset.split.test.front();
  const auto mask_best = best->mean_prediction(sample.image, LabelStyle(0, 2));
  const auto mask_last = last->mean_prediction(sample.image, LabelStyle(0, 2));
  CHECK(mask_best.height == sample.image.height);
  CHECK(mask_best.width == sample.image.width);
  CHECK(mask_best == mask_last);
}

TEST_CASE("subset training never observes another style") {
  const auto dataset = small_dataset("harness_tmp/data_subset");
  auto config = quick_config("subset0", "harness_tmp/data_subset");
  config.conditioning = ConditioningMode::kSubset;
  config.subset_style = 0;
  const RunRecord record = train(config, dataset);

  REQUIRE(record.style_pairs_used.size() == 2);
  CHECK(record.style_pairs_used[0] ==
        config.epochs * count_pairs_of_style(dataset.split.train, 0));
  CHECK(record.style_pairs_used[1] == 0);

  auto missing = config;
  missing.run_id = "subset_missing";
  missing.subset_style = 7;
  CHECK_THROWS_AS(train(missing, dataset), std::runtime_error);
}

TEST_CASE("augment baseline substitutes coarse annotations") {
  const auto dataset = small_dataset("harness_tmp/data_aug");
  auto config = quick_config("augrun", "harness_tmp/data_aug");
  config.conditioning = ConditioningMode::kAll;
  config.augment_baseline = true;
  config.augment_radius = 2;
  config.augment_sigma = 1.0;
  const RunRecord record = train(config, dataset);

  const long coarse_pairs = count_pairs_of_style(dataset.split.train, 1) +
                            count_pairs_of_style(dataset.split.val, 1);
  CHECK(record.augmented_pairs == coarse_pairs);
  CHECK(record.curve.size() == 2);
}

TEST_CASE("identical config and seed reproduce the run exactly") {
  const auto dataset = small_dataset("harness_tmp/data_repro");
  auto config_a = quick_config("repro_a", "harness_tmp/data_repro");
  auto config_b = quick_config("repro_b", "harness_tmp/data_repro");
  const RunRecord record_a = train(config_a, dataset);
  const RunRecord record_b = train(config_b, dataset);

  REQUIRE(record_a.curve.size() == record_b.curve.size());
  for (std::size_t i = 0; i < record_a.curve.size(); ++i) {
    CHECK(record_a.curve[i].train_loss == record_b.curve[i].train_loss);
    CHECK(record_a.curve[i].val_loss == record_b.curve[i].val_loss);
  }
  CHECK(same_file_bytes(record_a.last_checkpoint, record_b.last_checkpoint));

  EvalOptions options;
  options.samples_per_image = 6;
  options.seed = 3;
  auto predictor_a = predictor_for_run(record_a, dataset);
  auto predictor_b = predictor_for_run(record_b, dataset);
  const auto report_a =
      evaluate_predictor(*predictor_a, dataset, options, "same");
  const auto report_b =
      evaluate_predictor(*predictor_b, dataset, options, "same");
  CHECK(report_a.to_json() == report_b.to_json());

  auto config_c = quick_config("repro_c", "harness_tmp/data_repro");
  config_c.seed = 6;
  const RunRecord record_c = train(config_c, dataset);
  CHECK(record_a.curve.front().train_loss != record_c.curve.front().train_loss);
}

TEST_CASE("non-finite loss aborts with a diagnostic snapshot") {
  const auto dataset = small_dataset("harness_tmp/data_nan");
  auto config = quick_config("nanrun", "harness_tmp/data_nan");
  config.model = ModelKind::kCSSN;
  config.learning_rate = 1e12;
  config.epochs = 5;
  config.batch_size = 4;

  CHECK_THROWS_WITH_AS(train(config, dataset),
                       doctest::Contains("non-finite"), std::runtime_error);
  CHECK(fs::exists("harness_tmp/runs/nanrun/diagnostic.json"));
  CHECK(fs::exists("harness_tmp/runs/nanrun/checkpoints/diagnostic.ckpt"));
}

TEST_CASE("oracle predictor scores perfectly on every metric") {
  // Saved without truth masks, so the bias reference is the style-0
  // annotations the oracle reproduces exactly.
  fs::remove_all("harness_tmp/data_oracle");
  const std::vector<SyntheticStyleSpec> specs = {
      {LabelStyle(0, 2), 0.0, 0.5, 0.0}, {LabelStyle(1, 2), 2.0, 0.8, 0.5}};
  const auto raw = generate_synthetic(10, 32, specs, 1, 21);
  const auto split = split_dataset(raw.samples, SplitRatios{}, 21);
  save_dataset("harness_tmp/data_oracle", split, 2);
  const auto dataset = load_dataset("harness_tmp/data_oracle");

  OraclePredictor oracle(dataset.split.test);
  EvalOptions options;
  options.samples_per_image = 5;
  options.seed = 2;
  const auto report = evaluate_predictor(oracle, dataset, options, "oracle");

  REQUIRE(report.per_style.size() == 2);
  for (const auto& m : report.per_style) {
    CHECK(m.mean_iou == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(m.auroc == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(m.mean_ged_squared == doctest::Approx(0.0).epsilon(1e-12));
  }
  CHECK(report.bias_reference == "style0-annotations");
  CHECK(report.bias.mean == 0.0);
  CHECK(report.bias.stddev == 0.0);
  // Exact 0/1 probabilities carry no entropy and no mistakes.
  CHECK(report.strata_summary[1].count == 0);  // fp
  CHECK(report.strata_summary[3].count == 0);  // fn
  CHECK(report.median_entropy_correct == 0.0);
  CHECK(report.median_entropy_error == 0.0);

  // A worker pool must not change any number.
  EvalOptions threaded = options;
  threaded.threads = 3;
  const auto threaded_report =
      evaluate_predictor(oracle, dataset, threaded, "oracle");
  CHECK(threaded_report.to_json() == report.to_json());

  // Plot emission on a report with empty strata groups.
  const auto written = emit_plots(report, "harness_tmp/oracle_plots");
  for (const auto& path : written) CHECK(fs::exists(path));
}

TEST_CASE("evaluation errors on missing styles and empty buckets") {
  fs::remove_all("harness_tmp/data_missing");
  const std::vector<SyntheticStyleSpec> specs = {
      {LabelStyle(0, 2), 0.0, 0.5, 0.0}, {LabelStyle(1, 2), 2.0, 0.8, 0.5}};
  const auto raw = generate_synthetic(10, 32, specs, 1, 33);
  auto split = split_dataset(raw.samples, SplitRatios{}, 33);
  for (auto& sample : split.test) {
    // Strip style-1 annotations from the test bucket only.
    std::vector<Annotation> kept;
    for (auto& ann : sample.annotations) {
      if (ann.style.id == 0) kept.push_back(ann);
    }
    sample.annotations = kept;
  }
  save_dataset("harness_tmp/data_missing", split, 2);
  const auto dataset = load_dataset("harness_tmp/data_missing");

  OraclePredictor oracle(dataset.split.test);
  EvalOptions options;
  options.samples_per_image = 3;
  CHECK_THROWS_WITH_AS(evaluate_predictor(oracle, dataset, options, "x"),
                       doctest::Contains("style 1"), std::runtime_error);

  LoadedDataset hollow = dataset;
  hollow.split.val.clear();
  EvalOptions val_options = options;
  val_options.bucket = "val";
  CHECK_THROWS_AS(evaluate_predictor(oracle, hollow, val_options, "x"),
                  std::runtime_error);
}

TEST_CASE("trained run evaluates end to end and round-trips its report") {
  const auto dataset = small_dataset("harness_tmp/data_e2e");
  auto config = quick_config("e2e", "harness_tmp/data_e2e");
  const RunRecord record = train(config, dataset);

  EvalOptions options;
  options.samples_per_image = 6;
  options.seed = 4;
  const EvalReport report = evaluate_run(record, dataset, options);

  REQUIRE(report.per_style.size() == 2);
  for (const auto& m : report.per_style) {
    CHECK(m.pairs > 0);
    CHECK(m.mean_iou >= 0.0);
    CHECK(m.mean_iou <= 1.0);
    CHECK(m.auroc >= 0.0);
    CHECK(m.auroc <= 1.0);
    CHECK(m.mean_ged_squared >= -1e-12);
  }
  CHECK(report.bias_reference == "truth-masks");

  const fs::path run_dir = record.config.run_dir();
  CHECK(fs::exists(run_dir / "metrics.json"));
  CHECK(fs::exists(run_dir / "metrics.csv"));
  CHECK(fs::exists(run_dir / "plots" / "area_bias.svg"));
  CHECK(fs::exists(run_dir / "plots" / "entropy_strata.csv"));

  std::ifstream in(run_dir / "metrics.json");
  nlohmann::json stored;
  in >> stored;
  const EvalReport loaded = EvalReport::from_json(stored);
  CHECK(loaded.run_id == report.run_id);
  CHECK(loaded.fingerprint == report.fingerprint);
  CHECK(loaded.per_style.size() == report.per_style.size());
  CHECK(loaded.per_style[0].mean_iou ==
        doctest::Approx(report.per_style[0].mean_iou).epsilon(1e-12));
  CHECK(loaded.pooled_ged_squared ==
        doctest::Approx(report.pooled_ged_squared).epsilon(1e-12));
  CHECK(loaded.bias.mean == doctest::Approx(report.bias.mean).epsilon(1e-12));

  std::ifstream csv(run_dir / "metrics.csv");
  std::string header;
  std::getline(csv, header);
  CHECK(header == "run,section,style,metric,value");
  int rows = 0;
  for (std::string line; std::getline(csv, line);) ++rows;
  CHECK(rows >= 20);
}

TEST_CASE("comparison flags winners and rejects mismatched splits") {
  const auto dataset = small_dataset("harness_tmp/data_cmp");
  OraclePredictor oracle(dataset.split.test);
  EvalOptions options;
  options.samples_per_image = 4;
  auto report_a = evaluate_predictor(oracle, dataset, options, "a");
  auto report_b = evaluate_predictor(oracle, dataset, options, "b");

  // Identical runs: every delta is zero and the first run wins ties.
  const auto identical = compare_runs({report_a, report_b});
  CHECK(identical.run_ids == std::vector<std::string>{"a", "b"});
  for (const auto& row : identical.rows) {
    for (double delta : row.deltas) CHECK(delta == 0.0);
    CHECK(row.best_index == 0);
  }
  const std::string text = identical.to_text();
  CHECK(text.find("iou/style0") != std::string::npos);
  CHECK(text.find("a") != std::string::npos);

  // Doctored values: winner flags follow each metric's direction, and the
  // signed bias row compares magnitudes.
  report_b.per_style[0].mean_iou = 0.5;
  report_b.pooled_ged_squared = report_a.pooled_ged_squared + 1.0;
  report_a.bias.mean = 5.0;
  report_b.bias.mean = -3.0;
  const auto flagged = compare_runs({report_a, report_b});
  for (const auto& row : flagged.rows) {
    if (row.metric == "iou/style0") CHECK(row.best_index == 0);
    if (row.metric == "ged_squared/pooled") CHECK(row.best_index == 0);
    if (row.metric == "area_bias/mean") CHECK(row.best_index == 1);
  }

  CHECK_THROWS_AS(compare_runs({report_a}), std::invalid_argument);
  report_b.fingerprint = "deadbeef00000000";
  CHECK_THROWS_WITH_AS(compare_runs({report_a, report_b}),
                       doctest::Contains("different test splits"),
                       std::invalid_argument);
}

TEST_CASE("conditioned and unconditioned runs share the evaluation interface") {
  const auto dataset = small_dataset("harness_tmp/data_modes");
  auto config = quick_config("modes_cssn", "harness_tmp/data_modes");
  config.model = ModelKind::kCSSN;
  config.conditioning = ConditioningMode::kAll;
  config.epochs = 1;
  const RunRecord record = train(config, dataset);

  EvalOptions options;
  options.samples_per_image = 4;
  auto predictor = predictor_for_run(record, dataset);
  const auto report = evaluate_predictor(*predictor, dataset, options, "m");
  CHECK(report.per_style.size() == 2);
  // The unconditioned model ignores the style argument, so both columns see
  // the same predictive distribution; the numbers still differ because the
  // annotations differ.
  CHECK(report.per_style[0].pairs == report.per_style[1].pairs);
}
