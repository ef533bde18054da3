#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "styleseg/data/dataset_io.hpp"
#include "styleseg/harness/experiment.hpp"
#include "styleseg/metrics/metrics.hpp"

namespace styleseg {

/// What evaluation needs from a model. Implementations must be stateless
/// across calls (same arguments, same result) so images can be evaluated
/// in any order or in parallel; all randomness comes in through the seed.
/// Unconditioned models receive the target style too and simply ignore it.
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual SegmentationMask mean_prediction(const Image& image,
                                           const LabelStyle& style) = 0;
  virtual PredictiveSampleSet sample_predictions(const Image& image,
                                                 const LabelStyle& style, int n,
                                                 std::uint64_t seed) = 0;
  virtual ProbabilityField predictive_probability(const Image& image,
                                                  const LabelStyle& style,
                                                  int n, std::uint64_t seed) = 0;
};

/// Predictor over a trained checkpoint of either model family.
class TorchPredictor : public Predictor {
 public:
  /// Builds the model the config implies and loads the checkpoint, which
  /// must carry a matching config echo.
  TorchPredictor(const ExperimentConfig& config, int num_styles,
                 int image_channels, const std::string& checkpoint_path);
  ~TorchPredictor() override;

  SegmentationMask mean_prediction(const Image& image,
                                   const LabelStyle& style) override;
  PredictiveSampleSet sample_predictions(const Image& image,
                                         const LabelStyle& style, int n,
                                         std::uint64_t seed) override;
  ProbabilityField predictive_probability(const Image& image,
                                          const LabelStyle& style, int n,
                                          std::uint64_t seed) override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Predictor for a finished run, loading its best checkpoint by default.
std::unique_ptr<TorchPredictor> predictor_for_run(const RunRecord& record,
                                                  const LoadedDataset& dataset,
                                                  bool best = true);

struct EvalOptions {
  std::string bucket = "test";
  int samples_per_image = 100;  // predictive draws per image and style
  std::uint64_t seed = 0;
  /// Style mix for pooled sampling; empty means uniform over styles.
  std::vector<double> style_probs;
  /// Worker threads across images; results are ordered and identical for
  /// any thread count.
  int threads = 1;
};

/// One table row: metrics of a single label style.
struct StyleMetrics {
  int style_id = 0;
  long pairs = 0;              // (image, annotation) pairs of this style
  double mean_iou = 0.0;       // mean prediction vs style-s annotations
  double auroc = 0.0;          // pooled pixel-wise, entropy as the score
  double mean_ged_squared = 0.0;  // predictive samples vs style-s annotations
};

struct StrataSummary {
  long count = 0;
  double median_entropy = 0.0;
  double mean_entropy = 0.0;
};

/// Stable identifier of (bucket contents, annotations); comparisons refuse
/// reports whose fingerprints differ.
std::string dataset_fingerprint(const LoadedDataset& dataset,
                                const std::string& bucket);

struct EvalReport {
  std::string run_id;
  std::string bucket;
  std::string fingerprint;
  int samples_per_image = 0;
  std::uint64_t seed = 0;

  std::vector<StyleMetrics> per_style;
  /// Full-distribution samples (styles drawn per style_probs) against the
  /// pooled annotations of every style.
  double pooled_ged_squared = 0.0;

  /// Signed area error of style-0-conditioned samples against the style-0
  /// reference: true masks when the dataset carries them, else the style-0
  /// annotations.
  AreaBias bias;
  std::string bias_reference;

  /// Entropies grouped by the confusion class of the thresholded
  /// probability field, pooled over styles and images. The raw values back
  /// the plots; the summaries and the medians are what gets serialized.
  ErrorStrata strata;
  StrataSummary strata_summary[4];  // tp, fp, tn, fn
  double median_entropy_correct = 0.0;  // over TP and TN pixels
  double median_entropy_error = 0.0;    // over FP and FN pixels

  nlohmann::json to_json() const;
  /// Restores everything except the raw strata/bias value lists.
  static EvalReport from_json(const nlohmann::json& j);
};

EvalReport evaluate_predictor(Predictor& predictor, const LoadedDataset& dataset,
                              const EvalOptions& options,
                              const std::string& run_id);

/// Evaluates a finished run against a dataset bucket and writes
/// metrics.json, metrics.csv and plots/ under the run directory.
EvalReport evaluate_run(const RunRecord& record, const LoadedDataset& dataset,
                        const EvalOptions& options);

/// metrics.csv body: one `run,section,style,metric,value` row per number.
void write_metrics_files(const EvalReport& report, const std::string& run_dir);

struct ComparisonRow {
  std::string metric;
  bool higher_is_better = true;
  std::vector<double> values;  // aligned with ComparisonReport::run_ids
  std::vector<double> deltas;  // value minus the first run's value
  int best_index = 0;
};

struct ComparisonReport {
  std::vector<std::string> run_ids;
  std::vector<ComparisonRow> rows;

  nlohmann::json to_json() const;
  std::string to_text() const;
};

/// Side-by-side tables over >= 2 reports of the same dataset bucket;
/// throws when the fingerprints differ.
ComparisonReport compare_runs(const std::vector<EvalReport>& reports);

/// Violin plots + value CSVs for the report's area-bias and entropy-strata
/// distributions. Requires a freshly computed report (raw value lists are
/// not serialized). Returns the written file paths.
std::vector<std::string> emit_plots(const EvalReport& report,
                                    const std::string& plot_dir);

}  // namespace styleseg
