#include "styleseg/harness/evaluate.hpp"

#include <torch/torch.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "styleseg/core/rng.hpp"
#include "styleseg/harness/svg_plots.hpp"
#include "styleseg/harness/train.hpp"
#include "styleseg/models/cprob_unet.hpp"
#include "styleseg/models/cssn.hpp"
#include "styleseg/nn/checkpoint.hpp"
#include "styleseg/nn/torch_bridge.hpp"

namespace fs = std::filesystem;

namespace styleseg {

struct TorchPredictor::Impl {
  CProbUNet cprob{nullptr};
  CSSN cssn{nullptr};
};

TorchPredictor::TorchPredictor(const ExperimentConfig& config, int num_styles,
                               int image_channels,
                               const std::string& checkpoint_path)
    : impl_(std::make_unique<Impl>()) {
  const nlohmann::json model_config =
      model_config_json(config, num_styles, image_channels);
  if (config.model == ModelKind::kCProbUNet) {
    impl_->cprob = CProbUNet(CProbUNetConfig::from_json(model_config));
    load_module_checkpoint(*impl_->cprob, checkpoint_path, model_config);
    impl_->cprob->eval();
  } else {
    impl_->cssn = CSSN(CSSNConfig::from_json(model_config));
    load_module_checkpoint(*impl_->cssn, checkpoint_path, model_config);
    impl_->cssn->eval();
  }
}

TorchPredictor::~TorchPredictor() = default;

SegmentationMask TorchPredictor::mean_prediction(const Image& image,
                                                 const LabelStyle& style) {
  if (impl_->cprob) return impl_->cprob->mean_prediction(image, style);
  return impl_->cssn->mean_prediction(image, style);
}

PredictiveSampleSet TorchPredictor::sample_predictions(const Image& image,
                                                       const LabelStyle& style,
                                                       int n,
                                                       std::uint64_t seed) {
  auto gen = make_generator(seed);
  if (impl_->cprob) return impl_->cprob->sample_predictions(image, style, n, gen);
  return impl_->cssn->sample_predictions(image, style, n, gen);
}

ProbabilityField TorchPredictor::predictive_probability(const Image& image,
                                                        const LabelStyle& style,
                                                        int n,
                                                        std::uint64_t seed) {
  auto gen = make_generator(seed);
  if (impl_->cprob) {
    return impl_->cprob->predictive_probability(image, style, n, gen);
  }
  return impl_->cssn->predictive_probability(image, style, n, gen);
}

std::unique_ptr<TorchPredictor> predictor_for_run(const RunRecord& record,
                                                  const LoadedDataset& dataset,
                                                  bool best) {
  const std::vector<AnnotatedSample>* any = nullptr;
  for (const auto* bucket :
       {&dataset.split.train, &dataset.split.val, &dataset.split.test}) {
    if (!bucket->empty()) {
      any = bucket;
      break;
    }
  }
  if (any == nullptr) throw std::runtime_error("dataset has no samples");
  return std::make_unique<TorchPredictor>(
      record.config, dataset.num_styles, any->front().image.channels,
      best ? record.best_checkpoint : record.last_checkpoint);
}

namespace {

std::uint64_t fnv1a(std::uint64_t hash, const void* data, std::size_t size) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    hash ^= bytes[i];
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::uint64_t fnv1a_long(std::uint64_t hash, long value) {
  return fnv1a(hash, &value, sizeof(value));
}

}  // namespace

std::string dataset_fingerprint(const LoadedDataset& dataset,
                                const std::string& bucket) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  hash = fnv1a(hash, bucket.data(), bucket.size());
  hash = fnv1a_long(hash, dataset.num_styles);
  for (const auto& sample : dataset.bucket(bucket)) {
    hash = fnv1a(hash, sample.sample_id.data(), sample.sample_id.size());
    hash = fnv1a_long(hash, sample.image.height);
    hash = fnv1a_long(hash, sample.image.width);
    for (const auto& ann : sample.annotations) {
      hash = fnv1a_long(hash, ann.style.id);
      hash = fnv1a_long(hash, ann.mask.area());
    }
  }
  char buffer[17];
  std::snprintf(buffer, sizeof(buffer), "%016llx",
                static_cast<unsigned long long>(hash));
  return buffer;
}

namespace {

std::vector<double> resolved_style_probs(const EvalOptions& options,
                                         int num_styles) {
  if (options.style_probs.empty()) {
    return std::vector<double>(num_styles, 1.0 / num_styles);
  }
  const auto& probs = options.style_probs;
  if (static_cast<int>(probs.size()) != num_styles) {
    throw std::invalid_argument("style_probs length must equal num_styles");
  }
  double sum = 0.0;
  for (double p : probs) {
    if (p < 0.0) throw std::invalid_argument("style_probs must be >= 0");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw std::invalid_argument("style_probs must sum to 1");
  }
  return probs;
}

/// Full-distribution sampling, batched per style: the style of each draw is
/// picked first, then the per-style batches are drawn in one predictor call
/// each and dealt back out in draw order.
PredictiveSampleSet pooled_samples(Predictor& predictor, const Image& image,
                                   int num_styles, int n,
                                   const std::vector<double>& style_probs,
                                   std::uint64_t seed) {
  Rng rng(seed);
  std::vector<int> draw_style(n, 0);
  std::vector<int> counts(num_styles, 0);
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    double acc = 0.0;
    int picked = num_styles - 1;
    for (int s = 0; s < num_styles; ++s) {
      acc += style_probs[s];
      if (u < acc) {
        picked = s;
        break;
      }
    }
    draw_style[i] = picked;
    ++counts[picked];
  }

  std::vector<PredictiveSampleSet> per_style(num_styles);
  for (int s = 0; s < num_styles; ++s) {
    if (counts[s] > 0) {
      per_style[s] = predictor.sample_predictions(
          image, LabelStyle(s, num_styles), counts[s], mix_seed(seed, 100 + s));
    }
  }

  PredictiveSampleSet pooled;
  pooled.source = per_style[draw_style[0]].source;
  std::vector<int> used(num_styles, 0);
  for (int i = 0; i < n; ++i) {
    const int s = draw_style[i];
    pooled.masks.push_back(per_style[s].masks[used[s]++]);
  }
  return pooled;
}

struct ImageEval {
  std::vector<SegmentationMask> mean_masks;   // indexed by style
  std::vector<PredictiveSampleSet> samples;   // indexed by style
  std::vector<ProbabilityField> fields;       // indexed by style
  PredictiveSampleSet pooled;
};

StrataSummary summarize(const std::vector<double>& values) {
  StrataSummary summary;
  summary.count = static_cast<long>(values.size());
  if (values.empty()) return summary;  // medians/means stay 0 when empty
  summary.median_entropy = median(values);
  double sum = 0.0;
  for (double v : values) sum += v;
  summary.mean_entropy = sum / static_cast<double>(values.size());
  return summary;
}

std::vector<double> concat(const std::vector<double>& a,
                           const std::vector<double>& b) {
  std::vector<double> out = a;
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

}  // namespace

EvalReport evaluate_predictor(Predictor& predictor, const LoadedDataset& dataset,
                              const EvalOptions& options,
                              const std::string& run_id) {
  const auto& bucket = dataset.bucket(options.bucket);
  if (bucket.empty()) {
    throw std::runtime_error("bucket '" + options.bucket + "' is empty");
  }
  const int num_styles = dataset.num_styles;
  const auto style_probs = resolved_style_probs(options, num_styles);

  std::vector<long> pairs(num_styles, 0);
  for (const auto& sample : bucket) {
    for (const auto& ann : sample.annotations) ++pairs[ann.style.id];
  }
  for (int s = 0; s < num_styles; ++s) {
    if (pairs[s] == 0) {
      throw std::runtime_error("style " + std::to_string(s) +
                               " has no annotations in bucket '" +
                               options.bucket + "'");
    }
  }

  const bool truths_cover_bucket = [&] {
    for (const auto& sample : bucket) {
      if (dataset.truths.find(sample.sample_id) == dataset.truths.end()) {
        return false;
      }
    }
    return true;
  }();

  const int n = options.samples_per_image;
  const auto eval_image = [&](std::size_t index) {
    const auto& sample = bucket[index];
    const std::uint64_t image_seed = mix_seed(options.seed, index);
    ImageEval eval;
    for (int s = 0; s < num_styles; ++s) {
      const LabelStyle style(s, num_styles);
      eval.mean_masks.push_back(predictor.mean_prediction(sample.image, style));
      eval.samples.push_back(predictor.sample_predictions(
          sample.image, style, n, mix_seed(image_seed, 2 * s)));
      eval.fields.push_back(predictor.predictive_probability(
          sample.image, style, n, mix_seed(image_seed, 2 * s + 1)));
    }
    eval.pooled = pooled_samples(predictor, sample.image, num_styles, n,
                                 style_probs, mix_seed(image_seed, 1000));
    return eval;
  };

  std::vector<ImageEval> evals(bucket.size());
  const int threads =
      std::min<int>(std::max(1, options.threads), static_cast<int>(bucket.size()));
  if (threads == 1) {
    for (std::size_t i = 0; i < bucket.size(); ++i) evals[i] = eval_image(i);
  } else {
    std::vector<std::thread> pool;
    std::mutex error_mutex;
    std::exception_ptr first_error;
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        try {
          for (std::size_t i = t; i < bucket.size(); i += threads) {
            evals[i] = eval_image(i);
          }
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      });
    }
    for (auto& worker : pool) worker.join();
    if (first_error) std::rethrow_exception(first_error);
  }

  EvalReport report;
  report.run_id = run_id;
  report.bucket = options.bucket;
  report.fingerprint = dataset_fingerprint(dataset, options.bucket);
  report.samples_per_image = n;
  report.seed = options.seed;

  std::vector<double> iou_sum(num_styles, 0.0);
  std::vector<double> ged_sum(num_styles, 0.0);
  std::vector<long> ged_images(num_styles, 0);
  std::vector<std::vector<ProbabilityField>> auroc_fields(num_styles);
  std::vector<std::vector<SegmentationMask>> auroc_masks(num_styles);
  double pooled_ged_sum = 0.0;
  std::vector<double> bias_differences;

  for (std::size_t i = 0; i < bucket.size(); ++i) {
    const auto& sample = bucket[i];
    const auto& eval = evals[i];

    std::vector<std::vector<SegmentationMask>> by_style(num_styles);
    std::vector<SegmentationMask> all_annotations;
    for (const auto& ann : sample.annotations) {
      by_style[ann.style.id].push_back(ann.mask);
      all_annotations.push_back(ann.mask);

      const int s = ann.style.id;
      iou_sum[s] += iou(eval.mean_masks[s], ann.mask);
      auroc_fields[s].push_back(eval.fields[s]);
      auroc_masks[s].push_back(ann.mask);
      report.strata.merge(error_entropy_strata(eval.fields[s], ann.mask));
    }

    for (int s = 0; s < num_styles; ++s) {
      if (!by_style[s].empty()) {
        ged_sum[s] += ged_squared(eval.samples[s], by_style[s]);
        ++ged_images[s];
      }
    }
    pooled_ged_sum += ged_squared(eval.pooled, all_annotations);

    std::vector<SegmentationMask> reference;
    if (truths_cover_bucket) {
      reference.push_back(dataset.truths.at(sample.sample_id));
    } else {
      reference = by_style[0];
    }
    if (!reference.empty()) {
      const AreaBias image_bias = area_bias(eval.samples[0], reference);
      bias_differences.insert(bias_differences.end(),
                              image_bias.differences.begin(),
                              image_bias.differences.end());
    }
  }

  for (int s = 0; s < num_styles; ++s) {
    StyleMetrics metrics;
    metrics.style_id = s;
    metrics.pairs = pairs[s];
    metrics.mean_iou = iou_sum[s] / static_cast<double>(pairs[s]);
    metrics.auroc = auroc_pixelwise(auroc_fields[s], auroc_masks[s]);
    metrics.mean_ged_squared = ged_sum[s] / static_cast<double>(ged_images[s]);
    report.per_style.push_back(metrics);
  }
  report.pooled_ged_squared =
      pooled_ged_sum / static_cast<double>(bucket.size());
  report.bias = AreaBias::from_differences(std::move(bias_differences));
  report.bias_reference =
      truths_cover_bucket ? "truth-masks" : "style0-annotations";

  report.strata_summary[0] = summarize(report.strata.tp);
  report.strata_summary[1] = summarize(report.strata.fp);
  report.strata_summary[2] = summarize(report.strata.tn);
  report.strata_summary[3] = summarize(report.strata.fn);
  const auto correct = concat(report.strata.tp, report.strata.tn);
  const auto error = concat(report.strata.fp, report.strata.fn);
  report.median_entropy_correct = correct.empty() ? 0.0 : median(correct);
  report.median_entropy_error = error.empty() ? 0.0 : median(error);
  return report;
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json per_style_json = nlohmann::json::array();
  for (const auto& m : per_style) {
    per_style_json.push_back({{"style", m.style_id},
                              {"pairs", m.pairs},
                              {"mean_iou", m.mean_iou},
                              {"auroc", m.auroc},
                              {"ged_squared", m.mean_ged_squared}});
  }
  static constexpr const char* kClassNames[4] = {"tp", "fp", "tn", "fn"};
  nlohmann::json strata_json;
  for (int c = 0; c < 4; ++c) {
    strata_json[kClassNames[c]] = {
        {"count", strata_summary[c].count},
        {"median_entropy", strata_summary[c].median_entropy},
        {"mean_entropy", strata_summary[c].mean_entropy}};
  }
  return {{"run_id", run_id},
          {"bucket", bucket},
          {"fingerprint", fingerprint},
          {"samples_per_image", samples_per_image},
          {"seed", seed},
          {"per_style", per_style_json},
          {"pooled_ged_squared", pooled_ged_squared},
          {"area_bias",
           {{"mean", bias.mean},
            {"stddev", bias.stddev},
            {"pairs", bias.differences.size()},
            {"reference", bias_reference}}},
          {"entropy_strata", strata_json},
          {"median_entropy_correct", median_entropy_correct},
          {"median_entropy_error", median_entropy_error}};
}

EvalReport EvalReport::from_json(const nlohmann::json& j) {
  EvalReport report;
  report.run_id = j.at("run_id").get<std::string>();
  report.bucket = j.at("bucket").get<std::string>();
  report.fingerprint = j.at("fingerprint").get<std::string>();
  report.samples_per_image = j.at("samples_per_image").get<int>();
  report.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& entry : j.at("per_style")) {
    StyleMetrics m;
    m.style_id = entry.at("style").get<int>();
    m.pairs = entry.at("pairs").get<long>();
    m.mean_iou = entry.at("mean_iou").get<double>();
    m.auroc = entry.at("auroc").get<double>();
    m.mean_ged_squared = entry.at("ged_squared").get<double>();
    report.per_style.push_back(m);
  }
  report.pooled_ged_squared = j.at("pooled_ged_squared").get<double>();
  report.bias.mean = j.at("area_bias").at("mean").get<double>();
  report.bias.stddev = j.at("area_bias").at("stddev").get<double>();
  report.bias_reference = j.at("area_bias").at("reference").get<std::string>();
  static constexpr const char* kClassNames[4] = {"tp", "fp", "tn", "fn"};
  for (int c = 0; c < 4; ++c) {
    const auto& entry = j.at("entropy_strata").at(kClassNames[c]);
    report.strata_summary[c].count = entry.at("count").get<long>();
    report.strata_summary[c].median_entropy =
        entry.at("median_entropy").get<double>();
    report.strata_summary[c].mean_entropy =
        entry.at("mean_entropy").get<double>();
  }
  report.median_entropy_correct = j.at("median_entropy_correct").get<double>();
  report.median_entropy_error = j.at("median_entropy_error").get<double>();
  return report;
}

EvalReport evaluate_run(const RunRecord& record, const LoadedDataset& dataset,
                        const EvalOptions& options) {
  auto predictor = predictor_for_run(record, dataset);
  EvalReport report =
      evaluate_predictor(*predictor, dataset, options, record.config.run_id);
  const std::string run_dir = record.config.run_dir();
  write_metrics_files(report, run_dir);
  emit_plots(report, (fs::path(run_dir) / "plots").string());
  return report;
}

void write_metrics_files(const EvalReport& report, const std::string& run_dir) {
  fs::create_directories(run_dir);
  {
    std::ofstream out(fs::path(run_dir) / "metrics.json");
    if (!out) throw std::runtime_error("cannot write metrics.json");
    out << report.to_json().dump(2) << "\n";
  }

  std::ofstream csv(fs::path(run_dir) / "metrics.csv");
  if (!csv) throw std::runtime_error("cannot write metrics.csv");
  csv << std::setprecision(17);
  csv << "run,section,style,metric,value\n";
  const auto row = [&](const std::string& section, const std::string& style,
                       const std::string& metric, double value) {
    csv << report.run_id << ',' << section << ',' << style << ',' << metric
        << ',' << value << '\n';
  };
  for (const auto& m : report.per_style) {
    const std::string style = std::to_string(m.style_id);
    row("per_style", style, "pairs", static_cast<double>(m.pairs));
    row("per_style", style, "mean_iou", m.mean_iou);
    row("per_style", style, "auroc", m.auroc);
    row("per_style", style, "ged_squared", m.mean_ged_squared);
  }
  row("pooled", "", "ged_squared", report.pooled_ged_squared);
  row("area_bias", "", "mean", report.bias.mean);
  row("area_bias", "", "stddev", report.bias.stddev);
  static constexpr const char* kClassNames[4] = {"tp", "fp", "tn", "fn"};
  for (int c = 0; c < 4; ++c) {
    row("entropy_strata", kClassNames[c], "count",
        static_cast<double>(report.strata_summary[c].count));
    row("entropy_strata", kClassNames[c], "median_entropy",
        report.strata_summary[c].median_entropy);
    row("entropy_strata", kClassNames[c], "mean_entropy",
        report.strata_summary[c].mean_entropy);
  }
  row("summary", "", "median_entropy_correct", report.median_entropy_correct);
  row("summary", "", "median_entropy_error", report.median_entropy_error);
}

namespace {

// best_key maps a value to the quantity actually compared (identity for
// most rows; |value| for the signed bias row).
ComparisonRow make_row(const std::string& metric, bool higher_is_better,
                       std::vector<double> values,
                       double (*best_key)(double) = nullptr) {
  ComparisonRow row;
  row.metric = metric;
  row.higher_is_better = higher_is_better;
  row.values = std::move(values);
  row.deltas.reserve(row.values.size());
  for (double v : row.values) row.deltas.push_back(v - row.values.front());
  row.best_index = 0;
  for (std::size_t i = 1; i < row.values.size(); ++i) {
    const double a = best_key ? best_key(row.values[i]) : row.values[i];
    const double b = best_key ? best_key(row.values[row.best_index])
                              : row.values[row.best_index];
    if (higher_is_better ? a > b : a < b) row.best_index = static_cast<int>(i);
  }
  return row;
}

}  // namespace

ComparisonReport compare_runs(const std::vector<EvalReport>& reports) {
  if (reports.size() < 2) {
    throw std::invalid_argument("compare_runs needs at least two reports");
  }
  for (const auto& report : reports) {
    if (report.fingerprint != reports.front().fingerprint ||
        report.bucket != reports.front().bucket) {
      throw std::invalid_argument(
          "compare_runs: reports cover different test splits");
    }
    if (report.per_style.size() != reports.front().per_style.size()) {
      throw std::invalid_argument("compare_runs: style tables differ");
    }
  }

  ComparisonReport comparison;
  for (const auto& report : reports) comparison.run_ids.push_back(report.run_id);

  const std::size_t num_styles = reports.front().per_style.size();
  const auto gather = [&](auto&& get) {
    std::vector<double> values;
    for (const auto& report : reports) values.push_back(get(report));
    return values;
  };

  for (std::size_t s = 0; s < num_styles; ++s) {
    const std::string suffix = "/style" + std::to_string(s);
    comparison.rows.push_back(make_row(
        "iou" + suffix, true,
        gather([&](const EvalReport& r) { return r.per_style[s].mean_iou; })));
    comparison.rows.push_back(make_row(
        "auroc" + suffix, true,
        gather([&](const EvalReport& r) { return r.per_style[s].auroc; })));
    comparison.rows.push_back(
        make_row("ged_squared" + suffix, false, gather([&](const EvalReport& r) {
                   return r.per_style[s].mean_ged_squared;
                 })));
  }
  comparison.rows.push_back(make_row(
      "ged_squared/pooled", false,
      gather([](const EvalReport& r) { return r.pooled_ged_squared; })));
  comparison.rows.push_back(make_row(
      "area_bias/mean", false,
      gather([](const EvalReport& r) { return r.bias.mean; }),
      [](double v) { return std::abs(v); }));
  comparison.rows.push_back(make_row(
      "area_bias/stddev", false,
      gather([](const EvalReport& r) { return r.bias.stddev; })));
  comparison.rows.push_back(
      make_row("entropy_error_minus_correct", true, gather([](const EvalReport& r) {
                 return r.median_entropy_error - r.median_entropy_correct;
               })));
  return comparison;
}

nlohmann::json ComparisonReport::to_json() const {
  nlohmann::json rows_json = nlohmann::json::array();
  for (const auto& row : rows) {
    rows_json.push_back({{"metric", row.metric},
                         {"higher_is_better", row.higher_is_better},
                         {"values", row.values},
                         {"deltas", row.deltas},
                         {"best", run_ids[row.best_index]}});
  }
  return {{"runs", run_ids}, {"rows", rows_json}};
}

std::string ComparisonReport::to_text() const {
  std::ostringstream out;
  out << std::left << std::setw(32) << "metric";
  for (const auto& id : run_ids) out << std::setw(16) << id;
  out << "best\n";
  out << std::string(32 + 16 * run_ids.size() + 4, '-') << "\n";
  for (const auto& row : rows) {
    out << std::setw(32) << row.metric;
    for (double v : row.values) {
      std::ostringstream cell;
      cell << std::fixed << std::setprecision(4) << v;
      out << std::setw(16) << cell.str();
    }
    out << run_ids[row.best_index] << "\n";
  }
  return out.str();
}

std::vector<std::string> emit_plots(const EvalReport& report,
                                    const std::string& plot_dir) {
  fs::create_directories(plot_dir);
  std::vector<std::string> written;

  const std::vector<DistributionGroup> bias_groups = {
      {report.run_id, report.bias.differences}};
  const std::string bias_csv = (fs::path(plot_dir) / "area_bias.csv").string();
  const std::string bias_svg = (fs::path(plot_dir) / "area_bias.svg").string();
  const std::string bias_title = report.bias_reference == "truth-masks"
                                     ? "Sampled area minus truth area"
                                     : "Sampled area minus style-0 annotation area";
  write_values_csv(bias_csv, bias_groups);
  write_violin_svg(bias_svg, bias_title, "area difference (px)", bias_groups);
  written.push_back(bias_csv);
  written.push_back(bias_svg);

  const std::vector<DistributionGroup> strata_groups = {
      {"TP", report.strata.tp},
      {"FP", report.strata.fp},
      {"TN", report.strata.tn},
      {"FN", report.strata.fn}};
  const std::string strata_csv =
      (fs::path(plot_dir) / "entropy_strata.csv").string();
  const std::string strata_svg =
      (fs::path(plot_dir) / "entropy_strata.svg").string();
  write_values_csv(strata_csv, strata_groups);
  write_violin_svg(strata_svg, "Pixel entropy by confusion class",
                   "entropy (nats)", strata_groups);
  written.push_back(strata_csv);
  written.push_back(strata_svg);
  return written;
}

}  // namespace styleseg
