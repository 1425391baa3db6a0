#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "lrcl/data.hpp"
#include "lrcl/model.hpp"
#include "lrcl/training.hpp"

namespace lrcl {

/// counts[t * classes + p]: windows of true class t predicted as p.
struct ConfusionMatrix {
  std::size_t classes = 0;
  std::vector<std::size_t> counts;
  std::vector<std::string> class_names;

  std::size_t at(std::size_t truth, std::size_t pred) const { return counts[truth * classes + pred]; }
  std::size_t total() const;
  std::size_t trace() const;
  std::size_t support(std::size_t truth) const;
  std::size_t predicted(std::size_t pred) const;

  /// Header row "true\pred,<names...>", then one row per true class.
  std::string to_csv() const;
};

ConfusionMatrix confusion(std::span<const int> predictions, std::span<const int> labels, std::size_t classes);

struct Metrics {
  double accuracy = 0.0;
  /// Mean F1 over classes with nonzero support.
  double macro_f1 = 0.0;
  /// F1 weighted by support.
  double weighted_f1 = 0.0;
  std::vector<double> per_class_f1;
};

/// Precision or recall with a zero denominator counts as 0.
Metrics metrics(const ConfusionMatrix& cm);

struct RunReport {
  Metrics metrics;
  ConfusionMatrix confusion;
  std::size_t evaluated = 0;
  std::size_t skipped_unlabeled = 0;
  std::string side;

  nlohmann::json to_json() const;
};

/// Classifies the chosen side's windows (both sides as separate examples
/// for InputPolicy::Both). Unlabeled windows are skipped and counted.
RunReport evaluate(const EncoderParams& encoder, const ClassifierParams& classifier, const WindowedDataset& data,
                   InputPolicy side);

/// Predicted class per window row of x [B x 3 x T]; ties take the lowest class.
std::vector<int> predict(const EncoderParams& encoder, const ClassifierParams& classifier, const Tensor& x);

struct MetricStats {
  double mean = 0.0;
  double stddev = 0.0;  // population
};

MetricStats mean_std(std::span<const double> values);

struct AggregateReport {
  std::size_t runs = 0;
  MetricStats accuracy, macro_f1, weighted_f1;

  nlohmann::json to_json() const;
};

AggregateReport aggregate(std::span<const RunReport> runs);

/// Datasets an experiment draws from. `unlabeled` feeds pretraining; label
/// subsets are drawn from `train`.
struct ExperimentData {
  WindowedDataset unlabeled;
  WindowedDataset train;
  WindowedDataset validation;
  WindowedDataset test;
};

/// Pretrain (left-right), fine-tune on `labels_per_class` labels per class
/// (0 keeps every label), evaluate on the test set.
RunReport run_ssl(const ExperimentData& data, const PretrainConfig& pretrain, const FinetuneConfig& finetune,
                  std::size_t labels_per_class, InputPolicy eval_side);

/// Same label subset rule, trained from scratch.
RunReport run_supervised(const ExperimentData& data, const FinetuneConfig& finetune, std::size_t labels_per_class,
                         InputPolicy eval_side);

/// Label subset shared by both arms of run k at seed s.
WindowedDataset label_subset(const WindowedDataset& train, std::size_t labels_per_class, std::uint64_t seed);

struct CurveConfig {
  std::vector<std::size_t> counts{1, 5, 10, 50, 100};
  std::size_t repeats = 5;
  std::uint64_t seed = 0;
  FinetuneConfig finetune;
  InputPolicy eval_side = InputPolicy::Left;
  /// Called before each arm trains, with method "ssl" or "supervised".
  std::function<void(std::size_t count, std::size_t repeat, const std::string& method, const WindowedDataset& labeled)>
      on_arm;
};

struct CurveRow {
  std::size_t labels_per_class = 0;
  std::string method;
  AggregateReport report;
  /// Non-empty when the count exceeds a class's population and the row was skipped.
  std::string skipped;
};

/// Two rows per count: fine-tuning the given pretrained encoder and
/// supervised training from scratch on the identical label subsets.
std::vector<CurveRow> reduced_label_curve(const EncoderParams& pretrained, const ExperimentData& data,
                                          const CurveConfig& config);
std::string curve_csv(std::span<const CurveRow> rows);

struct SweepConfig {
  std::vector<std::size_t> batch_sizes{16, 32, 64, 128};
  std::vector<std::size_t> latent_sizes{32, 64, 96, 128};
  std::size_t repeats = 1;
  std::size_t labels_per_class = 0;
  PretrainConfig pretrain;
  FinetuneConfig finetune;
  InputPolicy eval_side = InputPolicy::Left;
  std::size_t jobs = 1;
};

struct SweepCell {
  std::size_t batch_size = 0;
  std::size_t latent_size = 0;
  AggregateReport report;
  std::string error;  // set when the cell failed
};

/// One cell per (batch, latent) in row-major order. A failing cell records
/// its error and the sweep continues. Results do not depend on `jobs`.
std::vector<SweepCell> sweep(const ExperimentData& data, const SweepConfig& config);
std::string sweep_csv(std::span<const SweepCell> cells);

}  // namespace lrcl
