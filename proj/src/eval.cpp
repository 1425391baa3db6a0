#include "lrcl/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <thread>

#include "lrcl/log.hpp"

namespace lrcl {

std::size_t ConfusionMatrix::total() const {
  std::size_t n = 0;
  for (auto c : counts) n += c;
  return n;
}

std::size_t ConfusionMatrix::trace() const {
  std::size_t n = 0;
  for (std::size_t c = 0; c < classes; ++c) n += at(c, c);
  return n;
}

std::size_t ConfusionMatrix::support(std::size_t truth) const {
  std::size_t n = 0;
  for (std::size_t p = 0; p < classes; ++p) n += at(truth, p);
  return n;
}

std::size_t ConfusionMatrix::predicted(std::size_t pred) const {
  std::size_t n = 0;
  for (std::size_t t = 0; t < classes; ++t) n += at(t, pred);
  return n;
}

std::string ConfusionMatrix::to_csv() const {
  auto name = [&](std::size_t c) { return c < class_names.size() ? class_names[c] : std::to_string(c); };
  std::string out = "true\\pred";
  for (std::size_t p = 0; p < classes; ++p) out += "," + name(p);
  out += "\n";
  for (std::size_t t = 0; t < classes; ++t) {
    out += name(t);
    for (std::size_t p = 0; p < classes; ++p) out += "," + std::to_string(at(t, p));
    out += "\n";
  }
  return out;
}

ConfusionMatrix confusion(std::span<const int> predictions, std::span<const int> labels, std::size_t classes) {
  if (predictions.size() != labels.size()) {
    throw ShapeError("confusion: " + std::to_string(predictions.size()) + " predictions for " +
                     std::to_string(labels.size()) + " labels");
  }
  if (classes == 0) throw ParameterError("confusion: need at least one class");
  ConfusionMatrix cm;
  cm.classes = classes;
  cm.counts.assign(classes * classes, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int t = labels[i];
    const int p = predictions[i];
    if (t < 0 || static_cast<std::size_t>(t) >= classes || p < 0 || static_cast<std::size_t>(p) >= classes) {
      throw LabelError("confusion: label " + std::to_string(t) + " / prediction " + std::to_string(p) +
                       " outside [0, " + std::to_string(classes) + ")");
    }
    ++cm.counts[static_cast<std::size_t>(t) * classes + static_cast<std::size_t>(p)];
  }
  return cm;
}

Metrics metrics(const ConfusionMatrix& cm) {
  const std::size_t total = cm.total();
  if (total == 0) throw EmptyError("metrics: confusion matrix is empty");
  Metrics m;
  m.accuracy = static_cast<double>(cm.trace()) / static_cast<double>(total);
  m.per_class_f1.assign(cm.classes, 0.0);
  double macro = 0.0, weighted = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < cm.classes; ++c) {
    const std::size_t tp = cm.at(c, c);
    const std::size_t support = cm.support(c);
    const std::size_t pred = cm.predicted(c);
    const double precision = pred == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(pred);
    const double recall = support == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(support);
    const double f1 = precision + recall == 0.0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
    m.per_class_f1[c] = f1;
    if (support == 0) continue;
    ++present;
    macro += f1;
    weighted += f1 * static_cast<double>(support);
  }
  m.macro_f1 = macro / static_cast<double>(present);
  m.weighted_f1 = weighted / static_cast<double>(total);
  return m;
}

nlohmann::json RunReport::to_json() const {
  nlohmann::json matrix = nlohmann::json::array();
  for (std::size_t t = 0; t < confusion.classes; ++t) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t p = 0; p < confusion.classes; ++p) row.push_back(confusion.at(t, p));
    matrix.push_back(row);
  }
  return {{"accuracy", metrics.accuracy},
          {"macro_f1", metrics.macro_f1},
          {"weighted_f1", metrics.weighted_f1},
          {"per_class_f1", metrics.per_class_f1},
          {"class_names", confusion.class_names},
          {"confusion", matrix},
          {"evaluated", evaluated},
          {"skipped_unlabeled", skipped_unlabeled},
          {"side", side}};
}

std::vector<int> predict(const EncoderParams& encoder, const ClassifierParams& classifier, const Tensor& x) {
  const Tensor logits = classify(classifier, encode(encoder, x));
  const std::size_t rows = logits.dim(0), classes = logits.dim(1);
  std::vector<int> out(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < classes; ++c) {
      if (logits.at(i, c) > logits.at(i, best)) best = c;
    }
    out[i] = static_cast<int>(best);
  }
  return out;
}

RunReport evaluate(const EncoderParams& encoder, const ClassifierParams& classifier, const WindowedDataset& data,
                   InputPolicy side) {
  RunReport report;
  report.side = to_string(side);
  std::vector<const Tensor*> windows;
  std::vector<int> labels;
  for (const auto& p : data.pairs) {
    if (p.label == kUnlabeled) {
      ++report.skipped_unlabeled;
      continue;
    }
    if (side != InputPolicy::Right) {
      windows.push_back(&p.left);
      labels.push_back(p.label);
    }
    if (side != InputPolicy::Left) {
      windows.push_back(&p.right);
      labels.push_back(p.label);
    }
  }
  if (report.skipped_unlabeled > 0) {
    log_info("evaluate: skipped " + std::to_string(report.skipped_unlabeled) + " unlabeled windows");
  }
  if (windows.empty()) throw EmptyError("evaluate: no labeled windows");
  std::vector<int> predictions;
  constexpr std::size_t kBatch = 256;
  for (std::size_t start = 0; start < windows.size(); start += kBatch) {
    const std::size_t n = std::min(kBatch, windows.size() - start);
    const auto part = predict(encoder, classifier, stack<float>(std::span(windows).subspan(start, n)));
    predictions.insert(predictions.end(), part.begin(), part.end());
  }
  report.confusion = confusion(predictions, labels, classifier.num_classes());
  report.confusion.class_names = data.class_names;
  report.metrics = metrics(report.confusion);
  report.evaluated = windows.size();
  return report;
}

MetricStats mean_std(std::span<const double> values) {
  if (values.empty()) throw EmptyError("mean_std: no values");
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - mean) * (v - mean);
  return {mean, std::sqrt(sq / static_cast<double>(values.size()))};
}

nlohmann::json AggregateReport::to_json() const {
  auto stats = [](const MetricStats& s) { return nlohmann::json{{"mean", s.mean}, {"std", s.stddev}}; };
  return {{"runs", runs},
          {"accuracy", stats(accuracy)},
          {"macro_f1", stats(macro_f1)},
          {"weighted_f1", stats(weighted_f1)}};
}

AggregateReport aggregate(std::span<const RunReport> runs) {
  if (runs.empty()) throw EmptyError("aggregate: no runs");
  std::vector<double> acc, macro, weighted;
  for (const auto& r : runs) {
    acc.push_back(r.metrics.accuracy);
    macro.push_back(r.metrics.macro_f1);
    weighted.push_back(r.metrics.weighted_f1);
  }
  return {runs.size(), mean_std(acc), mean_std(macro), mean_std(weighted)};
}

WindowedDataset label_subset(const WindowedDataset& train, std::size_t labels_per_class, std::uint64_t seed) {
  if (labels_per_class == 0) return labeled_only(train);
  Rng rng = Rng(seed).fork(9);
  return labeled_only(subsample_labels(train, labels_per_class, rng));
}

namespace {

RunReport ssl_arm(const EncoderParams& pretrained, const WindowedDataset& labeled, const ExperimentData& data,
                  const FinetuneConfig& finetune_cfg, InputPolicy eval_side) {
  Rng init = Rng(finetune_cfg.seed).fork(8);
  const ClassifierParams classifier = init_classifier(init, data.train.num_classes());
  const auto tuned = finetune(pretrained, classifier, labeled, data.validation, finetune_cfg);
  return evaluate(tuned.encoder, tuned.classifier, data.test, eval_side);
}

RunReport supervised_arm(const WindowedDataset& labeled, const ExperimentData& data, const FinetuneConfig& cfg,
                         InputPolicy eval_side) {
  const auto trained = train_supervised(labeled, data.validation, cfg);
  return evaluate(trained.encoder, trained.classifier, data.test, eval_side);
}

EncoderParams pretrained_encoder(const ExperimentData& data, const PretrainConfig& pretrain) {
  Rng init = Rng(pretrain.seed).fork(7);
  EncoderParams encoder = init_encoder(init);
  HeadParams head = init_head(init, pretrain.latent_size);
  pretrain_lr_ssl(data.unlabeled, encoder, head, pretrain);
  return encoder;
}

}  // namespace

RunReport run_ssl(const ExperimentData& data, const PretrainConfig& pretrain, const FinetuneConfig& finetune_cfg,
                  std::size_t labels_per_class, InputPolicy eval_side) {
  const EncoderParams encoder = pretrained_encoder(data, pretrain);
  return ssl_arm(encoder, label_subset(data.train, labels_per_class, finetune_cfg.seed), data, finetune_cfg,
                 eval_side);
}

RunReport run_supervised(const ExperimentData& data, const FinetuneConfig& finetune_cfg, std::size_t labels_per_class,
                         InputPolicy eval_side) {
  return supervised_arm(label_subset(data.train, labels_per_class, finetune_cfg.seed), data, finetune_cfg,
                        eval_side);
}

std::vector<CurveRow> reduced_label_curve(const EncoderParams& pretrained, const ExperimentData& data,
                                          const CurveConfig& config) {
  if (config.counts.empty()) throw ConfigError("reduced-label curve: no label counts");
  if (config.repeats == 0) throw ConfigError("reduced-label curve: repeats must be positive");
  std::vector<CurveRow> rows;
  for (std::size_t count : config.counts) {
    std::vector<RunReport> ssl, supervised;
    std::string skipped;
    for (std::size_t r = 0; r < config.repeats; ++r) {
      const std::uint64_t seed = config.seed + r;
      WindowedDataset labeled;
      try {
        labeled = label_subset(data.train, count, seed);
      } catch (const DataError& e) {
        skipped = e.what();
        log_info("reduced-label curve: skipping " + std::to_string(count) + " labels per class: " + skipped);
        break;
      }
      FinetuneConfig cfg = config.finetune;
      cfg.seed = seed;
      if (config.on_arm) config.on_arm(count, r, "ssl", labeled);
      ssl.push_back(ssl_arm(pretrained, labeled, data, cfg, config.eval_side));
      if (config.on_arm) config.on_arm(count, r, "supervised", labeled);
      supervised.push_back(supervised_arm(labeled, data, cfg, config.eval_side));
    }
    CurveRow a{count, "ssl", {}, skipped};
    CurveRow b{count, "supervised", {}, skipped};
    if (skipped.empty()) {
      a.report = aggregate(ssl);
      b.report = aggregate(supervised);
    }
    rows.push_back(std::move(a));
    rows.push_back(std::move(b));
  }
  return rows;
}

namespace {

std::string stats_columns(const AggregateReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f", r.runs, r.accuracy.mean, r.accuracy.stddev,
                r.macro_f1.mean, r.macro_f1.stddev, r.weighted_f1.mean, r.weighted_f1.stddev);
  return buf;
}

std::string csv_field(std::string s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

}  // namespace

std::string curve_csv(std::span<const CurveRow> rows) {
  std::string out =
      "labels_per_class,method,runs,accuracy_mean,accuracy_std,macro_f1_mean,macro_f1_std,weighted_f1_mean,"
      "weighted_f1_std,skipped\n";
  for (const auto& r : rows) {
    out += std::to_string(r.labels_per_class) + "," + r.method + "," + stats_columns(r.report) + "," +
           csv_field(r.skipped) + "\n";
  }
  return out;
}

std::vector<SweepCell> sweep(const ExperimentData& data, const SweepConfig& config) {
  if (config.batch_sizes.empty() || config.latent_sizes.empty()) throw ConfigError("sweep: empty grid");
  if (config.repeats == 0) throw ConfigError("sweep: repeats must be positive");
  std::vector<SweepCell> cells;
  for (auto b : config.batch_sizes) {
    for (auto s : config.latent_sizes) cells.push_back({b, s, {}, {}});
  }

  auto run_cell = [&](SweepCell& cell) {
    try {
      std::vector<RunReport> runs;
      for (std::size_t r = 0; r < config.repeats; ++r) {
        PretrainConfig pre = config.pretrain;
        pre.batch_size = cell.batch_size;
        pre.latent_size = cell.latent_size;
        pre.seed = config.pretrain.seed + r;
        FinetuneConfig fine = config.finetune;
        fine.seed = config.finetune.seed + r;
        runs.push_back(run_ssl(data, pre, fine, config.labels_per_class, config.eval_side));
      }
      cell.report = aggregate(runs);
    } catch (const Error& e) {
      cell.error = e.what();
      log_info("sweep: cell batch=" + std::to_string(cell.batch_size) + " latent=" + std::to_string(cell.latent_size) +
               " failed: " + cell.error);
    }
  };

  const std::size_t jobs = std::max<std::size_t>(1, std::min(config.jobs, cells.size()));
  if (jobs == 1) {
    for (auto& cell : cells) run_cell(cell);
    return cells;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < cells.size(); i = next++) run_cell(cells[i]);
    });
  }
  for (auto& t : workers) t.join();
  return cells;
}

std::string sweep_csv(std::span<const SweepCell> cells) {
  std::string out =
      "batch_size,latent_size,runs,accuracy_mean,accuracy_std,macro_f1_mean,macro_f1_std,weighted_f1_mean,"
      "weighted_f1_std,error\n";
  for (const auto& c : cells) {
    out += std::to_string(c.batch_size) + "," + std::to_string(c.latent_size) + "," + stats_columns(c.report) + "," +
           csv_field(c.error) + "\n";
  }
  return out;
}

}  // namespace lrcl
