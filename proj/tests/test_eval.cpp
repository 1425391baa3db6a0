#include <doctest.h>

#include <cmath>
#include <map>

#include "lrcl/eval.hpp"
#include "oracles.hpp"

using namespace lrcl;

namespace {

// Direct per-class F1 from prediction/label lists, no confusion matrix.
struct OracleMetrics {
  double accuracy = 0.0, macro = 0.0, weighted = 0.0;
};

OracleMetrics oracle_metrics(const std::vector<int>& pred, const std::vector<int>& truth, int classes) {
  OracleMetrics m;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == truth[i];
  m.accuracy = static_cast<double>(correct) / static_cast<double>(pred.size());
  int present = 0;
  for (int c = 0; c < classes; ++c) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      tp += pred[i] == c && truth[i] == c;
      fp += pred[i] == c && truth[i] != c;
      fn += pred[i] != c && truth[i] == c;
    }
    if (tp + fn == 0) continue;
    ++present;
    const double p = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    const double r = tp / (tp + fn);
    const double f1 = p + r > 0 ? 2 * p * r / (p + r) : 0.0;
    m.macro += f1;
    m.weighted += f1 * (tp + fn) / static_cast<double>(pred.size());
  }
  m.macro /= present;
  return m;
}

ExperimentData tiny_experiment(std::uint64_t seed) {
  SynthConfig c;
  c.num_classes = 3;
  c.windows_per_class = 12;
  ExperimentData d;
  Rng rng(seed);
  d.train = synth_generate(c, rng);
  c.windows_per_class = 4;
  d.validation = synth_generate(c, rng);
  d.test = synth_generate(c, rng);
  d.unlabeled = d.train;
  for (auto& p : d.unlabeled.pairs) p.label = kUnlabeled;
  return d;
}

}  // namespace

TEST_SUITE("eval") {
  TEST_CASE("metrics on a hand-computed matrix") {
    // truth 0: 2 right, 1 predicted as 1; truth 1: 1 right; truth 2: predicted as 1.
    const std::vector<int> pred{0, 0, 1, 1, 1};
    const std::vector<int> truth{0, 0, 0, 1, 2};
    const ConfusionMatrix cm = confusion(pred, truth, 3);
    CHECK(cm.at(0, 1) == 1);
    CHECK(cm.trace() == 3);
    CHECK(cm.support(0) == 3);
    CHECK(cm.predicted(1) == 3);
    const Metrics m = metrics(cm);
    CHECK(m.accuracy == doctest::Approx(0.6));
    // F1: class 0 = 0.8, class 1 = 0.5, class 2 = 0.
    CHECK(m.per_class_f1[0] == doctest::Approx(0.8));
    CHECK(m.per_class_f1[1] == doctest::Approx(0.5));
    CHECK(m.per_class_f1[2] == 0.0);
    CHECK(m.macro_f1 == doctest::Approx(1.3 / 3.0));
    CHECK(m.weighted_f1 == doctest::Approx((0.8 * 3 + 0.5) / 5.0));
  }

  TEST_CASE("metrics agree with an independent oracle on random inputs") {
    Rng rng(21);
    for (int trial = 0; trial < 300; ++trial) {
      const int classes = 2 + static_cast<int>(rng.below(6));
      const std::size_t n = 1 + rng.below(40);
      std::vector<int> pred(n), truth(n);
      for (std::size_t i = 0; i < n; ++i) {
        pred[i] = static_cast<int>(rng.below(classes));
        // Bias towards agreement so every regime appears.
        truth[i] = rng.uniform() < 0.5 ? pred[i] : static_cast<int>(rng.below(classes));
      }
      const Metrics m = metrics(confusion(pred, truth, static_cast<std::size_t>(classes)));
      const OracleMetrics o = oracle_metrics(pred, truth, classes);
      CHECK(m.accuracy == doctest::Approx(o.accuracy).epsilon(1e-12));
      CHECK(m.macro_f1 == doctest::Approx(o.macro).epsilon(1e-12));
      CHECK(m.weighted_f1 == doctest::Approx(o.weighted).epsilon(1e-12));
      CHECK(m.macro_f1 >= 0.0);
      CHECK(m.macro_f1 <= 1.0);
    }
  }

  TEST_CASE("confusion rejects bad inputs") {
    const std::vector<int> a{0, 1}, b{0}, bad{0, 3};
    CHECK_THROWS_AS(confusion(a, b, 2), ShapeError);
    CHECK_THROWS_AS(confusion(a, bad, 2), LabelError);
    CHECK_THROWS_AS(confusion(a, a, 0), ParameterError);
    CHECK_THROWS_AS(metrics(confusion({}, {}, 2)), EmptyError);
  }

  TEST_CASE("confusion csv layout") {
    ConfusionMatrix cm = confusion(std::vector<int>{0, 1, 1}, std::vector<int>{0, 1, 0}, 2);
    cm.class_names = {"a", "b"};
    CHECK(cm.to_csv() == "true\\pred,a,b\na,1,1\nb,0,1\n");
  }

  TEST_CASE("mean and population std") {
    const double v[] = {1.0, 2.0, 3.0, 4.0};
    const MetricStats s = mean_std(v);
    CHECK(s.mean == 2.5);
    CHECK(s.stddev == doctest::Approx(std::sqrt(1.25)));
    CHECK_THROWS_AS(mean_std(std::span<const double>{}), EmptyError);
  }

  TEST_CASE("evaluate counts sides and skips unlabeled windows") {
    ExperimentData d = tiny_experiment(1);
    d.test.pairs[0].label = kUnlabeled;
    Rng init(0);
    const EncoderParams enc = init_encoder(init);
    const ClassifierParams cls = init_classifier(init, 3);
    const RunReport left = evaluate(enc, cls, d.test, InputPolicy::Left);
    CHECK(left.evaluated == 11);
    CHECK(left.skipped_unlabeled == 1);
    CHECK(left.confusion.total() == 11);
    CHECK(left.side == "left");
    const RunReport both = evaluate(enc, cls, d.test, InputPolicy::Both);
    CHECK(both.evaluated == 22);
    CHECK(both.to_json().at("confusion").size() == 3);
  }

  TEST_CASE("label subsets hold exactly n per class and are reproducible") {
    const ExperimentData d = tiny_experiment(2);
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
      const std::size_t n = 1 + rng.below(12);
      const std::uint64_t seed = rng.next_u64();
      const WindowedDataset s = label_subset(d.train, n, seed);
      std::map<int, std::size_t> per_class;
      for (const auto& p : s.pairs) {
        if (p.label != kUnlabeled) ++per_class[p.label];
      }
      for (int c = 0; c < 3; ++c) CHECK(per_class[c] == n);
      const WindowedDataset again = label_subset(d.train, n, seed);
      for (std::size_t i = 0; i < s.size(); ++i) CHECK(s.pairs[i].label == again.pairs[i].label);
    }
    CHECK_THROWS_AS(label_subset(d.train, 13, 0), DataError);
  }

  TEST_CASE("reduced-label curve gives both arms the same labels and skips oversized counts") {
    const ExperimentData d = tiny_experiment(3);
    Rng init(0);
    const EncoderParams enc = init_encoder(init);
    CurveConfig cfg;
    cfg.counts = {2, 50};
    cfg.repeats = 2;
    cfg.finetune.epochs = 1;
    cfg.finetune.batch_size = 8;
    std::map<std::pair<std::size_t, std::size_t>, std::vector<std::vector<int>>> seen;
    cfg.on_arm = [&](std::size_t count, std::size_t repeat, const std::string&, const WindowedDataset& labeled) {
      std::vector<int> labels;
      for (const auto& p : labeled.pairs) labels.push_back(p.label);
      seen[{count, repeat}].push_back(labels);
    };
    const auto rows = reduced_label_curve(enc, d, cfg);
    REQUIRE(rows.size() == 4);
    CHECK(rows[0].method == "ssl");
    CHECK(rows[1].method == "supervised");
    CHECK(rows[0].report.runs == 2);
    CHECK(rows[2].skipped.size() > 0);
    CHECK(seen.size() == 2);
    for (const auto& [key, arms] : seen) {
      REQUIRE(arms.size() == 2);
      CHECK(arms[0] == arms[1]);
    }
    CHECK(seen[{2, 0}][0] != seen[{2, 1}][0]);
    const std::string csv = curve_csv(rows);
    CHECK(csv.rfind("labels_per_class,method,runs,", 0) == 0);
  }

  TEST_CASE("sweep results do not depend on the worker count") {
    const ExperimentData d = tiny_experiment(4);
    SweepConfig cfg;
    cfg.batch_sizes = {8, 64};
    cfg.latent_sizes = {8, 16};
    cfg.pretrain.epochs = 1;
    cfg.finetune.epochs = 1;
    cfg.finetune.batch_size = 8;
    cfg.labels_per_class = 3;
    const auto serial = sweep(d, cfg);
    cfg.jobs = 3;
    const auto parallel = sweep(d, cfg);
    REQUIRE(serial.size() == 4);
    CHECK(sweep_csv(serial) == sweep_csv(parallel));
    CHECK(serial[0].error.empty());
    // 36 windows cannot fill a batch of 64.
    CHECK_FALSE(serial[2].error.empty());
    CHECK(serial[2].batch_size == 64);
  }
}
