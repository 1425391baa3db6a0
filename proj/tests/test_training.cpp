#include <doctest.h>

#include <cmath>

#include "lrcl/training.hpp"
#include "oracles.hpp"

using namespace lrcl;

namespace {

WindowedDataset small_synth(std::uint64_t seed, std::size_t per_class = 8) {
  SynthConfig c;
  c.num_classes = 3;
  c.windows_per_class = per_class;
  Rng rng(seed);
  return synth_generate(c, rng);
}

bool same_params(EncoderParams a, EncoderParams b) {
  const auto pa = named_parameters(a);
  const auto pb = named_parameters(b);
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (!bitwise_equal(pa[i].param->value, pb[i].param->value)) return false;
  }
  return true;
}

}  // namespace

TEST_SUITE("training") {
  TEST_CASE("cosine schedule endpoints and monotonicity") {
    CHECK(cosine_lr(0, 100, 0.004) == doctest::Approx(0.004).epsilon(1e-12));
    CHECK(cosine_lr(100, 100, 0.004) == 0.0);
    CHECK(cosine_lr(50, 100, 0.004) == doctest::Approx(0.002).epsilon(1e-12));
    for (std::size_t total : {1u, 2u, 7u, 313u}) {
      for (std::size_t s = 1; s <= total; ++s) CHECK(cosine_lr(s, total, 1.0) <= cosine_lr(s - 1, total, 1.0));
    }
    CHECK_THROWS_AS(cosine_lr(0, 0, 1.0), ParameterError);
    CHECK_THROWS_AS(cosine_lr(5, 4, 1.0), ParameterError);
  }

  TEST_CASE("sgd moves trainable params only") {
    Param a{Tensor({3}, {1.0f, 2.0f, 3.0f})};
    Param b{Tensor({2}, {1.0f, 1.0f}), false};
    Param* params[] = {&a, &b};
    const Tensor grads[] = {Tensor({3}, {0.5f, -1.0f, 0.0f}), Tensor({2}, {1.0f, 1.0f})};
    sgd_step(params, grads, 0.1);
    CHECK(a.value[0] == doctest::Approx(0.95));
    CHECK(a.value[1] == doctest::Approx(2.1));
    CHECK(a.value[2] == 3.0f);
    CHECK(b.value.storage() == std::vector<float>{1.0f, 1.0f});
    const Tensor wrong[] = {Tensor({2}), Tensor({2})};
    CHECK_THROWS_AS(sgd_step(params, wrong, 0.1), ShapeError);
  }

  TEST_CASE("sgd momentum accumulates velocity") {
    Param a{Tensor({1}, 0.0f)};
    Param* params[] = {&a};
    const Tensor grads[] = {Tensor({1}, 1.0f)};
    Sgd opt(0.9);
    opt.step(params, grads, 1.0);
    opt.step(params, grads, 1.0);
    // v1 = 1, v2 = 1.9
    CHECK(a.value[0] == doctest::Approx(-2.9));
  }

  TEST_CASE("adam matches a hand-rolled reference") {
    Rng rng(2);
    Param p{oracle::random_tensor({6}, rng)};
    std::vector<double> w(p.value.data().begin(), p.value.data().end()), m(6, 0.0), v(6, 0.0);
    Param* params[] = {&p};
    AdamState state;
    for (std::size_t t = 1; t <= 4; ++t) {
      const Tensor g = oracle::random_tensor({6}, rng);
      const Tensor grads[] = {g};
      adam_step(params, grads, state, 0.01, t);
      for (std::size_t k = 0; k < 6; ++k) {
        m[k] = 0.9 * m[k] + 0.1 * g[k];
        v[k] = 0.999 * v[k] + 0.001 * g[k] * g[k];
        const double mh = m[k] / (1.0 - std::pow(0.9, t));
        const double vh = v[k] / (1.0 - std::pow(0.999, t));
        w[k] -= 0.01 * mh / (std::sqrt(vh) + 1e-8);
      }
    }
    for (std::size_t k = 0; k < 6; ++k) CHECK(p.value[k] == doctest::Approx(w[k]).epsilon(1e-6));
    const Tensor grads[] = {Tensor({6})};
    CHECK_THROWS_AS(adam_step(params, grads, state, 0.01, 0), ParameterError);
  }

  TEST_CASE("policy names round trip") {
    for (auto p : {InputPolicy::Left, InputPolicy::Right, InputPolicy::Both}) {
      CHECK(parse_input_policy(to_string(p)) == p);
    }
    for (auto p : {FreezePolicy::AllButLast, FreezePolicy::FreezeAll, FreezePolicy::None}) {
      CHECK(parse_freeze_policy(to_string(p)) == p);
    }
    CHECK_THROWS_AS(parse_input_policy("middle"), ConfigError);
    CHECK_THROWS_AS(parse_freeze_policy("some"), ConfigError);
  }

  TEST_CASE("early stopping on a contrived loss sequence") {
    EarlyStopping s(5);
    const double losses[] = {5, 4, 3, 3.1, 3.2, 3.3, 3.4, 3.5};
    std::size_t stopped_at = 0;
    for (std::size_t i = 0; i < 8; ++i) {
      if (s.update(losses[i])) {
        stopped_at = i + 1;
        break;
      }
    }
    CHECK(stopped_at == 8);
    CHECK(s.best_epoch() == 3);
    CHECK(s.best_loss() == 3.0);
    CHECK_THROWS_AS(EarlyStopping(0), ParameterError);
  }

  TEST_CASE("early stopping property: stops exactly patience epochs after the best") {
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
      const std::size_t patience = 1 + rng.below(6);
      EarlyStopping s(patience);
      std::vector<double> seen;
      bool stopped = false;
      for (std::size_t e = 0; e < 60 && !stopped; ++e) {
        seen.push_back(rng.uniform());
        stopped = s.update(seen.back());
      }
      const auto best = std::min_element(seen.begin(), seen.end()) - seen.begin();
      CHECK(s.best_epoch() == static_cast<std::size_t>(best) + 1);
      if (stopped) CHECK(seen.size() == s.best_epoch() + patience);
    }
  }

  TEST_CASE("pretraining reduces the contrastive loss and is deterministic") {
    const WindowedDataset data = small_synth(1, 16);
    PretrainConfig cfg;
    cfg.batch_size = 16;
    cfg.epochs = 6;
    cfg.latent_size = 16;
    cfg.base_lr = 0.05;
    cfg.seed = 3;
    auto run = [&] {
      Rng init(cfg.seed);
      EncoderParams enc = init_encoder(init);
      HeadParams head = init_head(init, cfg.latent_size);
      const PretrainResult r = pretrain_lr_ssl(data, enc, head, cfg);
      return std::tuple{enc, head, r};
    };
    const auto [enc1, head1, r1] = run();
    const auto [enc2, head2, r2] = run();
    CHECK(r1.steps == 18);
    CHECK(r1.trace.train_epoch.size() == 6);
    CHECK(r1.trace.train_epoch.back() < r1.trace.train_epoch.front());
    CHECK(r1.trace.to_csv() == r2.trace.to_csv());
    CHECK(same_params(enc1, enc2));
    CHECK(r1.trace.to_csv().rfind("step,epoch,split,value\n", 0) == 0);
  }

  TEST_CASE("pretraining rejects degenerate batches") {
    const WindowedDataset data = small_synth(1);
    Rng init(0);
    EncoderParams enc = init_encoder(init);
    HeadParams head = init_head(init, 8);
    PretrainConfig cfg;
    cfg.batch_size = 1;
    CHECK_THROWS_AS(pretrain_lr_ssl(data, enc, head, cfg), ParameterError);
    cfg.batch_size = 64;
    CHECK_THROWS_AS(pretrain_lr_ssl(data, enc, head, cfg), DataError);
    cfg.batch_size = 8;
    cfg.temperature = 0.0;
    CHECK_THROWS_AS(pretrain_lr_ssl(data, enc, head, cfg), ParameterError);
  }

  TEST_CASE("rotation baseline trains") {
    const WindowedDataset data = small_synth(2);
    Rng init(0);
    EncoderParams enc = init_encoder(init);
    HeadParams head = init_head(init, 8);
    PretrainConfig cfg;
    cfg.batch_size = 8;
    cfg.epochs = 2;
    const PretrainResult r = pretrain_simclr(data, enc, head, cfg);
    CHECK(r.steps == 6);
    for (double v : r.trace.train_epoch) CHECK(std::isfinite(v));
  }

  TEST_CASE("freezing keeps the early convolutions fixed") {
    const WindowedDataset train = small_synth(4);
    const WindowedDataset val = small_synth(5, 4);
    Rng init(1);
    const EncoderParams enc = init_encoder(init);
    const ClassifierParams cls = init_classifier(init, 3);
    FinetuneConfig cfg;
    cfg.epochs = 2;
    cfg.lr = 1e-3;
    cfg.batch_size = 8;

    const FinetuneResult r = finetune(enc, cls, train, val, cfg);
    CHECK(bitwise_equal(r.encoder.conv1.weight.value, enc.conv1.weight.value));
    CHECK(bitwise_equal(r.encoder.conv2.bias.value, enc.conv2.bias.value));
    CHECK_FALSE(bitwise_equal(r.encoder.conv3.weight.value, enc.conv3.weight.value));
    CHECK_FALSE(bitwise_equal(r.classifier.dense2.weight.value, cls.dense2.weight.value));

    cfg.freeze = FreezePolicy::FreezeAll;
    CHECK(same_params(finetune(enc, cls, train, val, cfg).encoder, enc));
    cfg.freeze = FreezePolicy::None;
    CHECK_FALSE(bitwise_equal(finetune(enc, cls, train, val, cfg).encoder.conv1.weight.value, enc.conv1.weight.value));
  }

  TEST_CASE("finetune stops early and restores the best epoch") {
    const WindowedDataset train = small_synth(4);
    const WindowedDataset val = small_synth(5, 4);
    Rng init(1);
    const EncoderParams enc = init_encoder(init);
    const ClassifierParams cls = init_classifier(init, 3);
    FinetuneConfig cfg;
    cfg.epochs = 50;
    cfg.batch_size = 8;
    cfg.lr = 1e-3;
    const double losses[] = {5, 4, 3, 3.1, 3.2, 3.3, 3.4, 3.5};
    ClassifierParams snapshot;
    FinetuneHooks hooks;
    hooks.validation_loss = [&](std::size_t epoch, double) { return losses[epoch - 1]; };
    hooks.on_epoch_end = [&](std::size_t epoch, const EncoderParams&, const ClassifierParams& c) {
      if (epoch == 3) snapshot = c;
    };
    const FinetuneResult r = finetune(enc, cls, train, val, cfg, hooks);
    CHECK(r.epochs_run == 8);
    CHECK(r.best_epoch == 3);
    CHECK(bitwise_equal(r.classifier.dense1.weight.value, snapshot.dense1.weight.value));
    CHECK(r.trace.validation_epoch.size() == 8);
  }

  TEST_CASE("finetune input validation") {
    const WindowedDataset train = small_synth(4);
    Rng init(1);
    const EncoderParams enc = init_encoder(init);
    const ClassifierParams cls = init_classifier(init, 3);
    FinetuneConfig cfg;
    cfg.epochs = 1;
    WindowedDataset unlabeled = train;
    for (auto& p : unlabeled.pairs) p.label = kUnlabeled;
    CHECK_THROWS_AS(finetune(enc, cls, train, unlabeled, cfg), ConfigError);
    WindowedDataset missing = train;
    for (auto& p : missing.pairs) {
      if (p.label == 2) p.label = kUnlabeled;
    }
    CHECK_THROWS_AS(finetune(enc, cls, missing, train, cfg), DataError);
  }

  TEST_CASE("example counts follow the input policy") {
    WindowedDataset d = small_synth(0);
    d.pairs[0].label = kUnlabeled;
    CHECK(example_count(d, InputPolicy::Left) == 23);
    CHECK(example_count(d, InputPolicy::Right) == 23);
    CHECK(example_count(d, InputPolicy::Both) == 46);
  }

  TEST_CASE("alignment statistics are bounded cosines") {
    const WindowedDataset d = small_synth(0);
    Rng init(3);
    const EncoderParams enc = init_encoder(init);
    const HeadParams head = init_head(init, 16);
    const AlignmentStats a = alignment(enc, head, d);
    CHECK(std::abs(a.partner_mean) <= 1.0);
    CHECK(std::abs(a.non_partner_mean) <= 1.0);
    WindowedDataset one = d;
    one.pairs.resize(1);
    CHECK_THROWS_AS(alignment(enc, head, one), DataError);
  }
}
