#include "lrcl/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <numeric>

#include "lrcl/contrastive.hpp"

namespace lrcl {

double cosine_lr(std::size_t step, std::size_t total_steps, double base_lr) {
  if (total_steps == 0) throw ParameterError("cosine_lr: total_steps must be positive");
  if (step > total_steps) {
    throw ParameterError("cosine_lr: step " + std::to_string(step) + " exceeds total_steps " +
                         std::to_string(total_steps));
  }
  if (step == total_steps) return 0.0;
  const double progress = static_cast<double>(step) / static_cast<double>(total_steps);
  return base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

namespace {

void check_grads(std::span<Param* const> params, std::span<const Tensor> grads, const char* op) {
  if (params.size() != grads.size()) {
    throw ShapeError(std::string(op) + ": " + std::to_string(params.size()) + " params but " +
                     std::to_string(grads.size()) + " gradients");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->value.shape() != grads[i].shape()) {
      throw ShapeError(std::string(op) + ": gradient " + std::to_string(i) + " has shape " +
                       shape_string(grads[i].shape()) + ", param has " + shape_string(params[i]->value.shape()));
    }
  }
}

}  // namespace

void sgd_step(std::span<Param* const> params, std::span<const Tensor> grads, double lr) {
  check_grads(params, grads, "sgd_step");
  const auto step = static_cast<float>(lr);
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i]->trainable) continue;
    auto w = params[i]->value.data();
    auto g = grads[i].data();
    for (std::size_t k = 0; k < w.size(); ++k) w[k] -= step * g[k];
  }
}

void Sgd::step(std::span<Param* const> params, std::span<const Tensor> grads, double lr) {
  if (momentum_ == 0.0) {
    sgd_step(params, grads, lr);
    return;
  }
  check_grads(params, grads, "sgd_step");
  if (velocity_.size() != params.size()) {
    velocity_.assign(params.size(), {});
    for (std::size_t i = 0; i < params.size(); ++i) velocity_[i].assign(params[i]->value.size(), 0.0f);
  }
  const auto mu = static_cast<float>(momentum_);
  const auto step = static_cast<float>(lr);
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i]->trainable) continue;
    auto w = params[i]->value.data();
    auto g = grads[i].data();
    auto& vel = velocity_[i];
    for (std::size_t k = 0; k < w.size(); ++k) {
      vel[k] = mu * vel[k] + g[k];
      w[k] -= step * vel[k];
    }
  }
}

void adam_step(std::span<Param* const> params, std::span<const Tensor> grads, AdamState& state, double lr,
               std::size_t t, double beta1, double beta2, double eps) {
  if (t == 0) throw ParameterError("adam_step: step counter t must start at 1");
  check_grads(params, grads, "adam_step");
  if (state.m.size() != params.size()) {
    state.m.assign(params.size(), {});
    state.v.assign(params.size(), {});
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.m[i].assign(params[i]->value.size(), 0.0);
      state.v[i].assign(params[i]->value.size(), 0.0);
    }
  }
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i]->trainable) continue;
    if (state.m[i].size() != params[i]->value.size()) {
      throw ShapeError("adam_step: optimizer state does not match param " + std::to_string(i));
    }
    auto w = params[i]->value.data();
    auto g = grads[i].data();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double gk = g[k];
      m[k] = beta1 * m[k] + (1.0 - beta1) * gk;
      v[k] = beta2 * v[k] + (1.0 - beta2) * gk * gk;
      const double m_hat = m[k] / c1;
      const double v_hat = v[k] / c2;
      w[k] = static_cast<float>(static_cast<double>(w[k]) - lr * m_hat / (std::sqrt(v_hat) + eps));
    }
  }
}

InputPolicy parse_input_policy(const std::string& name) {
  if (name == "left") return InputPolicy::Left;
  if (name == "right") return InputPolicy::Right;
  if (name == "both") return InputPolicy::Both;
  throw ConfigError("input policy must be one of left, right, both; got '" + name + "'");
}

std::string to_string(InputPolicy p) {
  switch (p) {
    case InputPolicy::Left: return "left";
    case InputPolicy::Right: return "right";
    case InputPolicy::Both: return "both";
  }
  return "?";
}

FreezePolicy parse_freeze_policy(const std::string& name) {
  if (name == "all_but_last") return FreezePolicy::AllButLast;
  if (name == "freeze_all") return FreezePolicy::FreezeAll;
  if (name == "none") return FreezePolicy::None;
  throw ConfigError("freeze policy must be one of all_but_last, freeze_all, none; got '" + name + "'");
}

std::string to_string(FreezePolicy p) {
  switch (p) {
    case FreezePolicy::AllButLast: return "all_but_last";
    case FreezePolicy::FreezeAll: return "freeze_all";
    case FreezePolicy::None: return "none";
  }
  return "?";
}

std::string LossTrace::to_csv() const {
  std::string out = "step,epoch,split,value\n";
  char buf[128];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof buf, "%zu,%zu,%s,%.9g\n", r.step, r.epoch, r.split.c_str(), r.value);
    out += buf;
  }
  return out;
}

EarlyStopping::EarlyStopping(std::size_t patience)
    : patience_(patience), best_(std::numeric_limits<double>::infinity()) {
  if (patience == 0) throw ParameterError("early stopping patience must be at least 1");
}

bool EarlyStopping::update(double loss) {
  ++epoch_;
  improved_ = loss < best_;
  if (improved_) {
    best_ = loss;
    best_epoch_ = epoch_;
    since_best_ = 0;
  } else {
    ++since_best_;
  }
  return since_best_ >= patience_;
}

namespace {

struct Example {
  const Tensor* window;
  int label;
};

std::vector<Example> examples_of(const WindowedDataset& data, InputPolicy policy, bool labeled) {
  std::vector<Example> out;
  for (const auto& p : data.pairs) {
    if (labeled && p.label == kUnlabeled) continue;
    if (policy != InputPolicy::Right) out.push_back({&p.left, p.label});
    if (policy != InputPolicy::Left) out.push_back({&p.right, p.label});
  }
  return out;
}

Tensor stack_windows(std::span<const Tensor* const> windows) { return stack<float>(windows); }

std::vector<Param*> raw_params(std::vector<NamedParam> named) {
  std::vector<Param*> out;
  for (auto& n : named) out.push_back(n.param);
  return out;
}

std::vector<Tensor> grads_of(const Graph<float>& g, const std::vector<Var>& vars) {
  std::vector<Tensor> out;
  out.reserve(vars.size());
  for (Var v : vars) out.push_back(g.grad(v));
  return out;
}

void require_finite(double loss, const char* where, std::size_t step) {
  if (!std::isfinite(loss)) {
    throw NumericError(std::string(where) + ": non-finite loss at step " + std::to_string(step));
  }
}

/// Shared loop of both pretraining variants; `make_views` fills the two
/// [N x 3 x T] view batches for the given example indices.
template <typename MakeViews>
PretrainResult pretrain_loop(std::size_t count, EncoderParams& encoder, HeadParams& head, const PretrainConfig& config,
                             const char* name, MakeViews make_views) {
  if (config.batch_size < 2) {
    throw ParameterError(std::string(name) + ": batch_size must be at least 2 (N = 1 has no negatives and zero loss)");
  }
  if (!(config.temperature > 0.0)) throw ParameterError(std::string(name) + ": temperature must be positive");
  if (config.epochs == 0) throw ParameterError(std::string(name) + ": epochs must be positive");
  if (count < config.batch_size) {
    throw DataError(std::string(name) + ": " + std::to_string(count) + " windows is fewer than one batch of " +
                    std::to_string(config.batch_size));
  }
  validate(encoder);
  validate(head);

  const Rng root(config.seed);
  Rng shuffle_rng = root.fork(1);
  Rng dropout_rng = root.fork(2);
  const std::size_t batches = count / config.batch_size;
  const std::size_t total_steps = config.epochs * batches;

  auto enc_params = raw_params(named_parameters(encoder));
  auto head_params = raw_params(named_parameters(head));
  std::vector<Param*> all_params = enc_params;
  all_params.insert(all_params.end(), head_params.begin(), head_params.end());
  Sgd optimizer(config.momentum);

  PretrainResult result;
  std::vector<std::size_t> order(count);
  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle_rng.shuffle(std::span<std::size_t>(order));
    double epoch_sum = 0.0;
    for (std::size_t b = 0; b < batches; ++b, ++step) {
      const std::span<const std::size_t> idx(order.data() + b * config.batch_size, config.batch_size);
      auto [first, second] = make_views(idx);

      Graph<float> g;
      const EncoderVars ev = bind(g, encoder);
      const HeadVars hv = bind(g, head);
      const Var z_first = head_forward(g, hv, encoder_forward(g, ev, g.constant(std::move(first)), true, dropout_rng));
      const Var z_second = head_forward(g, hv, encoder_forward(g, ev, g.constant(std::move(second)), true, dropout_rng));
      const Var loss = nt_xent_loss(g, interleave_embeddings(g, z_first, z_second), config.temperature);
      const double value = g.value(loss)[0];
      require_finite(value, name, step);
      g.backward(loss);

      std::vector<Var> vars = vars_of(ev);
      const auto hvars = vars_of(hv);
      vars.insert(vars.end(), hvars.begin(), hvars.end());
      optimizer.step(all_params, grads_of(g, vars), cosine_lr(step, total_steps, config.base_lr));

      result.trace.records.push_back({step, epoch, "train", value});
      epoch_sum += value;
    }
    const double mean = epoch_sum / static_cast<double>(batches);
    result.trace.train_epoch.push_back(mean);
    result.trace.records.push_back({step, epoch, "train_epoch", mean});
  }
  result.steps = step;
  return result;
}

}  // namespace

PretrainResult pretrain_lr_ssl(const WindowedDataset& data, EncoderParams& encoder, HeadParams& head,
                               const PretrainConfig& config) {
  return pretrain_loop(data.size(), encoder, head, config, "pretrain", [&](std::span<const std::size_t> idx) {
    std::vector<const Tensor*> left, right;
    for (std::size_t i : idx) {
      left.push_back(&data.pairs[i].left);
      right.push_back(&data.pairs[i].right);
    }
    return std::pair{stack_windows(left), stack_windows(right)};
  });
}

PretrainResult pretrain_simclr(const WindowedDataset& data, EncoderParams& encoder, HeadParams& head,
                               const PretrainConfig& config) {
  const auto pool = examples_of(data, config.simclr_side, false);
  Rng rotation_rng = Rng(config.seed).fork(3);
  return pretrain_loop(pool.size(), encoder, head, config, "pretrain_simclr", [&](std::span<const std::size_t> idx) {
    std::vector<Tensor> first, second;
    first.reserve(idx.size());
    second.reserve(idx.size());
    for (std::size_t i : idx) {
      const RotationMatrix r1 = config.force_identity_rotation ? RotationMatrix::identity() : random_rotation(rotation_rng);
      const RotationMatrix r2 = config.force_identity_rotation ? RotationMatrix::identity() : random_rotation(rotation_rng);
      first.push_back(apply_rotation(*pool[i].window, r1));
      second.push_back(apply_rotation(*pool[i].window, r2));
    }
    std::vector<const Tensor*> a, b;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      a.push_back(&first[k]);
      b.push_back(&second[k]);
    }
    return std::pair{stack_windows(a), stack_windows(b)};
  });
}

std::size_t example_count(const WindowedDataset& data, InputPolicy policy) {
  return examples_of(data, policy, true).size();
}

namespace {

double mean_loss(const EncoderParams& encoder, const ClassifierParams& classifier, const std::vector<Example>& ex,
                 std::size_t batch_size) {
  double total = 0.0;
  for (std::size_t start = 0; start < ex.size(); start += batch_size) {
    const std::size_t n = std::min(batch_size, ex.size() - start);
    std::vector<const Tensor*> windows;
    std::vector<int> labels;
    for (std::size_t k = start; k < start + n; ++k) {
      windows.push_back(ex[k].window);
      labels.push_back(ex[k].label);
    }
    const Tensor logits = classify(classifier, encode(encoder, stack_windows(windows)));
    Graph<float> g;
    const Var loss = softmax_cross_entropy(g, g.constant(logits), labels);
    total += static_cast<double>(g.value(loss)[0]) * static_cast<double>(n);
  }
  return total / static_cast<double>(ex.size());
}

}  // namespace

FinetuneResult finetune(const EncoderParams& encoder, const ClassifierParams& classifier, const WindowedDataset& train,
                        const WindowedDataset& validation, const FinetuneConfig& config, const FinetuneHooks& hooks) {
  if (config.batch_size == 0) throw ParameterError("finetune: batch_size must be positive");
  if (config.epochs == 0) throw ParameterError("finetune: epochs must be positive");
  const auto train_ex = examples_of(train, config.input, true);
  const auto val_ex = examples_of(validation, config.input, true);
  if (val_ex.empty()) throw ConfigError("finetune: validation set has no labeled windows");
  const std::size_t classes = classifier.num_classes();
  {
    std::vector<std::size_t> support(classes, 0);
    for (const auto& e : train_ex) {
      if (e.label < 0 || static_cast<std::size_t>(e.label) >= classes) {
        throw LabelError("finetune: label " + std::to_string(e.label) + " outside the classifier's " +
                         std::to_string(classes) + " classes");
      }
      ++support[static_cast<std::size_t>(e.label)];
    }
    for (std::size_t c = 0; c < classes; ++c) {
      if (support[c] == 0) throw DataError("finetune: class " + std::to_string(c) + " has no labeled training windows");
    }
  }

  FinetuneResult result{encoder, classifier, {}, 0, 0};
  EncoderParams& enc = result.encoder;
  ClassifierParams& cls = result.classifier;
  validate(enc);
  validate(cls);
  for (auto& np : named_parameters(enc)) np.param->trainable = config.freeze == FreezePolicy::None;
  if (config.freeze == FreezePolicy::AllButLast) {
    enc.conv3.weight.trainable = true;
    enc.conv3.bias.trainable = true;
  }
  for (auto& np : named_parameters(cls)) np.param->trainable = true;

  std::vector<Param*> params = raw_params(named_parameters(enc));
  const auto cls_params = raw_params(named_parameters(cls));
  params.insert(params.end(), cls_params.begin(), cls_params.end());

  const Rng root(config.seed);
  Rng shuffle_rng = root.fork(4);
  Rng dropout_rng = root.fork(5);
  AdamState adam;
  EarlyStopping stopper(config.patience);
  EncoderParams best_enc = enc;
  ClassifierParams best_cls = cls;

  std::vector<std::size_t> order(train_ex.size());
  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle_rng.shuffle(std::span<std::size_t>(order));
    double epoch_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t n = std::min(config.batch_size, order.size() - start);
      std::vector<const Tensor*> windows;
      std::vector<int> labels;
      for (std::size_t k = start; k < start + n; ++k) {
        windows.push_back(train_ex[order[k]].window);
        labels.push_back(train_ex[order[k]].label);
      }
      Graph<float> g;
      const EncoderVars ev = bind(g, enc);
      const ClassifierVars cv = bind(g, cls);
      const Var h = encoder_forward(g, ev, g.constant(stack_windows(windows)), true, dropout_rng);
      const Var loss = softmax_cross_entropy(g, classifier_forward(g, cv, h), labels);
      const double value = g.value(loss)[0];
      require_finite(value, "finetune", step);
      g.backward(loss);
      std::vector<Var> vars = vars_of(ev);
      const auto cvars = vars_of(cv);
      vars.insert(vars.end(), cvars.begin(), cvars.end());
      ++step;
      adam_step(params, grads_of(g, vars), adam, config.lr, step);
      result.trace.records.push_back({step, epoch, "train", value});
      epoch_sum += value * static_cast<double>(n);
    }
    const double train_mean = epoch_sum / static_cast<double>(train_ex.size());
    double val = mean_loss(enc, cls, val_ex, 256);
    require_finite(val, "finetune validation", step);
    if (hooks.validation_loss) val = hooks.validation_loss(epoch, val);
    result.trace.train_epoch.push_back(train_mean);
    result.trace.validation_epoch.push_back(val);
    result.trace.records.push_back({step, epoch, "train_epoch", train_mean});
    result.trace.records.push_back({step, epoch, "validation", val});
    result.epochs_run = epoch;
    const bool stop = stopper.update(val);
    if (stopper.improved()) {
      best_enc = enc;
      best_cls = cls;
    }
    if (hooks.on_epoch_end) hooks.on_epoch_end(epoch, enc, cls);
    if (stop) break;
  }
  result.encoder = std::move(best_enc);
  result.classifier = std::move(best_cls);
  result.best_epoch = stopper.best_epoch();
  return result;
}

FinetuneResult train_supervised(const WindowedDataset& train, const WindowedDataset& validation,
                                const FinetuneConfig& config, const FinetuneHooks& hooks) {
  Rng init = Rng(config.seed).fork(6);
  const EncoderParams encoder = init_encoder(init);
  const ClassifierParams classifier = init_classifier(init, train.num_classes());
  FinetuneConfig cfg = config;
  cfg.freeze = FreezePolicy::None;
  return finetune(encoder, classifier, train, validation, cfg, hooks);
}

AlignmentStats alignment(const EncoderParams& encoder, const HeadParams& head, const WindowedDataset& data,
                         std::size_t max_pairs) {
  const std::size_t n = std::min(max_pairs, data.size());
  if (n < 2) throw DataError("alignment: need at least two pairs");
  std::vector<const Tensor*> left, right;
  for (std::size_t i = 0; i < n; ++i) {
    left.push_back(&data.pairs[i].left);
    right.push_back(&data.pairs[i].right);
  }
  const Tensor zl = project(head, encode(encoder, stack_windows(left)));
  const Tensor zr = project(head, encode(encoder, stack_windows(right)));
  const std::size_t s = zl.dim(1);
  double partner = 0.0, other = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double dot = 0.0;
      for (std::size_t d = 0; d < s; ++d) dot += static_cast<double>(zl.at(i, d)) * zr.at(j, d);
      (i == j ? partner : other) += dot;
    }
  }
  return AlignmentStats{partner / static_cast<double>(n), other / static_cast<double>(n * (n - 1))};
}

}  // namespace lrcl
