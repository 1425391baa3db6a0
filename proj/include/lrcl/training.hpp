#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "lrcl/data.hpp"
#include "lrcl/model.hpp"

namespace lrcl {

/// lr = base_lr * 0.5 * (1 + cos(pi * step / total_steps)).
double cosine_lr(std::size_t step, std::size_t total_steps, double base_lr);

/// Plain SGD: param -= lr * grad for every trainable param. `grads[i]` belongs to `params[i]`.
void sgd_step(std::span<Param* const> params, std::span<const Tensor> grads, double lr);

/// SGD with an optional heavy-ball momentum buffer (momentum 0 is sgd_step).
class Sgd {
 public:
  explicit Sgd(double momentum = 0.0) : momentum_(momentum) {}
  void step(std::span<Param* const> params, std::span<const Tensor> grads, double lr);

 private:
  double momentum_;
  std::vector<std::vector<float>> velocity_;
};

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

/// Bias-corrected Adam update for step t >= 1. Frozen params are left untouched.
void adam_step(std::span<Param* const> params, std::span<const Tensor> grads, AdamState& state, double lr,
               std::size_t t, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

enum class InputPolicy { Left, Right, Both };
InputPolicy parse_input_policy(const std::string& name);
std::string to_string(InputPolicy p);

enum class FreezePolicy {
  AllButLast,  // conv1 and conv2 frozen; conv3 and the classifier train
  FreezeAll,   // linear-probe style: whole encoder frozen
  None,        // everything trains
};
FreezePolicy parse_freeze_policy(const std::string& name);
std::string to_string(FreezePolicy p);

struct PretrainConfig {
  std::size_t batch_size = 64;
  double temperature = 0.05;
  double base_lr = 0.004;
  std::size_t epochs = 200;
  double momentum = 0.0;
  std::size_t latent_size = kDefaultLatentSize;
  std::uint64_t seed = 0;
  /// Windows the rotation baseline draws from.
  InputPolicy simclr_side = InputPolicy::Left;
  /// Test hook: both rotation views use the identity.
  bool force_identity_rotation = false;
};

struct FinetuneConfig {
  double lr = 1e-4;
  std::size_t epochs = 50;
  std::size_t patience = 5;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  FreezePolicy freeze = FreezePolicy::AllButLast;
  InputPolicy input = InputPolicy::Both;
};

struct LossRecord {
  std::size_t step = 0;
  std::size_t epoch = 0;
  std::string split;  // "train" per step, "train_epoch" and "validation" per epoch
  double value = 0.0;
};

struct LossTrace {
  std::vector<LossRecord> records;
  std::vector<double> train_epoch;       // mean training loss per epoch
  std::vector<double> validation_epoch;  // empty for pretraining

  /// Columns: step,epoch,split,value. Values use 9 significant digits.
  std::string to_csv() const;
};

/// Patience-based stopping on a loss that should decrease.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience);

  /// Records one epoch's loss; returns true when training should stop.
  bool update(double loss);
  bool improved() const noexcept { return improved_; }
  std::size_t best_epoch() const noexcept { return best_epoch_; }  // 1-based, 0 before any update
  double best_loss() const noexcept { return best_; }

 private:
  std::size_t patience_;
  std::size_t epoch_ = 0;
  std::size_t best_epoch_ = 0;
  std::size_t since_best_ = 0;
  double best_;
  bool improved_ = false;
};

struct PretrainResult {
  LossTrace trace;
  std::size_t steps = 0;
};

/// Left-right contrastive pretraining. Each batch embeds the N left and N
/// right windows with the shared encoder and head, interleaves them and
/// minimizes the NT-Xent loss with SGD under a per-step cosine schedule.
/// The final short batch of each epoch is dropped.
PretrainResult pretrain_lr_ssl(const WindowedDataset& data, EncoderParams& encoder, HeadParams& head,
                               const PretrainConfig& config);

/// Rotation baseline: two independently rotated views of one window form the positive pair.
PretrainResult pretrain_simclr(const WindowedDataset& data, EncoderParams& encoder, HeadParams& head,
                               const PretrainConfig& config);

struct FinetuneHooks {
  /// Replaces the measured validation loss of a (1-based) epoch.
  std::function<double(std::size_t epoch, double measured)> validation_loss;
  std::function<void(std::size_t epoch, const EncoderParams&, const ClassifierParams&)> on_epoch_end;
};

struct FinetuneResult {
  EncoderParams encoder;
  ClassifierParams classifier;
  LossTrace trace;
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;
};

/// Cross-entropy training of the classifier (and the encoder layers the freeze
/// policy leaves trainable) with Adam. Unlabeled windows of `train` are
/// ignored. Stops after `patience` epochs without validation-loss improvement
/// and returns the parameters of the best epoch.
FinetuneResult finetune(const EncoderParams& encoder, const ClassifierParams& classifier, const WindowedDataset& train,
                        const WindowedDataset& validation, const FinetuneConfig& config, const FinetuneHooks& hooks = {});

/// Fresh encoder and classifier trained end to end (no freezing).
FinetuneResult train_supervised(const WindowedDataset& train, const WindowedDataset& validation,
                                const FinetuneConfig& config, const FinetuneHooks& hooks = {});

/// Number of training examples an input policy yields (labeled windows only).
std::size_t example_count(const WindowedDataset& data, InputPolicy policy);

/// Mean cosine similarity of head outputs for true left/right partners and for
/// all non-partner (left_i, right_j), i != j, combinations. Dropout off.
struct AlignmentStats {
  double partner_mean = 0.0;
  double non_partner_mean = 0.0;
  double gap() const { return partner_mean - non_partner_mean; }
};
AlignmentStats alignment(const EncoderParams& encoder, const HeadParams& head, const WindowedDataset& data,
                         std::size_t max_pairs = 512);

}  // namespace lrcl
