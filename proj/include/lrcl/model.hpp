#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "lrcl/autodiff.hpp"
#include "lrcl/rng.hpp"
#include "lrcl/tensor.hpp"

namespace lrcl {

// Fixed architecture constants.
inline constexpr std::size_t kInputChannels = 3;
inline constexpr std::array<std::size_t, 3> kEncoderFilters{32, 64, 96};
inline constexpr std::array<std::size_t, 3> kEncoderKernels{24, 16, 8};
inline constexpr std::size_t kEncoderWidth = 96;
inline constexpr std::array<std::size_t, 2> kHeadHidden{256, 128};
inline constexpr std::size_t kClassifierHidden = 1024;
inline constexpr std::size_t kDefaultLatentSize = 96;
inline constexpr double kDefaultDropout = 0.1;
/// Shortest window for which all three valid convolutions are defined.
inline constexpr std::size_t kMinWindowLength = 46;

struct Param {
  Tensor value;
  bool trainable = true;
};

struct ConvLayer {
  Param weight;  // [C_out x C_in x K]
  Param bias;    // [C_out]
};

struct DenseLayer {
  Param weight;  // [D_out x D_in]
  Param bias;    // [D_out]
};

struct EncoderParams {
  ConvLayer conv1, conv2, conv3;
  double dropout_rate = kDefaultDropout;

  std::size_t in_channels() const { return conv1.weight.value.dim(1); }
};

struct HeadParams {
  DenseLayer dense1, dense2, dense3;

  std::size_t latent_size() const { return dense3.weight.value.dim(0); }
};

struct ClassifierParams {
  DenseLayer dense1, dense2;

  std::size_t num_classes() const { return dense2.weight.value.dim(0); }
};

/// Any subset of the three networks, as stored in a checkpoint.
struct Model {
  std::optional<EncoderParams> encoder;
  std::optional<HeadParams> head;
  std::optional<ClassifierParams> classifier;
};

struct NamedParam {
  std::string name;
  Param* param;
};

/// Stable, dotted names ("encoder.conv1.weight", ...) in definition order.
std::vector<NamedParam> named_parameters(EncoderParams& p);
std::vector<NamedParam> named_parameters(HeadParams& p);
std::vector<NamedParam> named_parameters(ClassifierParams& p);

// He-uniform weights, U(-a, a) with a = sqrt(6 / fan_in); zero biases.
EncoderParams init_encoder(Rng& rng, std::size_t in_channels = kInputChannels, double dropout_rate = kDefaultDropout);
HeadParams init_head(Rng& rng, std::size_t latent_size = kDefaultLatentSize);
ClassifierParams init_classifier(Rng& rng, std::size_t num_classes);

/// Throws ShapeError unless the tensors match the fixed architecture.
void validate(const EncoderParams& p);
void validate(const HeadParams& p);
void validate(const ClassifierParams& p);

// Graph bindings. Trainable tensors become parameters, the rest constants.

struct LayerVars {
  Var weight, bias;
};

struct EncoderVars {
  LayerVars conv1, conv2, conv3;
  double dropout_rate = 0.0;
};

struct HeadVars {
  LayerVars dense1, dense2, dense3;
};

struct ClassifierVars {
  LayerVars dense1, dense2;
};

template <typename T>
EncoderVars bind(Graph<T>& g, const EncoderParams& p);
template <typename T>
HeadVars bind(Graph<T>& g, const HeadParams& p);
template <typename T>
ClassifierVars bind(Graph<T>& g, const ClassifierParams& p);

/// Vars in the same order as named_parameters() of the matching params.
std::vector<Var> vars_of(const EncoderVars& v);
std::vector<Var> vars_of(const HeadVars& v);
std::vector<Var> vars_of(const ClassifierVars& v);

/// x [B x C_in x T] (or [C_in x T]) -> h [B x 96]. Applies conv, relu and dropout
/// three times, then max over time. Requires T >= 46.
template <typename T>
Var encoder_forward(Graph<T>& g, const EncoderVars& enc, Var x, bool training, Rng& rng);

/// h -> dense/relu/dense/relu/dense, then unit-normalized rows.
template <typename T>
Var head_forward(Graph<T>& g, const HeadVars& head, Var h);

/// h -> dense/relu/dense raw logits.
template <typename T>
Var classifier_forward(Graph<T>& g, const ClassifierVars& cls, Var h);

// Inference helpers without gradient tracking (dropout off).
Tensor encode(const EncoderParams& enc, const Tensor& x);
Tensor project(const HeadParams& head, const Tensor& h);
Tensor classify(const ClassifierParams& cls, const Tensor& h);

struct ParameterCount {
  std::string component;
  std::string layer;
  std::size_t count = 0;
};

struct ParameterTable {
  std::vector<ParameterCount> rows;

  std::size_t total(const std::string& component) const;
  std::size_t total() const;
};

ParameterTable count_parameters(const Model& model);

/// Closed-form count from layer dimensions alone.
std::size_t conv_param_count(std::size_t c_out, std::size_t c_in, std::size_t kernel);
std::size_t dense_param_count(std::size_t d_out, std::size_t d_in);

}  // namespace lrcl
