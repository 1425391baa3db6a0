#include "lrcl/model.hpp"

#include <cmath>
#include <type_traits>

namespace lrcl {

namespace {

Param uniform_param(Shape shape, std::size_t fan_in, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in));
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = static_cast<float>(rng.uniform(-a, a));
  return Param{std::move(t), true};
}

ConvLayer init_conv(std::size_t c_out, std::size_t c_in, std::size_t kernel, Rng& rng) {
  return ConvLayer{uniform_param({c_out, c_in, kernel}, c_in * kernel, rng), Param{Tensor({c_out}), true}};
}

DenseLayer init_dense(std::size_t d_out, std::size_t d_in, Rng& rng) {
  return DenseLayer{uniform_param({d_out, d_in}, d_in, rng), Param{Tensor({d_out}), true}};
}

void expect_shape(const Param& p, const Shape& want, const std::string& name) {
  if (p.value.shape() != want) {
    throw ShapeError(name + " has shape " + shape_string(p.value.shape()) + ", expected " + shape_string(want));
  }
}

template <typename T>
Var bind_one(Graph<T>& g, const Param& p) {
  BasicTensor<T> v;
  if constexpr (std::is_same_v<T, float>) {
    v = p.value;
  } else {
    v = p.value.template cast<T>();
  }
  return p.trainable ? g.parameter(std::move(v)) : g.constant(std::move(v));
}

template <typename T>
LayerVars bind_layer(Graph<T>& g, const Param& w, const Param& b) {
  return LayerVars{bind_one(g, w), bind_one(g, b)};
}

void append(std::vector<NamedParam>& out, const std::string& prefix, Param& w, Param& b) {
  out.push_back({prefix + ".weight", &w});
  out.push_back({prefix + ".bias", &b});
}

}  // namespace

std::vector<NamedParam> named_parameters(EncoderParams& p) {
  std::vector<NamedParam> out;
  append(out, "encoder.conv1", p.conv1.weight, p.conv1.bias);
  append(out, "encoder.conv2", p.conv2.weight, p.conv2.bias);
  append(out, "encoder.conv3", p.conv3.weight, p.conv3.bias);
  return out;
}

std::vector<NamedParam> named_parameters(HeadParams& p) {
  std::vector<NamedParam> out;
  append(out, "head.dense1", p.dense1.weight, p.dense1.bias);
  append(out, "head.dense2", p.dense2.weight, p.dense2.bias);
  append(out, "head.dense3", p.dense3.weight, p.dense3.bias);
  return out;
}

std::vector<NamedParam> named_parameters(ClassifierParams& p) {
  std::vector<NamedParam> out;
  append(out, "classifier.dense1", p.dense1.weight, p.dense1.bias);
  append(out, "classifier.dense2", p.dense2.weight, p.dense2.bias);
  return out;
}

EncoderParams init_encoder(Rng& rng, std::size_t in_channels, double dropout_rate) {
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw ParameterError("encoder dropout rate must lie in [0, 1), got " + std::to_string(dropout_rate));
  }
  EncoderParams p;
  p.conv1 = init_conv(kEncoderFilters[0], in_channels, kEncoderKernels[0], rng);
  p.conv2 = init_conv(kEncoderFilters[1], kEncoderFilters[0], kEncoderKernels[1], rng);
  p.conv3 = init_conv(kEncoderFilters[2], kEncoderFilters[1], kEncoderKernels[2], rng);
  p.dropout_rate = dropout_rate;
  return p;
}

HeadParams init_head(Rng& rng, std::size_t latent_size) {
  if (latent_size == 0) throw ParameterError("latent size must be positive");
  HeadParams p;
  p.dense1 = init_dense(kHeadHidden[0], kEncoderWidth, rng);
  p.dense2 = init_dense(kHeadHidden[1], kHeadHidden[0], rng);
  p.dense3 = init_dense(latent_size, kHeadHidden[1], rng);
  return p;
}

ClassifierParams init_classifier(Rng& rng, std::size_t num_classes) {
  if (num_classes == 0) throw ParameterError("classifier needs at least one class");
  ClassifierParams p;
  p.dense1 = init_dense(kClassifierHidden, kEncoderWidth, rng);
  p.dense2 = init_dense(num_classes, kClassifierHidden, rng);
  return p;
}

void validate(const EncoderParams& p) {
  const std::size_t c_in = p.conv1.weight.value.rank() == 3 ? p.in_channels() : 0;
  expect_shape(p.conv1.weight, {kEncoderFilters[0], c_in, kEncoderKernels[0]}, "encoder.conv1.weight");
  expect_shape(p.conv1.bias, {kEncoderFilters[0]}, "encoder.conv1.bias");
  expect_shape(p.conv2.weight, {kEncoderFilters[1], kEncoderFilters[0], kEncoderKernels[1]}, "encoder.conv2.weight");
  expect_shape(p.conv2.bias, {kEncoderFilters[1]}, "encoder.conv2.bias");
  expect_shape(p.conv3.weight, {kEncoderFilters[2], kEncoderFilters[1], kEncoderKernels[2]}, "encoder.conv3.weight");
  expect_shape(p.conv3.bias, {kEncoderFilters[2]}, "encoder.conv3.bias");
}

void validate(const HeadParams& p) {
  const std::size_t latent = p.dense3.weight.value.rank() == 2 ? p.latent_size() : 0;
  expect_shape(p.dense1.weight, {kHeadHidden[0], kEncoderWidth}, "head.dense1.weight");
  expect_shape(p.dense1.bias, {kHeadHidden[0]}, "head.dense1.bias");
  expect_shape(p.dense2.weight, {kHeadHidden[1], kHeadHidden[0]}, "head.dense2.weight");
  expect_shape(p.dense2.bias, {kHeadHidden[1]}, "head.dense2.bias");
  expect_shape(p.dense3.weight, {latent, kHeadHidden[1]}, "head.dense3.weight");
  expect_shape(p.dense3.bias, {latent}, "head.dense3.bias");
}

void validate(const ClassifierParams& p) {
  const std::size_t classes = p.dense2.weight.value.rank() == 2 ? p.num_classes() : 0;
  expect_shape(p.dense1.weight, {kClassifierHidden, kEncoderWidth}, "classifier.dense1.weight");
  expect_shape(p.dense1.bias, {kClassifierHidden}, "classifier.dense1.bias");
  expect_shape(p.dense2.weight, {classes, kClassifierHidden}, "classifier.dense2.weight");
  expect_shape(p.dense2.bias, {classes}, "classifier.dense2.bias");
}

template <typename T>
EncoderVars bind(Graph<T>& g, const EncoderParams& p) {
  return EncoderVars{bind_layer(g, p.conv1.weight, p.conv1.bias), bind_layer(g, p.conv2.weight, p.conv2.bias),
                     bind_layer(g, p.conv3.weight, p.conv3.bias), p.dropout_rate};
}

template <typename T>
HeadVars bind(Graph<T>& g, const HeadParams& p) {
  return HeadVars{bind_layer(g, p.dense1.weight, p.dense1.bias), bind_layer(g, p.dense2.weight, p.dense2.bias),
                  bind_layer(g, p.dense3.weight, p.dense3.bias)};
}

template <typename T>
ClassifierVars bind(Graph<T>& g, const ClassifierParams& p) {
  return ClassifierVars{bind_layer(g, p.dense1.weight, p.dense1.bias), bind_layer(g, p.dense2.weight, p.dense2.bias)};
}

std::vector<Var> vars_of(const EncoderVars& v) {
  return {v.conv1.weight, v.conv1.bias, v.conv2.weight, v.conv2.bias, v.conv3.weight, v.conv3.bias};
}

std::vector<Var> vars_of(const HeadVars& v) {
  return {v.dense1.weight, v.dense1.bias, v.dense2.weight, v.dense2.bias, v.dense3.weight, v.dense3.bias};
}

std::vector<Var> vars_of(const ClassifierVars& v) {
  return {v.dense1.weight, v.dense1.bias, v.dense2.weight, v.dense2.bias};
}

template <typename T>
Var encoder_forward(Graph<T>& g, const EncoderVars& enc, Var x, bool training, Rng& rng) {
  const auto& input = g.value(x);
  if (input.rank() != 2 && input.rank() != 3) {
    throw ShapeError("encoder: input must be [C x T] or [B x C x T], got " + shape_string(input.shape()));
  }
  const std::size_t len = input.shape().back();
  if (len < kMinWindowLength) {
    throw ShapeError("encoder: window length T=" + std::to_string(len) + " is below the minimum of " +
                     std::to_string(kMinWindowLength));
  }
  Var h = x;
  for (const LayerVars* layer : {&enc.conv1, &enc.conv2, &enc.conv3}) {
    h = conv1d(g, h, layer->weight, layer->bias);
    h = relu(g, h);
    h = dropout(g, h, enc.dropout_rate, training, rng);
  }
  return global_max_pool_time(g, h);
}

template <typename T>
Var head_forward(Graph<T>& g, const HeadVars& head, Var h) {
  Var z = relu(g, dense(g, h, head.dense1.weight, head.dense1.bias));
  z = relu(g, dense(g, z, head.dense2.weight, head.dense2.bias));
  z = dense(g, z, head.dense3.weight, head.dense3.bias);
  return l2_normalize(g, z);
}

template <typename T>
Var classifier_forward(Graph<T>& g, const ClassifierVars& cls, Var h) {
  Var y = relu(g, dense(g, h, cls.dense1.weight, cls.dense1.bias));
  return dense(g, y, cls.dense2.weight, cls.dense2.bias);
}

namespace {

template <typename Params>
Params frozen_copy(const Params& p) {
  Params c = p;
  for (auto& np : named_parameters(c)) np.param->trainable = false;
  return c;
}

}  // namespace

Tensor encode(const EncoderParams& enc, const Tensor& x) {
  Graph<float> g;
  Rng unused(0);
  const EncoderVars v = bind(g, frozen_copy(enc));
  return g.value(encoder_forward(g, v, g.constant(x), false, unused));
}

Tensor project(const HeadParams& head, const Tensor& h) {
  Graph<float> g;
  const HeadVars v = bind(g, frozen_copy(head));
  return g.value(head_forward(g, v, g.constant(h)));
}

Tensor classify(const ClassifierParams& cls, const Tensor& h) {
  Graph<float> g;
  const ClassifierVars v = bind(g, frozen_copy(cls));
  return g.value(classifier_forward(g, v, g.constant(h)));
}

std::size_t conv_param_count(std::size_t c_out, std::size_t c_in, std::size_t kernel) {
  return c_out * c_in * kernel + c_out;
}

std::size_t dense_param_count(std::size_t d_out, std::size_t d_in) { return d_out * d_in + d_out; }

std::size_t ParameterTable::total(const std::string& component) const {
  std::size_t sum = 0;
  for (const auto& r : rows) {
    if (r.component == component) sum += r.count;
  }
  return sum;
}

std::size_t ParameterTable::total() const {
  std::size_t sum = 0;
  for (const auto& r : rows) sum += r.count;
  return sum;
}

ParameterTable count_parameters(const Model& model) {
  ParameterTable table;
  auto add_layer = [&](const std::string& component, const std::string& layer, const Param& w, const Param& b) {
    table.rows.push_back({component, layer, w.value.size() + b.value.size()});
  };
  if (model.encoder) {
    const auto& e = *model.encoder;
    add_layer("encoder", "conv1", e.conv1.weight, e.conv1.bias);
    add_layer("encoder", "conv2", e.conv2.weight, e.conv2.bias);
    add_layer("encoder", "conv3", e.conv3.weight, e.conv3.bias);
  }
  if (model.head) {
    const auto& h = *model.head;
    add_layer("head", "dense1", h.dense1.weight, h.dense1.bias);
    add_layer("head", "dense2", h.dense2.weight, h.dense2.bias);
    add_layer("head", "dense3", h.dense3.weight, h.dense3.bias);
  }
  if (model.classifier) {
    const auto& c = *model.classifier;
    add_layer("classifier", "dense1", c.dense1.weight, c.dense1.bias);
    add_layer("classifier", "dense2", c.dense2.weight, c.dense2.bias);
  }
  return table;
}

#define LRCL_INSTANTIATE_MODEL(T)                                                          \
  template EncoderVars bind<T>(Graph<T>&, const EncoderParams&);                           \
  template HeadVars bind<T>(Graph<T>&, const HeadParams&);                                 \
  template ClassifierVars bind<T>(Graph<T>&, const ClassifierParams&);                     \
  template Var encoder_forward<T>(Graph<T>&, const EncoderVars&, Var, bool, Rng&);         \
  template Var head_forward<T>(Graph<T>&, const HeadVars&, Var);                           \
  template Var classifier_forward<T>(Graph<T>&, const ClassifierVars&, Var);

LRCL_INSTANTIATE_MODEL(float)
LRCL_INSTANTIATE_MODEL(double)

}  // namespace lrcl
