#include <Eigen/Core>

#include <cmath>
#include <memory>
#include <sstream>
#include <string>

#include "lrcl/autodiff.hpp"

namespace lrcl {

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << " x ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using ConstMap = Eigen::Map<const RowMat<T>>;
template <typename T>
using MutMap = Eigen::Map<RowMat<T>>;

std::string dim_mismatch(const char* op, const char* what, std::size_t got, std::size_t want) {
  return std::string(op) + ": " + what + " is " + std::to_string(got) + ", expected " + std::to_string(want);
}

}  // namespace

template <typename T>
Var conv1d(Graph<T>& g, Var input, Var weights, Var bias) {
  const auto& x = g.value(input);
  const auto& w = g.value(weights);
  const auto& b = g.value(bias);
  if (x.rank() != 2 && x.rank() != 3) {
    throw ShapeError("conv1d: input rank is " + std::to_string(x.rank()) + ", expected [C_in x T] or [B x C_in x T]");
  }
  if (w.rank() != 3) throw ShapeError("conv1d: weights must be [C_out x C_in x K], got " + shape_string(w.shape()));
  const bool batched = x.rank() == 3;
  const std::size_t batch = batched ? x.dim(0) : 1;
  const std::size_t c_in = x.dim(batched ? 1 : 0);
  const std::size_t len = x.dim(batched ? 2 : 1);
  const std::size_t c_out = w.dim(0);
  const std::size_t kernel = w.dim(2);
  if (w.dim(1) != c_in) throw ShapeError(dim_mismatch("conv1d", "input channel count (C_in)", c_in, w.dim(1)));
  if (b.rank() != 1 || b.dim(0) != c_out) {
    throw ShapeError("conv1d: bias shape " + shape_string(b.shape()) + " does not match C_out=" + std::to_string(c_out));
  }
  if (len < kernel) {
    throw ShapeError("conv1d: time length T=" + std::to_string(len) + " is shorter than kernel size K=" +
                     std::to_string(kernel));
  }
  const std::size_t t_out = len - kernel + 1;
  const std::size_t ck = c_in * kernel;
  const std::size_t cols = batch * t_out;

  // im2col: row (ci, k), column (b, t) holds x[b][ci][t + k].
  auto col = std::make_shared<RowMat<T>>(ck, cols);
  for (std::size_t ci = 0; ci < c_in; ++ci) {
    for (std::size_t k = 0; k < kernel; ++k) {
      T* dst = col->data() + (ci * kernel + k) * cols;
      for (std::size_t bi = 0; bi < batch; ++bi) {
        const T* src = x.data().data() + (bi * c_in + ci) * len + k;
        std::copy(src, src + t_out, dst + bi * t_out);
      }
    }
  }
  ConstMap<T> wm(w.data().data(), c_out, ck);
  RowMat<T> y = wm * (*col);

  Shape out_shape = batched ? Shape{batch, c_out, t_out} : Shape{c_out, t_out};
  BasicTensor<T> out(out_shape);
  for (std::size_t bi = 0; bi < batch; ++bi) {
    for (std::size_t o = 0; o < c_out; ++o) {
      const T* src = y.data() + o * cols + bi * t_out;
      T* dst = out.data().data() + (bi * c_out + o) * t_out;
      for (std::size_t t = 0; t < t_out; ++t) dst[t] = src[t] + b[o];
    }
  }

  return g.record(std::move(out), {input, weights, bias},
                  [=](Graph<T>& gr, const BasicTensor<T>& og) {
                    RowMat<T> dy(c_out, cols);
                    for (std::size_t bi = 0; bi < batch; ++bi) {
                      for (std::size_t o = 0; o < c_out; ++o) {
                        const T* src = og.data().data() + (bi * c_out + o) * t_out;
                        std::copy(src, src + t_out, dy.data() + o * cols + bi * t_out);
                      }
                    }
                    if (gr.requires_grad(weights)) {
                      MutMap<T> dw(gr.grad_buffer(weights).data().data(), c_out, ck);
                      dw.noalias() += dy * col->transpose();
                    }
                    if (gr.requires_grad(bias)) {
                      auto& db = gr.grad_buffer(bias);
                      for (std::size_t o = 0; o < c_out; ++o) db[o] += dy.row(o).sum();
                    }
                    if (gr.requires_grad(input)) {
                      ConstMap<T> wmat(gr.value(weights).data().data(), c_out, ck);
                      RowMat<T> dcol = wmat.transpose() * dy;
                      auto& dx = gr.grad_buffer(input);
                      for (std::size_t ci = 0; ci < c_in; ++ci) {
                        for (std::size_t k = 0; k < kernel; ++k) {
                          const T* src = dcol.data() + (ci * kernel + k) * cols;
                          for (std::size_t bi = 0; bi < batch; ++bi) {
                            T* dst = dx.data().data() + (bi * c_in + ci) * len + k;
                            for (std::size_t t = 0; t < t_out; ++t) dst[t] += src[bi * t_out + t];
                          }
                        }
                      }
                    }
                  });
}

template <typename T>
Var relu(Graph<T>& g, Var input) {
  const auto& x = g.value(input);
  BasicTensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > T{0} ? x[i] : T{0};
  if (g.track_branches()) {
    for (std::size_t i = 0; i < x.size(); ++i) g.note_branch(x[i] > T{0} ? i : ~i);
  }
  return g.record(std::move(out), {input}, [input](Graph<T>& gr, const BasicTensor<T>& og) {
    const auto& xv = gr.value(input);
    auto& dx = gr.grad_buffer(input);
    for (std::size_t i = 0; i < xv.size(); ++i) {
      if (xv[i] > T{0}) dx[i] += og[i];
    }
  });
}

template <typename T>
Var dropout(Graph<T>& g, Var input, double p, bool training, Rng& rng) {
  if (!(p >= 0.0 && p < 1.0)) throw ParameterError("dropout: rate must lie in [0, 1), got " + std::to_string(p));
  if (!training || p == 0.0) return input;
  const auto& x = g.value(input);
  const T scale = static_cast<T>(1.0 / (1.0 - p));
  auto mask = std::make_shared<std::vector<T>>(x.size());
  BasicTensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    (*mask)[i] = rng.uniform() < p ? T{0} : scale;
    out[i] = x[i] * (*mask)[i];
  }
  return g.record(std::move(out), {input}, [input, mask](Graph<T>& gr, const BasicTensor<T>& og) {
    auto& dx = gr.grad_buffer(input);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += og[i] * (*mask)[i];
  });
}

template <typename T>
Var global_max_pool_time(Graph<T>& g, Var input) {
  const auto& x = g.value(input);
  if (x.rank() != 2 && x.rank() != 3) {
    throw ShapeError("global_max_pool_time: input must be [C x T] or [B x C x T], got " + shape_string(x.shape()));
  }
  const std::size_t len = x.shape().back();
  if (len == 0) throw EmptyError("global_max_pool_time: time axis is empty");
  const std::size_t rows = x.size() / len;
  Shape out_shape(x.shape().begin(), x.shape().end() - 1);
  BasicTensor<T> out(out_shape);
  auto argmax = std::make_shared<std::vector<std::size_t>>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = x.data().data() + r * len;
    std::size_t best = 0;
    for (std::size_t t = 1; t < len; ++t) {
      if (row[t] > row[best]) best = t;
    }
    (*argmax)[r] = r * len + best;
    if (g.track_branches()) g.note_branch(r * len + best);
    out[r] = row[best];
  }
  return g.record(std::move(out), {input}, [input, argmax](Graph<T>& gr, const BasicTensor<T>& og) {
    auto& dx = gr.grad_buffer(input);
    for (std::size_t r = 0; r < argmax->size(); ++r) dx[(*argmax)[r]] += og[r];
  });
}

template <typename T>
Var dense(Graph<T>& g, Var input, Var weights, Var bias) {
  const auto& x = g.value(input);
  const auto& w = g.value(weights);
  const auto& b = g.value(bias);
  if (x.rank() != 1 && x.rank() != 2) {
    throw ShapeError("dense: input must be [D_in] or [B x D_in], got " + shape_string(x.shape()));
  }
  if (w.rank() != 2) throw ShapeError("dense: weights must be [D_out x D_in], got " + shape_string(w.shape()));
  const bool batched = x.rank() == 2;
  const std::size_t batch = batched ? x.dim(0) : 1;
  const std::size_t d_in = x.shape().back();
  const std::size_t d_out = w.dim(0);
  if (w.dim(1) != d_in) throw ShapeError(dim_mismatch("dense", "input width (D_in)", d_in, w.dim(1)));
  if (b.rank() != 1 || b.dim(0) != d_out) {
    throw ShapeError("dense: bias shape " + shape_string(b.shape()) + " does not match D_out=" + std::to_string(d_out));
  }
  BasicTensor<T> out(batched ? Shape{batch, d_out} : Shape{d_out});
  ConstMap<T> xm(x.data().data(), batch, d_in);
  ConstMap<T> wm(w.data().data(), d_out, d_in);
  MutMap<T> ym(out.data().data(), batch, d_out);
  ym.noalias() = xm * wm.transpose();
  for (std::size_t r = 0; r < batch; ++r) {
    for (std::size_t o = 0; o < d_out; ++o) ym(r, o) += b[o];
  }
  return g.record(std::move(out), {input, weights, bias},
                  [=](Graph<T>& gr, const BasicTensor<T>& og) {
                    ConstMap<T> dy(og.data().data(), batch, d_out);
                    if (gr.requires_grad(weights)) {
                      ConstMap<T> xv(gr.value(input).data().data(), batch, d_in);
                      MutMap<T> dw(gr.grad_buffer(weights).data().data(), d_out, d_in);
                      dw.noalias() += dy.transpose() * xv;
                    }
                    if (gr.requires_grad(bias)) {
                      auto& db = gr.grad_buffer(bias);
                      for (std::size_t o = 0; o < d_out; ++o) db[o] += dy.col(o).sum();
                    }
                    if (gr.requires_grad(input)) {
                      ConstMap<T> wv(gr.value(weights).data().data(), d_out, d_in);
                      MutMap<T> dx(gr.grad_buffer(input).data().data(), batch, d_in);
                      dx.noalias() += dy * wv;
                    }
                  });
}

template <typename T>
Var l2_normalize(Graph<T>& g, Var input) {
  const auto& x = g.value(input);
  if (x.rank() != 1 && x.rank() != 2) {
    throw ShapeError("l2_normalize: input must be [D] or [B x D], got " + shape_string(x.shape()));
  }
  const std::size_t width = x.shape().back();
  const std::size_t rows = x.size() / width;
  auto norms = std::make_shared<std::vector<T>>(rows);
  BasicTensor<T> out(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = x.data().data() + r * width;
    double sq = 0.0;
    for (std::size_t i = 0; i < width; ++i) sq += static_cast<double>(row[i]) * row[i];
    const double norm = std::sqrt(sq);
    if (!std::isfinite(norm)) {
      throw NumericError("l2_normalize: row " + std::to_string(r) + " has non-finite entries");
    }
    if (!(norm > kNormEpsilon)) {
      throw DegenerateVectorError("l2_normalize: row " + std::to_string(r) + " has norm " + std::to_string(norm) +
                                  " below 1e-12");
    }
    (*norms)[r] = static_cast<T>(norm);
    for (std::size_t i = 0; i < width; ++i) out[r * width + i] = static_cast<T>(row[i] / norm);
  }
  auto unit = std::make_shared<BasicTensor<T>>(out);
  return g.record(std::move(out), {input},
                  [input, unit, norms, width, rows](Graph<T>& gr, const BasicTensor<T>& og) {
                    const auto& u = *unit;
                    auto& dx = gr.grad_buffer(input);
                    for (std::size_t r = 0; r < rows; ++r) {
                      const std::size_t off = r * width;
                      T dot = 0;
                      for (std::size_t i = 0; i < width; ++i) dot += u[off + i] * og[off + i];
                      const T inv = T{1} / (*norms)[r];
                      for (std::size_t i = 0; i < width; ++i) dx[off + i] += (og[off + i] - u[off + i] * dot) * inv;
                    }
                  });
}

template <typename T>
Var softmax_cross_entropy(Graph<T>& g, Var logits, std::span<const int> labels) {
  const auto& x = g.value(logits);
  if (x.rank() != 2) throw ShapeError("softmax_cross_entropy: logits must be [B x C], got " + shape_string(x.shape()));
  const std::size_t batch = x.dim(0);
  const std::size_t classes = x.dim(1);
  if (labels.size() != batch) throw ShapeError(dim_mismatch("softmax_cross_entropy", "label count", labels.size(), batch));
  for (std::size_t r = 0; r < batch; ++r) {
    if (labels[r] < 0 || static_cast<std::size_t>(labels[r]) >= classes) {
      throw LabelError("softmax_cross_entropy: label " + std::to_string(labels[r]) + " at row " + std::to_string(r) +
                       " is outside [0, " + std::to_string(classes) + ")");
    }
  }
  auto probs = std::make_shared<BasicTensor<T>>(x.shape());
  double total = 0.0;
  for (std::size_t r = 0; r < batch; ++r) {
    const T* row = x.data().data() + r * classes;
    const T mx = *std::max_element(row, row + classes);
    double sum = 0.0;
    for (std::size_t c = 0; c < classes; ++c) sum += std::exp(static_cast<double>(row[c] - mx));
    const double log_sum = std::log(sum);
    for (std::size_t c = 0; c < classes; ++c) {
      probs->at(r, c) = static_cast<T>(std::exp(static_cast<double>(row[c] - mx) - log_sum));
    }
    total += log_sum - static_cast<double>(row[labels[r]] - mx);
  }
  std::vector<int> owned(labels.begin(), labels.end());
  BasicTensor<T> out(Shape{1}, static_cast<T>(total / static_cast<double>(batch)));
  return g.record(std::move(out), {logits},
                  [logits, probs, owned = std::move(owned), batch, classes](Graph<T>& gr, const BasicTensor<T>& og) {
                    auto& dx = gr.grad_buffer(logits);
                    const T scale = og[0] / static_cast<T>(batch);
                    for (std::size_t r = 0; r < batch; ++r) {
                      for (std::size_t c = 0; c < classes; ++c) {
                        const T onehot = static_cast<std::size_t>(owned[r]) == c ? T{1} : T{0};
                        dx.at(r, c) += (probs->at(r, c) - onehot) * scale;
                      }
                    }
                  });
}

template <typename T>
Var weighted_sum(Graph<T>& g, Var input, const BasicTensor<T>& weights) {
  const auto& x = g.value(input);
  if (weights.size() != x.size()) throw ShapeError(dim_mismatch("weighted_sum", "weight count", weights.size(), x.size()));
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += static_cast<double>(x[i]) * weights[i];
  auto w = std::make_shared<BasicTensor<T>>(weights);
  return g.record(BasicTensor<T>(Shape{1}, static_cast<T>(acc)), {input},
                  [input, w](Graph<T>& gr, const BasicTensor<T>& og) {
                    auto& dx = gr.grad_buffer(input);
                    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += (*w)[i] * og[0];
                  });
}

#define LRCL_INSTANTIATE_OPS(T)                                                   \
  template Var conv1d<T>(Graph<T>&, Var, Var, Var);                               \
  template Var relu<T>(Graph<T>&, Var);                                           \
  template Var dropout<T>(Graph<T>&, Var, double, bool, Rng&);                    \
  template Var global_max_pool_time<T>(Graph<T>&, Var);                           \
  template Var dense<T>(Graph<T>&, Var, Var, Var);                                \
  template Var l2_normalize<T>(Graph<T>&, Var);                                   \
  template Var softmax_cross_entropy<T>(Graph<T>&, Var, std::span<const int>);    \
  template Var weighted_sum<T>(Graph<T>&, Var, const BasicTensor<T>&);

LRCL_INSTANTIATE_OPS(float)
LRCL_INSTANTIATE_OPS(double)

}  // namespace lrcl
