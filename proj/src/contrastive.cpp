#include "lrcl/contrastive.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <vector>

namespace lrcl {

namespace {

void check_pair_shapes(const Shape& left, const Shape& right) {
  if (left.size() != 2 || right.size() != 2) {
    throw ShapeError("interleave_embeddings: inputs must be [N x S], got " + shape_string(left) + " and " +
                     shape_string(right));
  }
  if (left[0] != right[0]) throw ShapeError("interleave_embeddings: pair count N differs (" + std::to_string(left[0]) +
                                            " vs " + std::to_string(right[0]) + ")");
  if (left[1] != right[1]) throw ShapeError("interleave_embeddings: width S differs (" + std::to_string(left[1]) +
                                            " vs " + std::to_string(right[1]) + ")");
}

/// Unit rows of z in double precision; throws on degenerate rows.
std::vector<double> unit_rows(std::span<const double> z, std::size_t rows, std::size_t width, std::vector<double>& norms,
                              const char* op) {
  std::vector<double> u(z.size());
  norms.assign(rows, 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    double sq = 0.0;
    for (std::size_t d = 0; d < width; ++d) sq += z[i * width + d] * z[i * width + d];
    const double n = std::sqrt(sq);
    if (!(n > kNormEpsilon)) {
      throw DegenerateVectorError(std::string(op) + ": row " + std::to_string(i) + " has norm below 1e-12");
    }
    norms[i] = n;
    for (std::size_t d = 0; d < width; ++d) u[i * width + d] = z[i * width + d] / n;
  }
  return u;
}

std::vector<double> gram(const std::vector<double>& u, std::size_t rows, std::size_t width) {
  std::vector<double> sim(rows * rows);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = i; j < rows; ++j) {
      double dot = 0.0;
      for (std::size_t d = 0; d < width; ++d) dot += u[i * width + d] * u[j * width + d];
      sim[i * rows + j] = dot;
      sim[j * rows + i] = dot;
    }
  }
  return sim;
}

}  // namespace

Tensor interleave_embeddings(const Tensor& z_left, const Tensor& z_right) {
  check_pair_shapes(z_left.shape(), z_right.shape());
  const std::size_t n = z_left.dim(0);
  const std::size_t s = z_left.dim(1);
  Tensor out({2 * n, s});
  for (std::size_t k = 0; k < n; ++k) {
    std::copy_n(z_left.data().begin() + k * s, s, out.data().begin() + (2 * k) * s);
    std::copy_n(z_right.data().begin() + k * s, s, out.data().begin() + (2 * k + 1) * s);
  }
  return out;
}

std::pair<Tensor, Tensor> deinterleave_embeddings(const Tensor& z) {
  if (z.rank() != 2 || z.dim(0) % 2 != 0) {
    throw ShapeError("deinterleave_embeddings: expected [2N x S], got " + shape_string(z.shape()));
  }
  const std::size_t n = z.dim(0) / 2;
  const std::size_t s = z.dim(1);
  Tensor left({n, s});
  Tensor right({n, s});
  for (std::size_t k = 0; k < n; ++k) {
    std::copy_n(z.data().begin() + (2 * k) * s, s, left.data().begin() + k * s);
    std::copy_n(z.data().begin() + (2 * k + 1) * s, s, right.data().begin() + k * s);
  }
  return {std::move(left), std::move(right)};
}

template <typename T>
Var interleave_embeddings(Graph<T>& g, Var z_left, Var z_right) {
  const auto& l = g.value(z_left);
  const auto& r = g.value(z_right);
  check_pair_shapes(l.shape(), r.shape());
  const std::size_t n = l.dim(0);
  const std::size_t s = l.dim(1);
  BasicTensor<T> out({2 * n, s});
  for (std::size_t k = 0; k < n; ++k) {
    std::copy_n(l.data().begin() + k * s, s, out.data().begin() + (2 * k) * s);
    std::copy_n(r.data().begin() + k * s, s, out.data().begin() + (2 * k + 1) * s);
  }
  return g.record(std::move(out), {z_left, z_right}, [=](Graph<T>& gr, const BasicTensor<T>& og) {
    for (int side = 0; side < 2; ++side) {
      const Var target = side == 0 ? z_left : z_right;
      if (!gr.requires_grad(target)) continue;
      auto& d = gr.grad_buffer(target);
      for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t c = 0; c < s; ++c) d[k * s + c] += og[(2 * k + side) * s + c];
      }
    }
  });
}

SimilarityMatrix cosine_similarity_matrix(const Tensor& z) {
  if (z.rank() != 2) throw ShapeError("cosine_similarity_matrix: expected [2N x S], got " + shape_string(z.shape()));
  const std::size_t rows = z.dim(0);
  const std::size_t width = z.dim(1);
  std::vector<double> zd(z.data().begin(), z.data().end());
  std::vector<double> norms;
  const auto u = unit_rows(zd, rows, width, norms, "cosine_similarity_matrix");
  const auto sim = gram(u, rows, width);
  SimilarityMatrix out{Tensor({rows, rows}), rows / 2};
  for (std::size_t i = 0; i < sim.size(); ++i) out.values[i] = static_cast<float>(sim[i]);
  return out;
}

template <typename T>
Var nt_xent_loss(Graph<T>& g, Var z, double temperature) {
  if (!(temperature > 0.0)) {
    throw ParameterError("nt_xent_loss: temperature must be positive, got " + std::to_string(temperature));
  }
  const auto& zt = g.value(z);
  if (zt.empty()) throw EmptyError("nt_xent_loss: empty batch (N = 0)");
  if (zt.rank() != 2) throw ShapeError("nt_xent_loss: expected [2N x S], got " + shape_string(zt.shape()));
  const std::size_t rows = zt.dim(0);
  const std::size_t width = zt.dim(1);
  if (rows % 2 != 0) throw ShapeError("nt_xent_loss: row count " + std::to_string(rows) + " is odd; rows come in pairs");

  std::vector<double> zd(zt.data().begin(), zt.data().end());
  auto norms = std::make_shared<std::vector<double>>();
  auto u = std::make_shared<std::vector<double>>(unit_rows(zd, rows, width, *norms, "nt_xent_loss"));
  const auto sim = gram(*u, rows, width);

  // coeff[i][k] = d(sum_i l(i)) / d(sim_ik / tau) = softmax_ik - [k == partner(i)], zero on the diagonal.
  auto coeff = std::make_shared<std::vector<double>>(rows * rows, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < rows; ++i) {
    const std::size_t partner = i ^ 1U;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < rows; ++k) {
      if (k != i) mx = std::max(mx, sim[i * rows + k] / temperature);
    }
    double denom = 0.0;
    for (std::size_t k = 0; k < rows; ++k) {
      if (k != i) denom += std::exp(sim[i * rows + k] / temperature - mx);
    }
    const double lse = mx + std::log(denom);
    total += lse - sim[i * rows + partner] / temperature;
    for (std::size_t k = 0; k < rows; ++k) {
      if (k == i) continue;
      const double p = std::exp(sim[i * rows + k] / temperature - mx) / denom;
      (*coeff)[i * rows + k] = p - (k == partner ? 1.0 : 0.0);
    }
  }
  const double loss = total / static_cast<double>(rows);

  return g.record(BasicTensor<T>(Shape{1}, static_cast<T>(loss)), {z},
                  [=](Graph<T>& gr, const BasicTensor<T>& og) {
                    const double scale = static_cast<double>(og[0]) / (temperature * static_cast<double>(rows));
                    auto& dz = gr.grad_buffer(z);
                    std::vector<double> du(width);
                    for (std::size_t i = 0; i < rows; ++i) {
                      std::fill(du.begin(), du.end(), 0.0);
                      for (std::size_t k = 0; k < rows; ++k) {
                        const double c = ((*coeff)[i * rows + k] + (*coeff)[k * rows + i]) * scale;
                        if (c == 0.0) continue;
                        for (std::size_t d = 0; d < width; ++d) du[d] += c * (*u)[k * width + d];
                      }
                      double dot = 0.0;
                      for (std::size_t d = 0; d < width; ++d) dot += du[d] * (*u)[i * width + d];
                      for (std::size_t d = 0; d < width; ++d) {
                        dz[i * width + d] += static_cast<T>((du[d] - (*u)[i * width + d] * dot) / (*norms)[i]);
                      }
                    }
                  });
}

NtXentResult nt_xent_loss(const Tensor& z, double temperature) {
  Graph<float> g;
  Var zv = g.parameter(z);
  Var loss = nt_xent_loss(g, zv, temperature);
  g.backward(loss);
  return NtXentResult{static_cast<double>(g.value(loss)[0]), g.grad(zv)};
}

RotationMatrix axis_angle_rotation(const std::array<double, 3>& axis, double angle) {
  const double n = std::sqrt(axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]);
  if (!(n > kNormEpsilon)) throw DegenerateVectorError("axis_angle_rotation: rotation axis has zero length");
  const double x = axis[0] / n, y = axis[1] / n, z = axis[2] / n;
  const double c = std::cos(angle), s = std::sin(angle), t = 1.0 - c;
  // R = I + sin(a) K + (1 - cos(a)) K^2 for the cross-product matrix K of the unit axis.
  return RotationMatrix{{t * x * x + c, t * x * y - s * z, t * x * z + s * y,
                         t * x * y + s * z, t * y * y + c, t * y * z - s * x,
                         t * x * z - s * y, t * y * z + s * x, t * z * z + c}};
}

RotationMatrix random_rotation(Rng& rng) {
  std::array<double, 3> axis{};
  double norm = 0.0;
  do {
    for (auto& a : axis) a = rng.normal();
    norm = std::sqrt(axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]);
  } while (!(norm > 1e-9));
  const double angle = rng.uniform() * 2.0 * std::numbers::pi;
  return axis_angle_rotation(axis, angle);
}

Tensor apply_rotation(const Tensor& window, const RotationMatrix& rotation) {
  if (window.rank() != 2 || window.dim(0) != 3) {
    throw ShapeError("apply_rotation: window must have 3 channels ([3 x T]), got " + shape_string(window.shape()));
  }
  const std::size_t len = window.dim(1);
  Tensor out(window.shape());
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t t = 0; t < len; ++t) {
      // Zero coefficients are skipped so the identity reproduces the input bit for bit.
      double acc = 0.0;
      bool any = false;
      for (std::size_t c = 0; c < 3; ++c) {
        const double coef = rotation(r, c);
        if (coef == 0.0) continue;
        const double term = coef * static_cast<double>(window.at(c, t));
        acc = any ? acc + term : term;
        any = true;
      }
      out.at(r, t) = static_cast<float>(acc);
    }
  }
  return out;
}

template Var interleave_embeddings<float>(Graph<float>&, Var, Var);
template Var interleave_embeddings<double>(Graph<double>&, Var, Var);
template Var nt_xent_loss<float>(Graph<float>&, Var, double);
template Var nt_xent_loss<double>(Graph<double>&, Var, double);

}  // namespace lrcl
