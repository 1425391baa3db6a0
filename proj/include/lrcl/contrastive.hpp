#pragma once

#include <array>
#include <cstddef>

#include "lrcl/autodiff.hpp"
#include "lrcl/rng.hpp"
#include "lrcl/tensor.hpp"

namespace lrcl {

/// Cosine similarities of every pair of rows of a [2N x S] embedding.
struct SimilarityMatrix {
  Tensor values;  // [2N x 2N]
  std::size_t pairs = 0;
};

/// Proper rotation of R^3, row-major.
struct RotationMatrix {
  std::array<double, 9> values{1, 0, 0, 0, 1, 0, 0, 0, 1};

  double operator()(std::size_t r, std::size_t c) const { return values[r * 3 + c]; }
  static RotationMatrix identity() { return {}; }
};

/// Rows [L1, R1, L2, R2, ...] from z_left [N x S] and z_right [N x S].
Tensor interleave_embeddings(const Tensor& z_left, const Tensor& z_right);
/// Inverse of interleave_embeddings: even rows to the left tensor, odd rows to the right.
std::pair<Tensor, Tensor> deinterleave_embeddings(const Tensor& z);

/// Differentiable interleave on a graph.
template <typename T>
Var interleave_embeddings(Graph<T>& g, Var z_left, Var z_right);

SimilarityMatrix cosine_similarity_matrix(const Tensor& z);

/// Normalized temperature-scaled cross-entropy over interleaved positives.
///
/// Rows 2k and 2k+1 (0-based) are a positive pair. For each row i with
/// partner p(i),
///
///   l(i) = -sim(i, p(i)) / tau + log sum_{k != i} exp(sim(i, k) / tau)
///
/// and the loss is the mean of l over all 2N rows. Similarities are
/// cosine, so un-normalized rows are accepted. The log-sum-exp subtracts
/// the row maximum first.
template <typename T>
Var nt_xent_loss(Graph<T>& g, Var z, double temperature);

/// Convenience wrapper returning the loss and d(loss)/dz.
struct NtXentResult {
  double loss = 0.0;
  Tensor grad;
};
NtXentResult nt_xent_loss(const Tensor& z, double temperature);

/// Axis from normalized i.i.d. standard normals, angle uniform in [0, 2*pi),
/// assembled with the Rodrigues formula.
RotationMatrix random_rotation(Rng& rng);
RotationMatrix axis_angle_rotation(const std::array<double, 3>& axis, double angle);

/// Left-multiplies every time step of a [3 x T] window by R.
Tensor apply_rotation(const Tensor& window, const RotationMatrix& rotation);

}  // namespace lrcl
