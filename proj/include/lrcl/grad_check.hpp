#pragma once

#include <cstddef>
#include <functional>

#include "lrcl/autodiff.hpp"

namespace lrcl {

struct GradCheckReport {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
  /// Coordinates left out because the stencil crossed a relu or max-pool kink.
  std::size_t skipped_kinks = 0;
  bool passed = true;
};

struct GradCheckOptions {
  /// Central-difference step; zero selects 1e-3 for float and 1e-6 for double.
  double step = 0.0;
  double tolerance = 1e-3;
  /// Relative error is |analytic - numeric| / max(|analytic|, |numeric|, scale_floor).
  double scale_floor = 1.0;
  /// Seed of the fixed weighting that reduces vector outputs to a scalar.
  std::uint64_t weight_seed = 0x5eedULL;
  /// Central differences are meaningless where x - h and x + h fall on
  /// different pieces of a piecewise-linear op. When set, such coordinates
  /// are detected from the graph's branch signature and not compared.
  bool skip_kinks = true;
  /// Before skipping, the step is halved up to this many times looking for
  /// a stencil that stays on one piece.
  std::size_t kink_halvings = 2;
  /// The check fails if more than this fraction of coordinates is skipped.
  double max_skipped_fraction = 0.25;
};

/// Differentiable function of one tensor, expressed on a Graph.
template <typename T>
using GraphFn = std::function<Var(Graph<T>&, Var)>;

/// Compares reverse-mode gradients of `fn` at `input` against central differences.
///
/// Non-scalar outputs are reduced by a fixed pseudo-random weighting in
/// [-1, 1]. `fn` must be deterministic: it is re-evaluated 2 * input.size()
/// times and any randomness it uses has to be re-seeded inside it.
template <typename T>
GradCheckReport grad_check(const GraphFn<T>& fn, const BasicTensor<T>& input, const GradCheckOptions& options = {});

}  // namespace lrcl
