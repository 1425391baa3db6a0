#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "lrcl/rng.hpp"
#include "lrcl/tensor.hpp"

namespace lrcl {

/// Handle to a node recorded on a Graph.
struct Var {
  std::size_t id = std::numeric_limits<std::size_t>::max();
};

/// Reverse-mode tape over whole tensors.
///
/// Nodes are appended in evaluation order, so replaying their backward
/// closures from last to first visits them in reverse topological order.
/// A node requires a gradient when it is a parameter or when any of its
/// inputs does; nodes that do not are never given a backward closure.
template <typename T>
class Graph {
 public:
  using TensorT = BasicTensor<T>;
  using Backward = std::function<void(Graph&, const TensorT& out_grad)>;

  Var constant(TensorT value) { return push(std::move(value), false, {}); }
  Var parameter(TensorT value) { return push(std::move(value), true, {}); }

  /// Records an op output. `backward` is dropped unless some input requires grad.
  Var record(TensorT value, std::initializer_list<Var> inputs, Backward backward) {
    bool needs = false;
    for (Var v : inputs) needs = needs || nodes_.at(v.id).requires_grad;
    return push(std::move(value), needs, needs ? std::move(backward) : Backward{});
  }

  const TensorT& value(Var v) const { return nodes_.at(v.id).value; }
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }

  /// Accumulated gradient; zeros of the value's shape when nothing flowed.
  TensorT grad(Var v) const {
    const Node& n = nodes_.at(v.id);
    return n.grad.empty() ? TensorT(n.value.shape()) : n.grad;
  }

  /// Mutable gradient buffer, allocated on first use. Ops call this from backward.
  TensorT& grad_buffer(Var v) {
    Node& n = nodes_.at(v.id);
    if (n.grad.empty()) n.grad = TensorT(n.value.shape());
    return n.grad;
  }

  /// Seeds d(loss)/d(loss) = 1 and runs every recorded backward closure.
  void backward(Var loss) {
    if (value(loss).size() != 1) {
      throw ShapeError("backward requires a scalar output, got shape " + shape_string(value(loss).shape()));
    }
    grad_buffer(loss)[0] = T{1};
    for (std::size_t id = loss.id + 1; id-- > 0;) {
      Node& n = nodes_[id];
      if (!n.backward || n.grad.empty()) continue;
      // The closure may append to other nodes' grads but never to its own.
      n.backward(*this, n.grad);
    }
  }

  std::size_t size() const noexcept { return nodes_.size(); }

  /// Piecewise ops (relu, max pool) fold their branch choices into a hash
  /// while tracking is on, so a finite-difference probe can tell whether a
  /// perturbation crossed a kink.
  void set_track_branches(bool on) noexcept { track_branches_ = on; }
  bool track_branches() const noexcept { return track_branches_; }
  void note_branch(std::uint64_t choice) noexcept {
    branch_signature_ = (branch_signature_ ^ (choice + 0x9e3779b97f4a7c15ULL)) * 0x100000001b3ULL;
  }
  std::uint64_t branch_signature() const noexcept { return branch_signature_; }

 private:
  struct Node {
    TensorT value;
    TensorT grad;
    bool requires_grad = false;
    Backward backward;
  };

  Var push(TensorT value, bool requires_grad, Backward backward) {
    nodes_.push_back(Node{std::move(value), TensorT{}, requires_grad, std::move(backward)});
    return Var{nodes_.size() - 1};
  }

  std::vector<Node> nodes_;
  bool track_branches_ = false;
  std::uint64_t branch_signature_ = 0;
};

// Differentiable ops. Each accepts either a single example or a batch
// along a leading axis, as noted.

/// Valid (no padding), stride-1 cross-correlation.
/// input [C_in x T] or [B x C_in x T]; weights [C_out x C_in x K]; bias [C_out].
template <typename T>
Var conv1d(Graph<T>& g, Var input, Var weights, Var bias);

template <typename T>
Var relu(Graph<T>& g, Var input);

/// Inverted dropout. Identity when `training` is false or p == 0; no draws are consumed then.
template <typename T>
Var dropout(Graph<T>& g, Var input, double p, bool training, Rng& rng);

/// Max over the last axis: [C x T] -> [C], [B x C x T] -> [B x C].
/// The gradient goes to the first maximal position.
template <typename T>
Var global_max_pool_time(Graph<T>& g, Var input);

/// Affine map: input [D_in] or [B x D_in]; weights [D_out x D_in]; bias [D_out].
template <typename T>
Var dense(Graph<T>& g, Var input, Var weights, Var bias);

/// Divides each row (or the single vector) by its Euclidean norm.
template <typename T>
Var l2_normalize(Graph<T>& g, Var input);

/// Mean cross-entropy of softmax(logits) against integer labels. logits [B x C].
template <typename T>
Var softmax_cross_entropy(Graph<T>& g, Var logits, std::span<const int> labels);

/// Scalar sum_i weights[i] * input[i]; used to reduce vector outputs for gradient checks.
template <typename T>
Var weighted_sum(Graph<T>& g, Var input, const BasicTensor<T>& weights);

inline constexpr double kNormEpsilon = 1e-12;

}  // namespace lrcl
