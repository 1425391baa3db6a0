#include "lrcl/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace lrcl {

namespace {

template <typename T>
BasicTensor<T> reduction_weights(const Shape& shape, std::uint64_t seed) {
  Rng rng(seed);
  BasicTensor<T> w(shape);
  for (auto& v : w.data()) v = static_cast<T>(rng.uniform(-1.0, 1.0));
  return w;
}

struct Probe {
  double value;
  std::uint64_t branches;
};

template <typename T>
Probe evaluate(const GraphFn<T>& fn, const BasicTensor<T>& input, const BasicTensor<T>* weights) {
  Graph<T> g;
  g.set_track_branches(true);
  Var out = fn(g, g.constant(input));
  const auto& y = g.value(out);
  if (weights == nullptr) return {static_cast<double>(y[0]), g.branch_signature()};
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) acc += static_cast<double>(y[i]) * static_cast<double>((*weights)[i]);
  return {acc, g.branch_signature()};
}

}  // namespace

template <typename T>
GradCheckReport grad_check(const GraphFn<T>& fn, const BasicTensor<T>& input, const GradCheckOptions& options) {
  const double step = options.step > 0.0 ? options.step : (sizeof(T) == sizeof(float) ? 1e-3 : 1e-6);

  Graph<T> g;
  g.set_track_branches(true);
  Var x = g.parameter(input);
  Var out = fn(g, x);
  BasicTensor<T> weights;
  const bool scalar = g.value(out).size() == 1;
  if (!scalar) {
    weights = reduction_weights<T>(g.value(out).shape(), options.weight_seed);
    out = weighted_sum(g, out, weights);
  }
  g.backward(out);
  const BasicTensor<T> analytic = g.grad(x);
  const std::uint64_t branches = g.branch_signature();

  GradCheckReport report;
  BasicTensor<T> probe = input;
  for (std::size_t i = 0; i < input.size(); ++i) {
    const T original = probe[i];
    double h = step;
    Probe plus{}, minus{};
    bool smooth = false;
    for (std::size_t attempt = 0;; ++attempt) {
      probe[i] = static_cast<T>(original + h);
      plus = evaluate(fn, probe, scalar ? nullptr : &weights);
      probe[i] = static_cast<T>(original - h);
      minus = evaluate(fn, probe, scalar ? nullptr : &weights);
      smooth = !options.skip_kinks || (plus.branches == branches && minus.branches == branches);
      if (smooth || attempt == options.kink_halvings) break;
      h *= 0.5;
    }
    probe[i] = original;
    if (!smooth) {
      ++report.skipped_kinks;
      continue;
    }
    // Use the step actually representable in T.
    const double actual = static_cast<double>(static_cast<T>(original + h)) -
                          static_cast<double>(static_cast<T>(original - h));
    const double numeric = (plus.value - minus.value) / actual;
    const double a = static_cast<double>(analytic[i]);
    const double abs_err = std::abs(a - numeric);
    const double rel_err = abs_err / std::max({std::abs(a), std::abs(numeric), options.scale_floor});
    report.max_abs_error = std::max(report.max_abs_error, abs_err);
    if (rel_err > report.max_rel_error || !std::isfinite(rel_err)) {
      report.max_rel_error = rel_err;
      report.worst_index = i;
    }
    ++report.checked;
  }
  const double skipped = static_cast<double>(report.skipped_kinks) / static_cast<double>(input.size());
  report.passed = report.checked > 0 && std::isfinite(report.max_rel_error) &&
                  report.max_rel_error < options.tolerance && skipped <= options.max_skipped_fraction;
  return report;
}

template GradCheckReport grad_check<float>(const GraphFn<float>&, const BasicTensor<float>&, const GradCheckOptions&);
template GradCheckReport grad_check<double>(const GraphFn<double>&, const BasicTensor<double>&, const GradCheckOptions&);

}  // namespace lrcl
