#pragma once

// Test-only oracles: central finite differences and random fills. Nothing here
// touches the tape's backward pass.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "msntucf/autodiff.hpp"
#include "msntucf/rng.hpp"

namespace msntucf::testing {

inline void fill_uniform(DenseTensor& t, Rng& rng, double lo = -1.0, double hi = 1.0) {
  for (double& v : t.data()) v = rng.uniform(lo, hi);
}

inline DenseTensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  DenseTensor t(std::move(shape));
  fill_uniform(t, rng, lo, hi);
  return t;
}

/// Builds a scalar on `tape` from the current parameter values.
using ScalarGraph = std::function<Var(Tape&)>;

inline double evaluate_scalar(const ScalarGraph& graph) {
  Tape tape(false);
  return graph(tape).value()[0];
}

/// Central difference estimate of d graph / d param[n] for every element.
inline DenseTensor numeric_gradient(const ScalarGraph& graph, Parameter& param, double step = 1e-5) {
  DenseTensor out(param.value.shape());
  for (std::size_t n = 0; n < param.value.size(); ++n) {
    const double saved = param.value[n];
    param.value[n] = saved + step;
    const double up = evaluate_scalar(graph);
    param.value[n] = saved - step;
    const double down = evaluate_scalar(graph);
    param.value[n] = saved;
    out[n] = (up - down) / (2.0 * step);
  }
  return out;
}

/// Elementwise relative error |a - n| / max(|a|, |n|), with gradients that
/// are both below `floor` in magnitude compared against the floor instead.
inline double max_relative_error(const DenseTensor& analytic, const DenseTensor& numeric,
                                 double floor = 1e-7) {
  double worst = 0.0;
  for (std::size_t n = 0; n < analytic.size(); ++n) {
    const double denom = std::max({std::abs(analytic[n]), std::abs(numeric[n]), floor});
    worst = std::max(worst, std::abs(analytic[n] - numeric[n]) / denom);
  }
  return worst;
}

/// Worst relative error over all parameters between tape gradients and
/// central differences.
inline double gradient_check(const ScalarGraph& graph, const std::vector<Parameter*>& params,
                             double step = 1e-5) {
  for (Parameter* p : params) p->grad = DenseTensor(p->value.shape());
  {
    Tape tape;
    tape.backward(graph(tape));
  }
  double worst = 0.0;
  for (Parameter* p : params) {
    const DenseTensor numeric = numeric_gradient(graph, *p, step);
    worst = std::max(worst, max_relative_error(p->grad, numeric));
  }
  return worst;
}

/// Random weights for turning a tensor-valued output into a scalar, so every
/// output element receives a distinct upstream gradient.
inline Var weighted_sum(Var x, const DenseTensor& weights) {
  return dot(flatten(x), x.tape().constant(weights.reshaped({weights.size()})));
}

}  // namespace msntucf::testing
