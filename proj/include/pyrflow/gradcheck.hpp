#pragma once

#include <functional>
#include <vector>

#include "pyrflow/tensor.hpp"

namespace pyrflow {

// f maps the leaf tensors (created on the given tape from the supplied values)
// to a scalar. It must be a pure function of its inputs so repeated evaluation
// under perturbation is meaningful.
using ScalarFn = std::function<Tensor(Tape&, const std::vector<Tensor>&)>;

struct GradCheckOptions {
    double step = 1e-5;
    // 0 checks every coordinate; otherwise this many coordinates are sampled
    // per input (deterministically from seed)
    int max_coords_per_input = 0;
    uint64_t seed = 0;
};

// Max over checked coordinates of |analytic - central| / max(1, |central|).
// Throws on a non-finite value, naming the input and coordinate.
double grad_check(const ScalarFn& f, const std::vector<Shape>& shapes,
                  const std::vector<std::vector<double>>& values,
                  const GradCheckOptions& opt = {});

// Same comparison for model parameters: f builds a fresh forward pass reading
// the current parameter values; coordinates of every parameter are perturbed
// in place (and restored).
double param_grad_check(const std::function<Tensor(Tape&)>& f, ParamStore& params,
                        const GradCheckOptions& opt = {});

}  // namespace pyrflow
