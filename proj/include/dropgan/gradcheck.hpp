// SPDX-License-Identifier: Apache-2.0
//
// Central finite differences as an independent oracle for Graph::backward.

#pragma once

#include "dropgan/graph.hpp"
#include "dropgan/rng.hpp"

#include <cstdint>
#include <functional>
#include <string>

namespace dropgan {

using ParamMap = std::map<std::string, Matrix>;
using LossFn = std::function<double(const ParamMap&)>;

/// (f(theta + eps e_i) - f(theta - eps e_i)) / (2 eps) for every coordinate.
ParamMap finite_difference_grad(const LossFn& loss_fn, const ParamMap& params, double eps);

/// One randomly drawn problem: a graph recipe, its parameter values and
/// its fixed (non-differentiated) input bindings.
struct GradCheckProblem {
    std::function<NodeId(Graph&)> build;
    ParamMap params;
    Bindings inputs;
};

using ProblemFactory = std::function<GradCheckProblem(Rng&)>;

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::string worst_param;
    bool pass = false;
};

/// |a - b| / max(|a|, |b|, 1e-8)
double relative_error(double a, double b);

/// Compares backward() against finite differences on a problem drawn
/// with `seed`. Failures are reported, never thrown.
GradCheckReport gradient_check(const ProblemFactory& factory, std::uint64_t seed, double tol,
                               double eps = 1e-6);

/// Evaluates the problem's graph at `params` (loss value only).
double evaluate_problem(const GradCheckProblem& problem, const ParamMap& params);

}  // namespace dropgan
