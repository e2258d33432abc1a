// SPDX-License-Identifier: Apache-2.0

#include "dropgan/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace dropgan {

ParamMap finite_difference_grad(const LossFn& loss_fn, const ParamMap& params, double eps) {
    if (!(eps > 0.0)) throw Error("finite_difference_grad: eps must be positive");
    ParamMap probe = params;
    ParamMap grads;
    for (auto& [name, value] : probe) {
        Matrix g(value.rows(), value.cols());
        for (Eigen::Index i = 0; i < value.size(); ++i) {
            const double saved = value.data()[i];
            value.data()[i] = saved + eps;
            const double up = loss_fn(probe);
            value.data()[i] = saved - eps;
            const double down = loss_fn(probe);
            value.data()[i] = saved;
            g.data()[i] = (up - down) / (2.0 * eps);
        }
        grads.emplace(name, std::move(g));
    }
    return grads;
}

double relative_error(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

double evaluate_problem(const GradCheckProblem& problem, const ParamMap& params) {
    Graph g;
    problem.build(g);
    Bindings b = problem.inputs;
    for (const auto& [name, value] : params) b[name] = value;
    return g.forward(b)(0, 0);
}

GradCheckReport gradient_check(const ProblemFactory& factory, std::uint64_t seed, double tol,
                               double eps) {
    Rng rng(seed);
    const GradCheckProblem problem = factory(rng);

    Graph g;
    problem.build(g);
    Bindings b = problem.inputs;
    for (const auto& [name, value] : problem.params) b[name] = value;
    g.forward(b);
    const Gradients analytic = g.backward();

    const ParamMap numeric = finite_difference_grad(
        [&](const ParamMap& p) { return evaluate_problem(problem, p); }, problem.params, eps);

    GradCheckReport report;
    for (const auto& [name, num] : numeric) {
        auto it = analytic.find(name);
        if (it == analytic.end()) {
            report.max_rel_err = INFINITY;
            report.worst_param = name;
            continue;
        }
        for (Eigen::Index i = 0; i < num.size(); ++i) {
            const double err = relative_error(it->second.data()[i], num.data()[i]);
            if (!(err <= report.max_rel_err)) {
                report.max_rel_err = std::isnan(err) ? INFINITY : err;
                report.worst_param = name;
            }
        }
    }
    report.pass = report.max_rel_err < tol;
    return report;
}

}  // namespace dropgan
