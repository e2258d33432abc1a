// SPDX-License-Identifier: Apache-2.0
//
// Randomized gradient-check problems built from the real network and loss
// code, used by the `gradcheck` subcommand and the test suites.

#pragma once

#include "dropgan/gradcheck.hpp"

#include <cstddef>
#include <cstdint>
#include <string>

namespace dropgan {

/// A small random MLP (random widths, depth and activations) under a random
/// discriminator or squared-output loss.
GradCheckProblem random_mlp_problem(Rng& rng);

/// The dropout-aggregated generator loss against 1..4 frozen random
/// discriminators, at a random fixed mask (fallback included) and a random
/// objective. Only the generator weights are checked.
GradCheckProblem masked_generator_problem(Rng& rng);

struct GradCheckSuiteReport {
    std::size_t trials = 0;
    std::size_t failures = 0;
    double max_rel_err = 0.0;
    std::string worst;  // "trial N: param"
};

/// Alternates the two problem kinds over `trials` seeds derived from `seed`.
GradCheckSuiteReport run_gradcheck_suite(std::size_t trials, std::uint64_t seed, double tol,
                                         double eps = 1e-5);

}  // namespace dropgan
