// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dropgan/matrix.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace dropgan {

struct AdamHyper {
    double lr = 2e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double eps = 1e-8;

    friend bool operator==(const AdamHyper&, const AdamHyper&) = default;
};

/// First and second moment estimates, one pair per parameter tensor.
struct AdamMoments {
    std::vector<Matrix> first;
    std::vector<Matrix> second;

    /// Zero moments shaped like `params`.
    static AdamMoments zeros_like(std::span<const Matrix> params);
    friend bool operator==(const AdamMoments& a, const AdamMoments& b);
};

/// One bias-corrected Adam step at iteration t >= 1, in place.
void adam_update(std::span<Matrix> params, std::span<const Matrix> grads, AdamMoments& moments,
                 const AdamHyper& hyper, std::uint64_t t);

}  // namespace dropgan
