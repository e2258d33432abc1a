// SPDX-License-Identifier: Apache-2.0
//
// Ground-truth 2D Gaussian mixtures and the latent prior.

#pragma once

#include "dropgan/matrix.hpp"
#include "dropgan/rng.hpp"

#include <array>
#include <cstddef>
#include <vector>

namespace dropgan {

using Point2 = std::array<double, 2>;

/// Equal-weight mixture of isotropic Gaussians sharing one sigma.
struct MixtureSpec {
    std::vector<Point2> centers;
    double sigma = 0.02;

    std::size_t modes() const { return centers.size(); }
    void validate() const;

    friend bool operator==(const MixtureSpec&, const MixtureSpec&) = default;
};

/// Centers at radius * (cos 2 pi k / n, sin 2 pi k / n), k = 0..n-1.
MixtureSpec ring_mixture_spec(std::size_t n_modes = 8, double radius = 2.0, double sigma = 0.02);

/// n rows: uniform mode choice, then center + sigma * N(0, I).
Matrix sample_mixture(const MixtureSpec& spec, std::size_t n, Rng& rng);

struct LatentSpec {
    std::size_t dim = 256;

    friend bool operator==(const LatentSpec&, const LatentSpec&) = default;
};

/// n x dim i.i.d. standard normal entries.
Matrix sample_latent(const LatentSpec& spec, std::size_t n, Rng& rng);

}  // namespace dropgan
