// SPDX-License-Identifier: Apache-2.0

#include "dropgan/datagen.hpp"

#include <cmath>
#include <numbers>

namespace dropgan {

void MixtureSpec::validate() const {
    if (centers.empty()) throw ConfigError("mixture: needs at least one center");
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ConfigError("mixture: sigma must be >= 0");
}

MixtureSpec ring_mixture_spec(std::size_t n_modes, double radius, double sigma) {
    if (n_modes == 0) throw ConfigError("ring: n_modes must be >= 1");
    if (!(radius >= 0.0)) throw ConfigError("ring: radius must be >= 0");
    MixtureSpec spec;
    spec.sigma = sigma;
    for (std::size_t k = 0; k < n_modes; ++k) {
        const double angle = 2.0 * std::numbers::pi * static_cast<double>(k) /
                             static_cast<double>(n_modes);
        spec.centers.push_back({radius * std::cos(angle), radius * std::sin(angle)});
    }
    spec.validate();
    return spec;
}

Matrix sample_mixture(const MixtureSpec& spec, std::size_t n, Rng& rng) {
    spec.validate();
    Matrix out(static_cast<Eigen::Index>(n), 2);
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        const Point2& c = spec.centers[rng.index(spec.modes())];
        out(i, 0) = c[0] + spec.sigma * rng.normal();
        out(i, 1) = c[1] + spec.sigma * rng.normal();
    }
    return out;
}

Matrix sample_latent(const LatentSpec& spec, std::size_t n, Rng& rng) {
    if (spec.dim == 0) throw ConfigError("latent: dim must be >= 1");
    Matrix out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(spec.dim));
    for (Eigen::Index i = 0; i < out.size(); ++i) out.data()[i] = rng.normal();
    return out;
}

}  // namespace dropgan
