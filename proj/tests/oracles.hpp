// SPDX-License-Identifier: Apache-2.0
//
// Independent reference computations shared by the unit and acceptance
// tests.

#pragma once

#include "dropgan/adam.hpp"
#include "dropgan/metrics.hpp"
#include "dropgan/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace oracle {

inline dropgan::Matrix randn(dropgan::Rng& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
    dropgan::Matrix m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
    return m;
}

// min over all n! matchings of the mean Euclidean distance.
inline double brute_force_wasserstein(const dropgan::Matrix& p, const dropgan::Matrix& q) {
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(p.rows()));
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double total = 0.0;
        for (Eigen::Index i = 0; i < p.rows(); ++i) {
            total += std::hypot(p(i, 0) - q(perm[static_cast<std::size_t>(i)], 0),
                                p(i, 1) - q(perm[static_cast<std::size_t>(i)], 1));
        }
        best = std::min(best, total);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best / static_cast<double>(p.rows());
}

// Q diag(l1, l2) Q^T with a random rotation and eigenvalues spread over
// several orders of magnitude.
inline dropgan::Mat2 random_spd(dropgan::Rng& rng) {
    const double angle = 2.0 * 3.141592653589793 * rng.uniform();
    dropgan::Mat2 rot;
    rot << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
    const double l1 = std::pow(10.0, -3.0 + 5.0 * rng.uniform());
    const double l2 = std::pow(10.0, -3.0 + 5.0 * rng.uniform());
    dropgan::Mat2 m = rot * dropgan::Mat2(Eigen::Vector2d(l1, l2).asDiagonal()) * rot.transpose();
    m(1, 0) = m(0, 1);
    return m;
}

// Scalar Adam written out longhand, one coordinate at a time.
struct ScalarAdam {
    double m = 0.0;
    double v = 0.0;
    double step(double theta, double g, const dropgan::AdamHyper& h, std::uint64_t t) {
        m = h.beta1 * m + (1 - h.beta1) * g;
        v = h.beta2 * v + (1 - h.beta2) * g * g;
        const double mhat = m / (1 - std::pow(h.beta1, static_cast<double>(t)));
        const double vhat = v / (1 - std::pow(h.beta2, static_cast<double>(t)));
        return theta - h.lr * mhat / (std::sqrt(vhat) + h.eps);
    }
};

}  // namespace oracle
