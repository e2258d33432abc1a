// SPDX-License-Identifier: Apache-2.0

#include "dropgan/adam.hpp"

#include <cmath>
#include <cstring>

namespace dropgan {

AdamMoments AdamMoments::zeros_like(std::span<const Matrix> params) {
    AdamMoments m;
    for (const Matrix& p : params) {
        m.first.push_back(Matrix::Zero(p.rows(), p.cols()));
        m.second.push_back(Matrix::Zero(p.rows(), p.cols()));
    }
    return m;
}

namespace {

bool same_bits(const std::vector<Matrix>& a, const std::vector<Matrix>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].rows() != b[i].rows() || a[i].cols() != b[i].cols()) return false;
        if (a[i].size() != 0 &&
            std::memcmp(a[i].data(), b[i].data(),
                        sizeof(double) * static_cast<std::size_t>(a[i].size())) != 0) {
            return false;
        }
    }
    return true;
}

}  // namespace

bool operator==(const AdamMoments& a, const AdamMoments& b) {
    return same_bits(a.first, b.first) && same_bits(a.second, b.second);
}

void adam_update(std::span<Matrix> params, std::span<const Matrix> grads, AdamMoments& moments,
                 const AdamHyper& hyper, std::uint64_t t) {
    if (t == 0) throw Error("adam_update: step t must be >= 1");
    if (grads.size() != params.size() || moments.first.size() != params.size() ||
        moments.second.size() != params.size()) {
        throw ShapeError("adam_update: parameter, gradient and moment counts differ");
    }
    const double c1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Matrix& p = params[i];
        const Matrix& g = grads[i];
        if (g.rows() != p.rows() || g.cols() != p.cols()) {
            throw ShapeError("adam_update: gradient " + shape_str(g) + " for parameter " +
                             shape_str(p));
        }
        auto m = moments.first[i].array();
        auto v = moments.second[i].array();
        m = hyper.beta1 * m + (1.0 - hyper.beta1) * g.array();
        v = hyper.beta2 * v + (1.0 - hyper.beta2) * g.array().square();
        p.array() -= hyper.lr * (m / c1) / ((v / c2).sqrt() + hyper.eps);
    }
}

}  // namespace dropgan
