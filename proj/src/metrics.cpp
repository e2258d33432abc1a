// SPDX-License-Identifier: Apache-2.0

#include "dropgan/metrics.hpp"

#include "dropgan/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace dropgan {

namespace {

void require_2d(const Matrix& m, const char* what) {
    if (m.cols() != 2) {
        throw ShapeError(std::string(what) + ": expected n x 2 samples, got " + shape_str(m));
    }
}

}  // namespace

ModeStats mode_stats(const Matrix& samples, const MixtureSpec& spec,
                     const ModeStatsOptions& options) {
    require_2d(samples, "mode_stats");
    spec.validate();
    if (samples.rows() == 0) throw Error("mode_stats: no samples");
    const std::size_t n = static_cast<std::size_t>(samples.rows());
    const std::size_t modes = spec.modes();
    const double radius =
        spec.sigma > 0.0 ? options.capture_sigmas * spec.sigma : options.absolute_radius;
    const double radius_sq = radius * radius;
    const std::size_t min_count =
        options.min_count.value_or(std::max<std::size_t>(1, n / (20 * modes)));

    ModeStats stats;
    stats.per_mode_counts.assign(modes, 0);
    std::size_t good = 0;
    for (Eigen::Index i = 0; i < samples.rows(); ++i) {
        std::size_t best = 0;
        double best_sq = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < modes; ++k) {
            const double dx = samples(i, 0) - spec.centers[k][0];
            const double dy = samples(i, 1) - spec.centers[k][1];
            const double sq = dx * dx + dy * dy;
            if (sq < best_sq) {
                best_sq = sq;
                best = k;
            }
        }
        if (best_sq <= radius_sq) {
            ++good;
            ++stats.per_mode_counts[best];
        }
    }
    stats.high_quality_ratio = static_cast<double>(good) / static_cast<double>(n);
    stats.modes_covered = static_cast<std::size_t>(
        std::count_if(stats.per_mode_counts.begin(), stats.per_mode_counts.end(),
                      [&](std::size_t c) { return c >= min_count; }));
    return stats;
}

namespace {

std::vector<double> histogram(const Matrix& s, const HistogramGrid& grid) {
    const std::size_t b = grid.bins;
    const double width = (grid.upper - grid.lower) / static_cast<double>(b);
    const auto bin_of = [&](double v) {
        const double f = std::floor((v - grid.lower) / width);
        if (!(f >= 0.0)) return std::size_t{0};
        return std::min(static_cast<std::size_t>(f), b - 1);
    };
    std::vector<double> h(b * b, grid.smoothing);
    for (Eigen::Index i = 0; i < s.rows(); ++i) h[bin_of(s(i, 0)) * b + bin_of(s(i, 1))] += 1.0;
    const double total = static_cast<double>(s.rows()) + grid.smoothing * static_cast<double>(b * b);
    for (double& v : h) v /= total;
    return h;
}

}  // namespace

double symmetric_kl(const Matrix& p_samples, const Matrix& q_samples, const HistogramGrid& grid) {
    require_2d(p_samples, "symmetric_kl");
    require_2d(q_samples, "symmetric_kl");
    if (grid.bins == 0) throw Error("symmetric_kl: grid needs at least one bin");
    if (!(grid.upper > grid.lower)) throw Error("symmetric_kl: grid bounds are empty");
    if (!(grid.smoothing > 0.0)) throw Error("symmetric_kl: smoothing must be positive");
    if (p_samples.rows() == 0 || q_samples.rows() == 0) throw Error("symmetric_kl: empty sample set");
    const auto p = histogram(p_samples, grid);
    const auto q = histogram(q_samples, grid);
    // KL(P||Q) + KL(Q||P) = sum (p - q)(log p - log q), symmetric term by term.
    double total = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        total += (p[i] - q[i]) * (std::log(p[i]) - std::log(q[i]));
    }
    return total;
}

std::vector<std::size_t> min_cost_assignment(const Matrix& cost) {
    const auto n = static_cast<std::size_t>(cost.rows());
    if (cost.cols() != cost.rows()) throw ShapeError("min_cost_assignment: cost must be square");
    // Shortest augmenting paths with row/column potentials, 1-based.
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
    std::vector<double> minv(n + 1);
    std::vector<char> used(n + 1);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::fill(minv.begin(), minv.end(), inf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = p[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(static_cast<Eigen::Index>(i0 - 1),
                                        static_cast<Eigen::Index>(j - 1)) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<std::size_t> assignment(n);
    for (std::size_t j = 1; j <= n; ++j) assignment[p[j] - 1] = j - 1;
    return assignment;
}

namespace {

double sliced_wasserstein(const Matrix& p, const Matrix& q, const WassersteinOptions& options) {
    const Eigen::Index n = p.rows();
    Rng rng(options.seed);
    std::vector<double> a(static_cast<std::size_t>(n)), b(static_cast<std::size_t>(n));
    double total = 0.0;
    for (std::size_t k = 0; k < options.projections; ++k) {
        const double angle = 2.0 * std::numbers::pi * rng.uniform();
        const double c = std::cos(angle), s = std::sin(angle);
        for (Eigen::Index i = 0; i < n; ++i) {
            a[static_cast<std::size_t>(i)] = c * p(i, 0) + s * p(i, 1);
            b[static_cast<std::size_t>(i)] = c * q(i, 0) + s * q(i, 1);
        }
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        double w = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) w += std::abs(a[i] - b[i]);
        total += w / static_cast<double>(n);
    }
    return total / static_cast<double>(options.projections);
}

}  // namespace

double wasserstein(const Matrix& p_samples, const Matrix& q_samples,
                   const WassersteinOptions& options) {
    require_2d(p_samples, "wasserstein");
    require_2d(q_samples, "wasserstein");
    const Eigen::Index n = std::min(p_samples.rows(), q_samples.rows());
    if (n == 0) throw Error("wasserstein: empty sample set");
    const Matrix p = p_samples.topRows(n);
    const Matrix q = q_samples.topRows(n);
    if (static_cast<std::size_t>(n) > kExactWassersteinCap) {
        if (!options.allow_approximation) {
            throw Error("wasserstein: " + std::to_string(n) + " points exceed the exact cap of " +
                        std::to_string(kExactWassersteinCap) +
                        "; enable the sliced approximation explicitly");
        }
        if (options.projections == 0) throw Error("wasserstein: need at least one projection");
        return sliced_wasserstein(p, q, options);
    }
    Matrix cost(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            cost(i, j) = std::hypot(p(i, 0) - q(j, 0), p(i, 1) - q(j, 1));
        }
    }
    const auto assignment = min_cost_assignment(cost);
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        total += cost(i, static_cast<Eigen::Index>(assignment[static_cast<std::size_t>(i)]));
    }
    return total / static_cast<double>(n);
}

Gaussian2Fit fit_gaussian2(const Matrix& samples) {
    require_2d(samples, "fit_gaussian2");
    if (samples.rows() < 2) throw Error("fit_gaussian2: need at least 2 samples");
    Gaussian2Fit fit;
    fit.mean = samples.colwise().mean().transpose();
    const Matrix centered = samples.rowwise() - fit.mean.transpose();
    fit.cov = (centered.transpose() * centered) / static_cast<double>(samples.rows() - 1);
    fit.cov(1, 0) = fit.cov(0, 1);
    return fit;
}

Mat2 spd2_sqrt(const Mat2& m) {
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    if (std::abs(m(0, 1) - m(1, 0)) > 1e-12 * scale) {
        throw Error("spd2_sqrt: matrix is not symmetric");
    }
    const double off = 0.5 * (m(0, 1) + m(1, 0));
    const double tr = m(0, 0) + m(1, 1);
    const double half_gap = 0.5 * (m(0, 0) - m(1, 1));
    const double min_eig = 0.5 * tr - std::sqrt(half_gap * half_gap + off * off);
    if (min_eig < -1e-10) {
        throw Error("spd2_sqrt: matrix has a negative eigenvalue (" + std::to_string(min_eig) + ")");
    }
    const double det = std::max(0.0, m(0, 0) * m(1, 1) - off * off);
    const double s = std::sqrt(det);
    const double t = std::sqrt(std::max(0.0, tr + 2.0 * s));
    if (t == 0.0) return Mat2::Zero();
    Mat2 out;
    out << (m(0, 0) + s) / t, off / t, off / t, (m(1, 1) + s) / t;
    return out;
}

double frechet_distance(const Gaussian2Fit& a, const Gaussian2Fit& b) {
    const Mat2 root_a = spd2_sqrt(a.cov);
    Mat2 inner = root_a * b.cov * root_a;
    inner = 0.5 * (inner + inner.transpose()).eval();
    const double cross = spd2_sqrt(inner).trace();
    const double d = (a.mean - b.mean).squaredNorm() + a.cov.trace() + b.cov.trace() - 2.0 * cross;
    return std::max(0.0, d);
}

double frechet_2d(const Matrix& real, const Matrix& fake) {
    return frechet_distance(fit_gaussian2(real), fit_gaussian2(fake));
}

double intra_diversity(const Matrix& generated) {
    require_2d(generated, "intra_diversity");
    const Eigen::Index n = generated.rows();
    if (n < 4 || n % 2 != 0) {
        throw Error("intra_diversity: need an even number (>= 4) of samples, got " +
                    std::to_string(n));
    }
    return frechet_2d(generated.topRows(n / 2), generated.bottomRows(n / 2));
}

ProtocolStats protocol_min_mean_cumulative(std::span<const double> per_epoch) {
    if (per_epoch.empty()) throw Error("protocol: no per-epoch values");
    ProtocolStats s;
    s.min = *std::min_element(per_epoch.begin(), per_epoch.end());
    s.cumulative = std::accumulate(per_epoch.begin(), per_epoch.end(), 0.0);
    s.mean = s.cumulative / static_cast<double>(per_epoch.size());
    return s;
}

}  // namespace dropgan
