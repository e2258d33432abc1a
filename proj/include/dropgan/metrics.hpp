// SPDX-License-Identifier: Apache-2.0
//
// Sample-based distances between 2D point sets, mode coverage, and the
// min / mean / cumulative summaries taken over a run's evaluations.

#pragma once

#include "dropgan/datagen.hpp"
#include "dropgan/matrix.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace dropgan {

struct ModeStats {
    std::size_t modes_covered = 0;
    /// Fraction of samples within the capture radius of their nearest
    /// center; a proxy for "not a noisy sample".
    double high_quality_ratio = 0.0;
    std::vector<std::size_t> per_mode_counts;  // high-quality samples per mode
};

struct ModeStatsOptions {
    double capture_sigmas = 3.0;
    /// Used instead of capture_sigmas * sigma when the mixture has sigma 0.
    double absolute_radius = 0.06;
    /// Minimum high-quality hits for a mode to count as covered; unset
    /// means max(1, n / (20 * n_modes)).
    std::optional<std::size_t> min_count;
};

ModeStats mode_stats(const Matrix& samples, const MixtureSpec& spec,
                     const ModeStatsOptions& options = {});

struct HistogramGrid {
    double lower = -4.0;
    double upper = 4.0;
    std::size_t bins = 50;  // per axis
    double smoothing = 1e-6;
};

/// KL(P||Q) + KL(Q||P) between smoothed 2D histograms; samples outside the
/// grid are clipped into the edge bins.
double symmetric_kl(const Matrix& p_samples, const Matrix& q_samples,
                    const HistogramGrid& grid = {});

inline constexpr std::size_t kExactWassersteinCap = 1024;

struct WassersteinOptions {
    /// Allow the sliced approximation when a set exceeds the exact cap.
    bool allow_approximation = false;
    std::size_t projections = 64;
    std::uint64_t seed = 0;
};

/// Exact 1-Wasserstein (Euclidean cost) via minimum-cost perfect matching,
/// divided by n. Unequal sets are truncated to the smaller size.
double wasserstein(const Matrix& p_samples, const Matrix& q_samples,
                   const WassersteinOptions& options = {});

/// Minimum-cost assignment on a square cost matrix; result[i] is the
/// column matched to row i.
std::vector<std::size_t> min_cost_assignment(const Matrix& cost);

using Mat2 = Eigen::Matrix2d;

struct Gaussian2Fit {
    Eigen::Vector2d mean;
    Mat2 cov;
};

/// Sample mean and unbiased covariance; needs >= 2 rows.
Gaussian2Fit fit_gaussian2(const Matrix& samples);

/// Symmetric PSD square root of a 2x2 symmetric PSD matrix.
Mat2 spd2_sqrt(const Mat2& m);

/// |mu1 - mu2|^2 + tr(C1 + C2 - 2 (C1^{1/2} C2 C1^{1/2})^{1/2})
double frechet_distance(const Gaussian2Fit& a, const Gaussian2Fit& b);
double frechet_2d(const Matrix& real, const Matrix& fake);

/// Fréchet distance between the first and second half of the rows.
double intra_diversity(const Matrix& generated);

struct ProtocolStats {
    double min = 0.0;
    double mean = 0.0;
    double cumulative = 0.0;
};

ProtocolStats protocol_min_mean_cumulative(std::span<const double> per_epoch);

}  // namespace dropgan
