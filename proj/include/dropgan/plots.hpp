// SPDX-License-Identifier: Apache-2.0
//
// Static SVG output for a run directory.

#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "dropgan/matrix.hpp"

namespace dropgan {

/// Real points in red, generated points in blue, on a fixed [-3, 3]^2 frame.
std::string scatter_svg(const Matrix& real, const Matrix& generated, const std::string& title);

/// Polyline chart of (x, y) pairs with labelled axes.
std::string line_chart_svg(const std::vector<std::pair<double, double>>& points,
                           const std::string& title, const std::string& x_label,
                           const std::string& y_label);

/// Writes plots/scatter_step_N.svg for every metrics row and one chart per
/// curve (wasserstein, symmetric_kl, frechet_2d, g_grad_norm) against
/// epoch. Throws IoError before writing anything if inputs are missing.
std::vector<std::filesystem::path> emit_plots(const std::filesystem::path& run_dir);

}  // namespace dropgan
