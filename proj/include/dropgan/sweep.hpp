// SPDX-License-Identifier: Apache-2.0
//
// K x d grids over several seeds, summarised per cell.

#pragma once

#include "dropgan/experiment.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace dropgan {

struct SweepGrid {
    std::vector<std::size_t> discriminators;
    std::vector<double> dropout_rates;
    std::vector<std::uint64_t> seeds;
};

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;  // sample standard deviation, 0 for a single seed
};

/// min / mean / cumulative over evaluation points, then mean +- std over seeds.
struct ProtocolSummary {
    MeanStd min;
    MeanStd mean;
    MeanStd cumulative;
};

struct SweepCell {
    std::size_t discriminators = 0;
    double dropout_rate = 0.0;
    std::vector<std::string> run_ids;
    std::size_t completed_seeds = 0;
    bool failed = false;
    std::vector<std::string> errors;
    ProtocolSummary frechet;
    ProtocolSummary intra;
    bool best_for_k = false;  // lowest mean min-frechet within its K
    bool best_overall = false;
};

struct SweepResult {
    std::vector<SweepCell> cells;  // K-major, grid order
    std::vector<RunResult> runs;
};

/// "K8_d0.5_s1"
std::string sweep_run_id(std::size_t k, double d, std::uint64_t seed);

/// Runs (or reuses) one experiment per (K, d, seed) under base.output_dir,
/// then writes sweep_summary.csv and sweep_summary.txt there. A run
/// directory is reused when its manifest says complete and its config.json
/// matches the cell's config.
SweepResult run_sweep(const ExperimentConfig& base, const SweepGrid& grid, std::ostream* log = nullptr);

/// Summary from already computed per-seed metrics; `runs` may hold failures.
SweepCell summarize_cell(std::size_t k, double d, const std::vector<RunResult>& runs);
void mark_best(std::vector<SweepCell>& cells);

std::string sweep_summary_csv(const std::vector<SweepCell>& cells);
/// Aligned table; _x_ marks the best cell per K, **x** the best overall.
std::string sweep_summary_text(const std::vector<SweepCell>& cells);

}  // namespace dropgan
