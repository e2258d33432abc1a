// SPDX-License-Identifier: Apache-2.0
//
// A single training run and its on-disk products.
//
// Run directory layout:
//   manifest.json          status (running / complete / aborted), seed, steps
//   metrics.csv            one MetricRecord per evaluation
//   records.csv            one StepRecord per training step
//   real.csv               the fixed reference sample used by every evaluation
//   samples/step_N.csv     generator samples drawn at evaluation step N
//   checkpoints/epoch_E.ckpt
//   plots/                 SVGs written by emit_plots

#pragma once

#include "dropgan/config.hpp"
#include "dropgan/trainer.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dropgan {

/// One evaluation. g_loss and g_grad_norm are means over the training
/// steps since the previous evaluation.
struct MetricRecord {
    std::string run_id;
    std::size_t epoch = 0;
    std::uint64_t step = 0;
    std::size_t modes_covered = 0;
    double high_quality_ratio = 0.0;
    double symmetric_kl = 0.0;
    double wasserstein = 0.0;
    double frechet_2d = 0.0;
    double intra_diversity = 0.0;
    double g_grad_norm = 0.0;
    double g_loss = 0.0;

    friend bool operator==(const MetricRecord&, const MetricRecord&) = default;
};

/// run_id,epoch,step,modes_covered,high_quality_ratio,symmetric_kl,
/// wasserstein,frechet_2d,intra_diversity,g_grad_norm,g_loss
std::string_view metrics_csv_header();
std::string format_metric_row(const MetricRecord& r);
MetricRecord parse_metric_row(std::string_view line);
std::vector<MetricRecord> read_metrics_csv(const std::filesystem::path& path);

/// step,g_loss,g_grad_norm,mask,fallback,d_loss_0..,d_grad_norm_0..
/// mask is a string of 0/1 keep bits; fallback is the picked index or -1.
std::string records_csv_header(std::size_t discriminators);
std::string format_step_row(const StepRecord& r);
StepRecord parse_step_row(std::string_view line, std::size_t discriminators);
std::vector<StepRecord> read_records_csv(const std::filesystem::path& path);

/// Evaluates the generator in `state` against the run's reference sample.
/// Deterministic in (config, seed, state.step).
MetricRecord evaluate_generator(const EnsembleState& state, const ExperimentConfig& config,
                                const Matrix& reference, std::uint64_t seed,
                                Matrix* generated = nullptr);

/// The fixed reference sample of a run (eval.samples rows).
Matrix reference_sample(const ExperimentConfig& config, std::uint64_t seed);

struct RunResult {
    std::filesystem::path dir;
    std::string run_id;
    bool completed = false;
    std::optional<std::uint64_t> failed_step;
    std::string error;
    std::vector<MetricRecord> metrics;
};

/// Trains config.ensemble for epochs * steps_per_epoch steps with `seed`
/// and writes the run directory under config.output_dir / run_id.
/// Training aborts are recorded in the manifest and returned, not thrown;
/// I/O failures throw IoError.
RunResult run_experiment(const ExperimentConfig& config, std::uint64_t seed,
                         const std::string& run_id, std::ostream* log = nullptr);

/// Continues the run that wrote `checkpoint` (inside <run>/checkpoints/).
/// Rows past the checkpoint step are dropped before training resumes.
RunResult resume_experiment(const std::filesystem::path& checkpoint, std::ostream* log = nullptr);

/// Reads the manifest and metrics of an existing run directory.
std::optional<RunResult> load_completed_run(const std::filesystem::path& dir);

}  // namespace dropgan
