// SPDX-License-Identifier: Apache-2.0
//
// Experiment configuration: a JSON document with nested sections. Every
// key is optional; missing keys take the defaults below. Unknown keys
// produce warnings, invalid values produce one ConfigError listing every
// problem found.
//
//   {
//     "version": 1,
//     "ensemble": {"discriminators": 1, "dropout_rate": 0.5, "batch_size": 512,
//                  "split_batch": true, "objective": "gan-nonsaturating",
//                  "aggregation": "dropout", "normalize_by_survivors": false,
//                  "steps_per_epoch": 1000, "epochs": 25,
//                  "parallel_discriminators": false,
//                  "adam": {"lr": 2e-4, "beta1": 0.5, "beta2": 0.999, "eps": 1e-8}},
//     "data": {"modes": 8, "radius": 2.0, "sigma": 0.02},   // or "centers": [[x, y], ...]
//     "latent": {"dim": 256},
//     "generator": {"hidden": [128, 128], "activation": "relu"},
//     "discriminator": {"hidden": [128, 128], "activation": "relu"},
//     "init_scale": 0.02,
//     "eval": {"every": 1000, "samples": 2048, "wasserstein_samples": 512,
//              "capture_sigmas": 3.0, "absolute_radius": 0.06, "min_count": null,
//              "kl_bound": 4.0, "kl_bins": 50, "kl_smoothing": 1e-6},
//     "checkpoint": {"keep_last": 0},
//     "output": {"directory": "runs"},
//     "seeds": [0]
//   }

#pragma once

#include "dropgan/datagen.hpp"
#include "dropgan/metrics.hpp"
#include "dropgan/trainer.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace dropgan {

inline constexpr int kConfigVersion = 1;

struct EvalSchedule {
    std::size_t every = 1000;
    std::size_t samples = 2048;
    std::size_t wasserstein_samples = 512;
    ModeStatsOptions modes{};
    HistogramGrid grid{};
};

struct ExperimentConfig {
    EnsembleConfig ensemble{};
    MixtureSpec data = ring_mixture_spec();
    Architecture arch{};
    EvalSchedule eval{};
    /// Checkpoints kept per run; 0 keeps one per epoch.
    std::size_t keep_checkpoints = 0;
    std::filesystem::path output_dir = "runs";
    std::vector<std::uint64_t> seeds{0};

    std::vector<std::string> violations() const;
    void validate() const;
};

struct ParsedConfig {
    ExperimentConfig config;
    std::vector<std::string> warnings;
};

ParsedConfig parse_config_text(const std::string& text);
ParsedConfig parse_config(const std::filesystem::path& path);

/// Canonical JSON form; parse_config_text(to_json(c)) reproduces c.
std::string config_to_json(const ExperimentConfig& config);

}  // namespace dropgan
