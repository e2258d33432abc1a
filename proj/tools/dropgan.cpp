// SPDX-License-Identifier: Apache-2.0
//
// dropgan train | sweep | plot | gradcheck | resume
//
// Exit codes: 0 success, 1 config error, 2 training abort, 3 I/O error.

#include "dropgan/checkpoint.hpp"
#include "dropgan/config.hpp"
#include "dropgan/experiment.hpp"
#include "dropgan/gradcheck_suite.hpp"
#include "dropgan/plots.hpp"
#include "dropgan/sweep.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>

namespace {

enum Exit { kOk = 0, kConfig = 1, kAbort = 2, kIo = 3 };

dropgan::ExperimentConfig load(const std::string& path, const std::optional<std::string>& out) {
    dropgan::ParsedConfig parsed = dropgan::parse_config(path);
    for (const auto& w : parsed.warnings) std::cerr << "warning: " << w << '\n';
    if (out) parsed.config.output_dir = *out;
    return parsed.config;
}

int report(const dropgan::RunResult& r) {
    if (r.completed) {
        std::cout << r.run_id << ": complete, " << r.metrics.size() << " evaluations in " << r.dir.string() << '\n';
        return kOk;
    }
    std::cerr << r.run_id << ": aborted at step " << r.failed_step.value_or(0) << ": " << r.error << '\n';
    return kAbort;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"GAN with a dropped-out discriminator ensemble on 2D Gaussian mixtures"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<std::string> run_id;
    bool quiet = false;

    auto* train = app.add_subcommand("train", "Train one run per seed");
    train->add_option("config", config_path, "Config JSON")->required()->check(CLI::ExistingFile);
    train->add_option("--seed", seed, "Override the config seed list");
    train->add_option("--out", out_dir, "Override output.directory");
    train->add_option("--run-id", run_id, "Run directory name (default <config stem>_s<seed>)");
    train->add_flag("-q,--quiet", quiet, "No per-evaluation log lines");

    std::vector<std::size_t> ks;
    std::vector<double> ds;
    std::vector<std::uint64_t> seeds;
    auto* sweep = app.add_subcommand("sweep", "K x d grid over several seeds");
    sweep->add_option("config", config_path, "Base config JSON")->required()->check(CLI::ExistingFile);
    sweep->add_option("--K", ks, "Discriminator counts")->required()->delimiter(',');
    sweep->add_option("--d", ds, "Dropout rates")->required()->delimiter(',');
    sweep->add_option("--seeds", seeds, "Seeds (default: the config's)")->delimiter(',');
    sweep->add_option("--out", out_dir, "Override output.directory");
    sweep->add_flag("-q,--quiet", quiet, "No per-evaluation log lines");

    std::string run_dir;
    auto* plot = app.add_subcommand("plot", "Write SVGs for a run directory");
    plot->add_option("run-dir", run_dir, "Run directory")->required();

    std::size_t trials = 100;
    double tol = 1e-4;
    std::uint64_t gc_seed = 0;
    double eps = 1e-5;
    auto* gradcheck = app.add_subcommand("gradcheck", "Backprop vs finite differences on random graphs");
    gradcheck->add_option("--trials", trials, "Number of random graphs");
    gradcheck->add_option("--tol", tol, "Relative error tolerance");
    gradcheck->add_option("--seed", gc_seed, "Seed");
    gradcheck->add_option("--eps", eps, "Finite-difference step");

    std::string ckpt;
    auto* resume = app.add_subcommand("resume", "Continue a run from a checkpoint");
    resume->add_option("checkpoint", ckpt, "Checkpoint file")->required();
    resume->add_flag("-q,--quiet", quiet, "No per-evaluation log lines");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfig;
    }
    std::ostream* log = quiet ? nullptr : &std::cout;

    try {
        if (train->parsed()) {
            dropgan::ExperimentConfig c = load(config_path, out_dir);
            if (seed) c.seeds = {*seed};
            if (run_id && c.seeds.size() > 1) throw dropgan::ConfigError("--run-id needs a single seed");
            int code = kOk;
            for (std::uint64_t s : c.seeds) {
                const std::string id = run_id.value_or(std::filesystem::path(config_path).stem().string() + "_s" +
                                                       std::to_string(s));
                code = std::max(code, report(dropgan::run_experiment(c, s, id, log)));
            }
            return code;
        }
        if (sweep->parsed()) {
            const dropgan::ExperimentConfig c = load(config_path, out_dir);
            const dropgan::SweepGrid grid{ks, ds, seeds.empty() ? c.seeds : seeds};
            const dropgan::SweepResult r = dropgan::run_sweep(c, grid, log);
            std::cout << dropgan::sweep_summary_text(r.cells);
            for (const auto& cell : r.cells) {
                if (cell.failed) return kAbort;
            }
            return kOk;
        }
        if (plot->parsed()) {
            for (const auto& p : dropgan::emit_plots(run_dir)) std::cout << p.string() << '\n';
            return kOk;
        }
        if (gradcheck->parsed()) {
            const auto r = dropgan::run_gradcheck_suite(trials, gc_seed, tol, eps);
            std::cout << "gradcheck: " << r.trials - r.failures << "/" << r.trials
                      << " passed, max relative error " << r.max_rel_err << " (" << r.worst << ")\n";
            return r.failures == 0 ? kOk : kAbort;
        }
        if (resume->parsed()) {
            return report(dropgan::resume_experiment(ckpt, log));
        }
    } catch (const dropgan::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const dropgan::NonFiniteError& e) {
        std::cerr << "training aborted: " << e.what() << '\n';
        return kAbort;
    } catch (const dropgan::IoError& e) {
        std::cerr << "I/O error: " << e.what() << '\n';
        return kIo;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "I/O error: " << e.what() << '\n';
        return kIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kIo;
    }
    return kOk;
}
