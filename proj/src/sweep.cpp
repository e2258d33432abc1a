// SPDX-License-Identifier: Apache-2.0

#include "dropgan/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

namespace dropgan {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v, const char* spec = "%.17g") {
    char buf[48];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

MeanStd mean_std(const std::vector<double>& xs) {
    MeanStd r;
    if (xs.empty()) return r;
    double s = 0.0;
    for (double x : xs) s += x;
    r.mean = s / static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double v = 0.0;
        for (double x : xs) v += (x - r.mean) * (x - r.mean);
        r.std = std::sqrt(v / static_cast<double>(xs.size() - 1));
    }
    return r;
}

ProtocolSummary summarize(const std::vector<ProtocolStats>& per_seed) {
    std::vector<double> mins, means, cums;
    for (const auto& p : per_seed) {
        mins.push_back(p.min);
        means.push_back(p.mean);
        cums.push_back(p.cumulative);
    }
    return {mean_std(mins), mean_std(means), mean_std(cums)};
}

ExperimentConfig cell_config(const ExperimentConfig& base, std::size_t k, double d, std::uint64_t seed) {
    ExperimentConfig c = base;
    c.ensemble.discriminators = k;
    c.ensemble.dropout_rate = d;
    c.ensemble.seed = seed;
    c.seeds = {seed};
    return c;
}

bool reusable(const fs::path& dir, const ExperimentConfig& config) {
    std::ifstream in(dir / "config.json", std::ios::binary);
    if (!in) return false;
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str() == config_to_json(config) + "\n";
}

}  // namespace

std::string sweep_run_id(std::size_t k, double d, std::uint64_t seed) {
    return "K" + std::to_string(k) + "_d" + fmt(d, "%g") + "_s" + std::to_string(seed);
}

SweepCell summarize_cell(std::size_t k, double d, const std::vector<RunResult>& runs) {
    SweepCell cell;
    cell.discriminators = k;
    cell.dropout_rate = d;
    std::vector<ProtocolStats> fid, intra;
    for (const auto& r : runs) {
        cell.run_ids.push_back(r.run_id);
        if (!r.completed || r.metrics.empty()) {
            cell.failed = true;
            cell.errors.push_back(r.run_id + ": " + (r.error.empty() ? "no metrics" : r.error));
            continue;
        }
        std::vector<double> f, i;
        for (const auto& m : r.metrics) {
            f.push_back(m.frechet_2d);
            i.push_back(m.intra_diversity);
        }
        fid.push_back(protocol_min_mean_cumulative(f));
        intra.push_back(protocol_min_mean_cumulative(i));
        ++cell.completed_seeds;
    }
    if (cell.completed_seeds == 0) cell.failed = true;
    cell.frechet = summarize(fid);
    cell.intra = summarize(intra);
    return cell;
}

void mark_best(std::vector<SweepCell>& cells) {
    double global = std::numeric_limits<double>::infinity();
    SweepCell* global_cell = nullptr;
    std::vector<std::size_t> ks;
    for (auto& c : cells) {
        c.best_for_k = c.best_overall = false;
        if (std::find(ks.begin(), ks.end(), c.discriminators) == ks.end()) ks.push_back(c.discriminators);
    }
    for (std::size_t k : ks) {
        double best = std::numeric_limits<double>::infinity();
        SweepCell* best_cell = nullptr;
        for (auto& c : cells) {
            if (c.discriminators != k || c.failed) continue;
            if (c.frechet.min.mean < best) {
                best = c.frechet.min.mean;
                best_cell = &c;
            }
        }
        if (best_cell != nullptr) {
            best_cell->best_for_k = true;
            if (best < global) {
                global = best;
                global_cell = best_cell;
            }
        }
    }
    if (global_cell != nullptr) global_cell->best_overall = true;
}

std::string sweep_summary_csv(const std::vector<SweepCell>& cells) {
    std::string out =
        "K,d,seeds_completed,failed,fid_min_mean,fid_min_std,fid_mean_mean,fid_mean_std,fid_cum_mean,"
        "fid_cum_std,intra_min_mean,intra_min_std,intra_mean_mean,intra_mean_std,intra_cum_mean,intra_cum_std,"
        "best_for_k,best_overall\n";
    for (const auto& c : cells) {
        out += std::to_string(c.discriminators) + "," + fmt(c.dropout_rate, "%g") + "," +
               std::to_string(c.completed_seeds) + "," + (c.failed ? "1" : "0");
        for (const ProtocolSummary* p : {&c.frechet, &c.intra}) {
            for (const MeanStd* m : {&p->min, &p->mean, &p->cumulative}) {
                out += "," + fmt(m->mean) + "," + fmt(m->std);
            }
        }
        out += std::string(",") + (c.best_for_k ? "1" : "0") + "," + (c.best_overall ? "1" : "0") + "\n";
    }
    return out;
}

std::string sweep_summary_text(const std::vector<SweepCell>& cells) {
    const std::vector<std::string> head = {"K", "d", "seeds", "min FD", "mean FD", "cum FD",
                                           "min intra", "mean intra", "cum intra"};
    std::vector<std::vector<std::string>> rows{head};
    const auto pm = [](const MeanStd& m) { return fmt(m.mean, "%.4f") + " +- " + fmt(m.std, "%.4f"); };
    for (const auto& c : cells) {
        std::vector<std::string> row = {std::to_string(c.discriminators), fmt(c.dropout_rate, "%g"),
                                        std::to_string(c.completed_seeds) + "/" + std::to_string(c.run_ids.size())};
        if (c.completed_seeds == 0) {
            for (int i = 0; i < 6; ++i) row.push_back("failed");
        } else {
            std::string best = pm(c.frechet.min);
            if (c.best_for_k) best = "_" + best + "_";
            if (c.best_overall) best = "**" + best + "**";
            if (c.failed) best += " (partial)";
            row.insert(row.end(), {best, pm(c.frechet.mean), pm(c.frechet.cumulative), pm(c.intra.min),
                                   pm(c.intra.mean), pm(c.intra.cumulative)});
        }
        rows.push_back(std::move(row));
    }
    std::vector<std::size_t> width(head.size(), 0);
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());
    }
    std::string out;
    for (std::size_t ri = 0; ri < rows.size(); ++ri) {
        for (std::size_t i = 0; i < rows[ri].size(); ++i) {
            if (i > 0) out += "  ";
            out += rows[ri][i] + std::string(width[i] - rows[ri][i].size(), ' ');
        }
        while (!out.empty() && out.back() == ' ') out.pop_back();
        out += "\n";
        if (ri == 0) {
            std::size_t total = 0;
            for (std::size_t w : width) total += w;
            out += std::string(total + 2 * (width.size() - 1), '-') + "\n";
        }
    }
    return out;
}

SweepResult run_sweep(const ExperimentConfig& base, const SweepGrid& grid, std::ostream* log) {
    if (grid.discriminators.empty() || grid.dropout_rates.empty() || grid.seeds.empty()) {
        throw ConfigError("sweep: K, d and seed lists must be non-empty");
    }
    SweepResult result;
    for (std::size_t k : grid.discriminators) {
        for (double d : grid.dropout_rates) {
            std::vector<RunResult> runs;
            for (std::uint64_t seed : grid.seeds) {
                const std::string id = sweep_run_id(k, d, seed);
                const ExperimentConfig config = cell_config(base, k, d, seed);
                const fs::path dir = base.output_dir / id;
                RunResult run;
                try {
                    std::optional<RunResult> done;
                    if (reusable(dir, config)) done = load_completed_run(dir);
                    if (done) {
                        if (log != nullptr) *log << id << ": complete, skipped\n";
                        run = std::move(*done);
                    } else {
                        run = run_experiment(config, seed, id, log);
                    }
                } catch (const ConfigError& e) {
                    run.run_id = id;
                    run.dir = dir;
                    run.error = e.what();
                }
                if (log != nullptr && !run.completed) *log << id << ": failed: " << run.error << '\n';
                runs.push_back(run);
                result.runs.push_back(std::move(run));
            }
            result.cells.push_back(summarize_cell(k, d, runs));
        }
    }
    mark_best(result.cells);

    std::error_code ec;
    fs::create_directories(base.output_dir, ec);
    for (const auto& [name, body] : {std::pair{"sweep_summary.csv", sweep_summary_csv(result.cells)},
                                     std::pair{"sweep_summary.txt", sweep_summary_text(result.cells)}}) {
        std::ofstream out(base.output_dir / name, std::ios::binary | std::ios::trunc);
        out << body;
        if (!out) throw IoError(std::string("sweep: failed writing ") + name);
    }
    return result;
}

}  // namespace dropgan
