// SPDX-License-Identifier: Apache-2.0

#include "dropgan/experiment.hpp"

#include "dropgan/checkpoint.hpp"
#include "dropgan/plots.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

namespace dropgan {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        out.push_back(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

double to_double(std::string_view s) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw IoError("csv: '" + std::string(s) + "' is not a number");
    }
    return v;
}

template <typename T>
T to_integer(std::string_view s) {
    T v{};
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw IoError("csv: '" + std::string(s) + "' is not an integer");
    }
    return v;
}

std::vector<std::string> read_lines(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) lines.push_back(std::move(line));
    }
    return lines;
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << content;
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

void append_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::app);
    if (!out) throw IoError("cannot append to '" + path.string() + "'");
    out << content;
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

std::string samples_csv(const Matrix& m) {
    std::string out = "x,y\n";
    for (Eigen::Index i = 0; i < m.rows(); ++i) out += fmt(m(i, 0)) + "," + fmt(m(i, 1)) + "\n";
    return out;
}

std::string step_tag(std::uint64_t step) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%08llu", static_cast<unsigned long long>(step));
    return buf;
}

}  // namespace

std::string_view metrics_csv_header() {
    return "run_id,epoch,step,modes_covered,high_quality_ratio,symmetric_kl,wasserstein,"
           "frechet_2d,intra_diversity,g_grad_norm,g_loss";
}

std::string format_metric_row(const MetricRecord& r) {
    if (r.run_id.find_first_of(",\n\"") != std::string::npos) {
        throw IoError("metrics: run id '" + r.run_id + "' contains CSV metacharacters");
    }
    std::ostringstream os;
    os << r.run_id << ',' << r.epoch << ',' << r.step << ',' << r.modes_covered << ','
       << fmt(r.high_quality_ratio) << ',' << fmt(r.symmetric_kl) << ',' << fmt(r.wasserstein)
       << ',' << fmt(r.frechet_2d) << ',' << fmt(r.intra_diversity) << ',' << fmt(r.g_grad_norm)
       << ',' << fmt(r.g_loss);
    return os.str();
}

MetricRecord parse_metric_row(std::string_view line) {
    const auto f = split_csv(line);
    if (f.size() != 11) {
        throw IoError("metrics: expected 11 columns, found " + std::to_string(f.size()));
    }
    MetricRecord r;
    r.run_id = std::string(f[0]);
    r.epoch = to_integer<std::size_t>(f[1]);
    r.step = to_integer<std::uint64_t>(f[2]);
    r.modes_covered = to_integer<std::size_t>(f[3]);
    r.high_quality_ratio = to_double(f[4]);
    r.symmetric_kl = to_double(f[5]);
    r.wasserstein = to_double(f[6]);
    r.frechet_2d = to_double(f[7]);
    r.intra_diversity = to_double(f[8]);
    r.g_grad_norm = to_double(f[9]);
    r.g_loss = to_double(f[10]);
    return r;
}

std::vector<MetricRecord> read_metrics_csv(const fs::path& path) {
    const auto lines = read_lines(path);
    if (lines.empty() || lines.front() != metrics_csv_header()) {
        throw IoError("metrics: '" + path.string() + "' has a missing or unexpected header");
    }
    std::vector<MetricRecord> out;
    for (std::size_t i = 1; i < lines.size(); ++i) out.push_back(parse_metric_row(lines[i]));
    return out;
}

std::string records_csv_header(std::size_t k) {
    std::string h = "step,g_loss,g_grad_norm,mask,fallback";
    for (std::size_t i = 0; i < k; ++i) h += ",d_loss_" + std::to_string(i);
    for (std::size_t i = 0; i < k; ++i) h += ",d_grad_norm_" + std::to_string(i);
    return h;
}

std::string format_step_row(const StepRecord& r) {
    std::string mask;
    for (auto b : r.mask.bits) mask.push_back(b ? '1' : '0');
    std::string out = std::to_string(r.step) + "," + fmt(r.g_loss) + "," + fmt(r.g_grad_norm) +
                      "," + mask + "," +
                      (r.mask.fallback_index ? std::to_string(*r.mask.fallback_index) : "-1");
    for (double v : r.d_losses) out += "," + fmt(v);
    for (double v : r.d_grad_norms) out += "," + fmt(v);
    return out;
}

StepRecord parse_step_row(std::string_view line, std::size_t k) {
    const auto f = split_csv(line);
    if (f.size() != 5 + 2 * k) throw IoError("records: unexpected column count");
    StepRecord r;
    r.step = to_integer<std::uint64_t>(f[0]);
    r.g_loss = to_double(f[1]);
    r.g_grad_norm = to_double(f[2]);
    for (char c : f[3]) r.mask.bits.push_back(c == '1' ? 1 : 0);
    const auto fb = to_integer<long long>(f[4]);
    if (fb >= 0) r.mask.fallback_index = static_cast<std::size_t>(fb);
    for (std::size_t i = 0; i < k; ++i) r.d_losses.push_back(to_double(f[5 + i]));
    for (std::size_t i = 0; i < k; ++i) r.d_grad_norms.push_back(to_double(f[5 + k + i]));
    return r;
}

std::vector<StepRecord> read_records_csv(const fs::path& path) {
    const auto lines = read_lines(path);
    if (lines.empty()) throw IoError("records: '" + path.string() + "' is empty");
    const auto cols = split_csv(lines.front()).size();
    if (cols < 5 || (cols - 5) % 2 != 0) throw IoError("records: malformed header");
    const std::size_t k = (cols - 5) / 2;
    if (lines.front() != records_csv_header(k)) throw IoError("records: unexpected header");
    std::vector<StepRecord> out;
    for (std::size_t i = 1; i < lines.size(); ++i) out.push_back(parse_step_row(lines[i], k));
    return out;
}

Matrix reference_sample(const ExperimentConfig& config, std::uint64_t seed) {
    Rng rng = Rng::stream(seed, streams::kEval);
    return sample_mixture(config.data, config.eval.samples, rng);
}

MetricRecord evaluate_generator(const EnsembleState& state, const ExperimentConfig& config,
                                const Matrix& reference, std::uint64_t seed, Matrix* generated) {
    Rng rng = Rng::stream(mix_seed(seed) ^ mix_seed(state.step), streams::kEval);
    const std::size_t n = config.eval.samples;
    const Matrix z = sample_latent(config.arch.latent, 2 * n, rng);
    const Matrix all = generator_forward(config.arch.generator, state.generator, z);
    const Matrix gen = all.topRows(static_cast<Eigen::Index>(n));

    MetricRecord r;
    r.step = state.step;
    const std::size_t spe = std::max<std::size_t>(1, config.ensemble.steps_per_epoch);
    r.epoch = static_cast<std::size_t>((state.step + spe - 1) / spe);
    const ModeStats ms = mode_stats(gen, config.data, config.eval.modes);
    r.modes_covered = ms.modes_covered;
    r.high_quality_ratio = ms.high_quality_ratio;
    r.symmetric_kl = symmetric_kl(reference, gen, config.eval.grid);
    const auto w = static_cast<Eigen::Index>(std::min(config.eval.wasserstein_samples, n));
    r.wasserstein = wasserstein(reference.topRows(w), gen.topRows(w));
    r.frechet_2d = frechet_2d(reference, gen);
    r.intra_diversity = intra_diversity(all);
    if (generated != nullptr) *generated = gen;
    return r;
}

namespace {

void write_manifest(const fs::path& dir, const std::string& run_id, std::uint64_t seed,
                    const std::string& status, std::uint64_t steps,
                    const std::optional<std::uint64_t>& failed_step, const std::string& error) {
    json m = {{"run_id", run_id},
              {"seed", seed},
              {"status", status},
              {"steps_completed", steps},
              {"failed_step", failed_step ? json(*failed_step) : json(nullptr)},
              {"error", error}};
    write_file(dir / "manifest.json", m.dump(2) + "\n");
}

struct RunContext {
    ExperimentConfig config;
    std::uint64_t seed = 0;
    std::string run_id;
    fs::path dir;
    std::string config_json;
};

void prune_checkpoints(const fs::path& dir, std::size_t keep) {
    if (keep == 0) return;
    std::vector<fs::path> ckpts;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.path().extension() == ".ckpt") ckpts.push_back(e.path());
    }
    std::sort(ckpts.begin(), ckpts.end());
    while (ckpts.size() > keep) {
        fs::remove(ckpts.front());
        ckpts.erase(ckpts.begin());
    }
}

RunResult drive(const RunContext& ctx, EnsembleState state, std::vector<StepRecord> pending,
                std::ostream* log) {
    const ExperimentConfig& c = ctx.config;
    const std::uint64_t total = static_cast<std::uint64_t>(c.ensemble.epochs) * c.ensemble.steps_per_epoch;
    const Matrix reference = reference_sample(c, ctx.seed);
    write_file(ctx.dir / "real.csv", samples_csv(reference));

    RunResult result;
    result.dir = ctx.dir;
    result.run_id = ctx.run_id;
    write_manifest(ctx.dir, ctx.run_id, ctx.seed, "running", state.step, std::nullopt, "");

    const auto evaluate_now = [&] {
        Matrix gen;
        MetricRecord m = evaluate_generator(state, c, reference, ctx.seed, &gen);
        m.run_id = ctx.run_id;
        if (!pending.empty()) {
            double gl = 0.0, gn = 0.0;
            for (const auto& r : pending) {
                gl += r.g_loss;
                gn += r.g_grad_norm;
            }
            m.g_loss = gl / static_cast<double>(pending.size());
            m.g_grad_norm = gn / static_cast<double>(pending.size());
        }
        pending.clear();
        append_file(ctx.dir / "metrics.csv", format_metric_row(m) + "\n");
        write_file(ctx.dir / "samples" / ("step_" + step_tag(state.step) + ".csv"), samples_csv(gen));
        if (log != nullptr) {
            *log << ctx.run_id << " step " << m.step << " modes " << m.modes_covered << " hq "
                 << m.high_quality_ratio << " W " << m.wasserstein << " KL " << m.symmetric_kl
                 << " FD " << m.frechet_2d << '\n';
            log->flush();
        }
    };

    std::string batch;
    try {
        while (state.step < total) {
            StepRecord rec = train_step(state, c.data, c.ensemble, c.arch);
            batch += format_step_row(rec) + "\n";
            pending.push_back(std::move(rec));
            const bool eval_due = state.step % c.eval.every == 0 || state.step == total;
            const bool epoch_end = state.step % c.ensemble.steps_per_epoch == 0;
            if (eval_due || epoch_end) {
                append_file(ctx.dir / "records.csv", batch);
                batch.clear();
            }
            if (eval_due) evaluate_now();
            if (epoch_end) {
                const auto epoch = state.step / c.ensemble.steps_per_epoch;
                char name[32];
                std::snprintf(name, sizeof name, "epoch_%04llu.ckpt", static_cast<unsigned long long>(epoch));
                checkpoint_save(state, ctx.config_json, ctx.dir / "checkpoints" / name);
                prune_checkpoints(ctx.dir / "checkpoints", c.keep_checkpoints);
            }
        }
        if (!batch.empty()) append_file(ctx.dir / "records.csv", batch);
        result.completed = true;
    } catch (const TrainingAbort& e) {
        if (!batch.empty()) append_file(ctx.dir / "records.csv", batch);
        result.failed_step = e.step();
        result.error = e.what();
    }

    result.metrics = read_metrics_csv(ctx.dir / "metrics.csv");
    if (!result.metrics.empty()) emit_plots(ctx.dir);
    write_manifest(ctx.dir, ctx.run_id, ctx.seed, result.completed ? "complete" : "aborted",
                   state.step, result.failed_step, result.error);
    return result;
}

RunContext make_context(const ExperimentConfig& config, std::uint64_t seed, const std::string& run_id) {
    if (run_id.empty() || run_id.find_first_of("/\\,\n\"") != std::string::npos) {
        throw ConfigError("run id '" + run_id + "' must be non-empty without path or CSV separators");
    }
    RunContext ctx;
    ctx.config = config;
    ctx.config.seeds = {seed};
    ctx.config.ensemble.seed = seed;
    ctx.config.validate();
    ctx.seed = seed;
    ctx.run_id = run_id;
    ctx.dir = config.output_dir / run_id;
    ctx.config_json = config_to_json(ctx.config);
    return ctx;
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& config, std::uint64_t seed,
                         const std::string& run_id, std::ostream* log) {
    const RunContext ctx = make_context(config, seed, run_id);
    std::error_code ec;
    fs::remove_all(ctx.dir, ec);
    fs::create_directories(ctx.dir / "checkpoints", ec);
    fs::create_directories(ctx.dir / "samples", ec);
    if (ec || !fs::is_directory(ctx.dir)) {
        throw IoError("cannot create run directory '" + ctx.dir.string() + "'");
    }
    write_file(ctx.dir / "config.json", ctx.config_json + "\n");
    write_file(ctx.dir / "metrics.csv", std::string(metrics_csv_header()) + "\n");
    write_file(ctx.dir / "records.csv", records_csv_header(ctx.config.ensemble.discriminators) + "\n");
    return drive(ctx, init_ensemble(ctx.config.ensemble, ctx.config.arch), {}, log);
}

RunResult resume_experiment(const fs::path& checkpoint, std::ostream* log) {
    Checkpoint ck = checkpoint_load(checkpoint);
    const ExperimentConfig config = parse_config_text(ck.config_json).config;
    const fs::path dir = fs::absolute(checkpoint).parent_path().parent_path();
    RunContext ctx = make_context(config, config.seeds.front(), dir.filename().string());
    ctx.dir = dir;
    ctx.config_json = ck.config_json;
    if (ck.state.discriminators.size() != config.ensemble.discriminators) {
        throw CheckpointError("checkpoint: discriminator count disagrees with its config");
    }

    const std::uint64_t step = ck.state.step;
    // Drop everything written after the checkpoint.
    std::string metrics = std::string(metrics_csv_header()) + "\n";
    std::uint64_t last_eval = 0;
    for (const auto& m : read_metrics_csv(dir / "metrics.csv")) {
        if (m.step <= step) {
            metrics += format_metric_row(m) + "\n";
            last_eval = std::max(last_eval, m.step);
        }
    }
    write_file(dir / "metrics.csv", metrics);

    std::string records = records_csv_header(config.ensemble.discriminators) + "\n";
    std::vector<StepRecord> pending;
    for (auto& r : read_records_csv(dir / "records.csv")) {
        if (r.step >= step) continue;
        records += format_step_row(r) + "\n";
        if (r.step >= last_eval) pending.push_back(std::move(r));
    }
    write_file(dir / "records.csv", records);
    for (const auto& e : fs::directory_iterator(dir / "samples")) {
        const std::string name = e.path().stem().string();
        if (name.rfind("step_", 0) == 0 && to_integer<std::uint64_t>(name.substr(5)) > step) {
            fs::remove(e.path());
        }
    }
    return drive(ctx, std::move(ck.state), std::move(pending), log);
}

std::optional<RunResult> load_completed_run(const fs::path& dir) {
    const fs::path manifest = dir / "manifest.json";
    if (!fs::exists(manifest)) return std::nullopt;
    json m;
    try {
        std::ifstream in(manifest);
        m = json::parse(in);
    } catch (const std::exception&) {
        return std::nullopt;
    }
    if (m.value("status", "") != "complete") return std::nullopt;
    RunResult r;
    r.dir = dir;
    r.run_id = m.value("run_id", dir.filename().string());
    r.completed = true;
    r.metrics = read_metrics_csv(dir / "metrics.csv");
    return r;
}

}  // namespace dropgan
