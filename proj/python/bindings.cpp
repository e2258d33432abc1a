// SPDX-License-Identifier: Apache-2.0

#include "dropgan/checkpoint.hpp"
#include "dropgan/config.hpp"
#include "dropgan/experiment.hpp"
#include "dropgan/gradcheck_suite.hpp"
#include "dropgan/metrics.hpp"
#include "dropgan/plots.hpp"
#include "dropgan/sweep.hpp"
#include "dropgan/trainer.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace dropgan;

namespace {

py::dict metric_dict(const MetricRecord& m) {
    py::dict d;
    d["run_id"] = m.run_id;
    d["epoch"] = m.epoch;
    d["step"] = m.step;
    d["modes_covered"] = m.modes_covered;
    d["high_quality_ratio"] = m.high_quality_ratio;
    d["symmetric_kl"] = m.symmetric_kl;
    d["wasserstein"] = m.wasserstein;
    d["frechet_2d"] = m.frechet_2d;
    d["intra_diversity"] = m.intra_diversity;
    d["g_grad_norm"] = m.g_grad_norm;
    d["g_loss"] = m.g_loss;
    return d;
}

py::dict run_dict(const RunResult& r) {
    py::dict d;
    d["dir"] = r.dir.string();
    d["run_id"] = r.run_id;
    d["completed"] = r.completed;
    d["failed_step"] = r.failed_step ? py::cast(*r.failed_step) : py::none();
    d["error"] = r.error;
    py::list metrics;
    for (const auto& m : r.metrics) metrics.append(metric_dict(m));
    d["metrics"] = metrics;
    return d;
}

ExperimentConfig config_from(const std::string& text) {
    return parse_config_text(text).config;
}

/// An ensemble being trained step by step from Python.
class Trainer {
public:
    explicit Trainer(const std::string& config_json)
        : config_(config_from(config_json)), state_(init_ensemble(config_.ensemble, config_.arch)) {}

    py::dict step() {
        const StepRecord r = train_step(state_, config_.data, config_.ensemble, config_.arch);
        py::dict d;
        d["step"] = r.step;
        d["g_loss"] = r.g_loss;
        d["g_grad_norm"] = r.g_grad_norm;
        d["d_losses"] = r.d_losses;
        d["d_grad_norms"] = r.d_grad_norms;
        d["mask"] = std::vector<int>(r.mask.bits.begin(), r.mask.bits.end());
        d["fallback"] = r.mask.fallback_index ? py::cast(*r.mask.fallback_index) : py::none();
        return d;
    }

    Matrix sample(std::size_t n, std::uint64_t seed) const {
        Rng rng(seed);
        return generator_forward(config_.arch.generator, state_.generator,
                                 sample_latent(config_.arch.latent, n, rng));
    }

    py::dict evaluate(std::uint64_t seed) const {
        return metric_dict(evaluate_generator(state_, config_, reference_sample(config_, seed), seed));
    }

    std::uint64_t steps() const { return state_.step; }
    std::vector<Matrix> generator_params() const { return state_.generator.tensors; }

    void save(const std::filesystem::path& path) const {
        checkpoint_save(state_, config_to_json(config_), path);
    }
    static Trainer load(const std::filesystem::path& path) {
        Checkpoint ck = checkpoint_load(path);
        Trainer t(ck.config_json);
        t.state_ = std::move(ck.state);
        return t;
    }
    bool same_state(const Trainer& other) const { return state_ == other.state_; }

private:
    ExperimentConfig config_;
    EnsembleState state_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "GAN with a dropped-out discriminator ensemble on 2D Gaussian mixtures";

    static py::exception<Error> base(m, "Error", PyExc_RuntimeError);
    py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
    py::register_exception<NonFiniteError>(m, "NonFiniteError", base.ptr());
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<IoError>(m, "IoError", base.ptr());

    m.def("normalize_config", [](const std::string& text) { return config_to_json(config_from(text)); },
          py::arg("config_json"), "Canonical JSON with every default filled in.");
    m.def("config_warnings", [](const std::string& text) { return parse_config_text(text).warnings; },
          py::arg("config_json"));

    m.def("sample_mixture",
          [](std::size_t modes, double radius, double sigma, std::size_t n, std::uint64_t seed) {
              Rng rng(seed);
              return sample_mixture(ring_mixture_spec(modes, radius, sigma), n, rng);
          },
          py::arg("modes") = 8, py::arg("radius") = 2.0, py::arg("sigma") = 0.02, py::arg("n") = 2048,
          py::arg("seed") = 0);

    m.def("mode_stats",
          [](const Matrix& samples, std::size_t modes, double radius, double sigma) {
              const ModeStats s = mode_stats(samples, ring_mixture_spec(modes, radius, sigma));
              py::dict d;
              d["modes_covered"] = s.modes_covered;
              d["high_quality_ratio"] = s.high_quality_ratio;
              d["per_mode_counts"] = s.per_mode_counts;
              return d;
          },
          py::arg("samples"), py::arg("modes") = 8, py::arg("radius") = 2.0, py::arg("sigma") = 0.02);
    m.def("symmetric_kl",
          [](const Matrix& p, const Matrix& q, double lower, double upper, std::size_t bins, double smoothing) {
              return symmetric_kl(p, q, HistogramGrid{lower, upper, bins, smoothing});
          },
          py::arg("p"), py::arg("q"), py::arg("lower") = -4.0, py::arg("upper") = 4.0, py::arg("bins") = 50,
          py::arg("smoothing") = 1e-6);
    m.def("wasserstein",
          [](const Matrix& p, const Matrix& q, bool approximate) {
              WassersteinOptions o;
              o.allow_approximation = approximate;
              return wasserstein(p, q, o);
          },
          py::arg("p"), py::arg("q"), py::arg("allow_approximation") = false);
    m.def("min_cost_assignment", &min_cost_assignment, py::arg("cost"));
    m.def("frechet_2d", &frechet_2d, py::arg("real"), py::arg("fake"));
    m.def("intra_diversity", &intra_diversity, py::arg("generated"));
    m.def("spd2_sqrt", [](const Eigen::Matrix2d& a) -> Eigen::Matrix2d { return spd2_sqrt(a); });

    m.def("gradcheck",
          [](std::size_t trials, std::uint64_t seed, double tol, double eps) {
              const auto r = run_gradcheck_suite(trials, seed, tol, eps);
              py::dict d;
              d["trials"] = r.trials;
              d["failures"] = r.failures;
              d["max_rel_err"] = r.max_rel_err;
              d["worst"] = r.worst;
              return d;
          },
          py::arg("trials") = 100, py::arg("seed") = 0, py::arg("tol") = 1e-4, py::arg("eps") = 1e-5);

    m.def("train",
          [](const std::string& text, std::uint64_t seed, const std::string& run_id) {
              py::gil_scoped_release release;
              const RunResult r = run_experiment(config_from(text), seed, run_id);
              py::gil_scoped_acquire acquire;
              return run_dict(r);
          },
          py::arg("config_json"), py::arg("seed"), py::arg("run_id"));
    m.def("resume",
          [](const std::filesystem::path& ckpt) {
              py::gil_scoped_release release;
              const RunResult r = resume_experiment(ckpt);
              py::gil_scoped_acquire acquire;
              return run_dict(r);
          },
          py::arg("checkpoint"));
    m.def("sweep",
          [](const std::string& text, std::vector<std::size_t> ks, std::vector<double> ds,
             std::vector<std::uint64_t> seeds) {
              SweepResult r;
              {
                  py::gil_scoped_release release;
                  r = run_sweep(config_from(text), SweepGrid{ks, ds, seeds});
              }
              return sweep_summary_text(r.cells);
          },
          py::arg("config_json"), py::arg("K"), py::arg("d"), py::arg("seeds"));
    m.def("emit_plots",
          [](const std::filesystem::path& dir) {
              std::vector<std::string> out;
              for (const auto& p : emit_plots(dir)) out.push_back(p.string());
              return out;
          },
          py::arg("run_dir"));
    m.def("read_metrics", [](const std::filesystem::path& path) {
        py::list out;
        for (const auto& r : read_metrics_csv(path)) out.append(metric_dict(r));
        return out;
    });

    py::class_<Trainer>(m, "Trainer")
        .def(py::init<const std::string&>(), py::arg("config_json") = "{}")
        .def("step", &Trainer::step)
        .def("sample", &Trainer::sample, py::arg("n"), py::arg("seed") = 0)
        .def("evaluate", &Trainer::evaluate, py::arg("seed") = 0)
        .def_property_readonly("steps", &Trainer::steps)
        .def("generator_params", &Trainer::generator_params)
        .def("save", &Trainer::save, py::arg("path"))
        .def_static("load", &Trainer::load, py::arg("path"))
        .def("same_state", &Trainer::same_state, py::arg("other"));
}
