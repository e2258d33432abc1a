// SPDX-License-Identifier: Apache-2.0

#include "dropgan/gradcheck_suite.hpp"

#include "dropgan/nets.hpp"
#include "dropgan/objectives.hpp"
#include "dropgan/trainer.hpp"

namespace dropgan {

namespace {

Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double scale) {
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
    return m;
}

void random_params(Rng& rng, const MlpSpec& spec, const std::string& prefix, double scale,
                   std::map<std::string, Matrix>& out) {
    const auto names = param_names(prefix, spec.layers());
    for (std::size_t l = 0; l < spec.layers(); ++l) {
        out[names[2 * l]] = random_matrix(rng, spec.layer_sizes[l], spec.layer_sizes[l + 1], scale);
        out[names[2 * l + 1]] = random_matrix(rng, 1, spec.layer_sizes[l + 1], scale);
    }
}

Activation random_activation(Rng& rng) {
    constexpr Activation all[] = {Activation::Relu, Activation::LeakyRelu, Activation::Tanh,
                                  Activation::Sigmoid, Activation::Identity};
    return all[rng.index(5)];
}

ObjectiveKind random_objective(Rng& rng) {
    constexpr ObjectiveKind all[] = {ObjectiveKind::GanMinimax, ObjectiveKind::GanNonSaturating,
                                     ObjectiveKind::LsGan};
    return all[rng.index(3)];
}

}  // namespace

GradCheckProblem random_mlp_problem(Rng& rng) {
    MlpSpec spec;
    spec.layer_sizes.push_back(1 + rng.index(4));
    const std::size_t hidden = 1 + rng.index(2);
    for (std::size_t i = 0; i < hidden; ++i) spec.layer_sizes.push_back(2 + rng.index(5));
    spec.layer_sizes.push_back(1 + rng.index(2));
    spec.hidden = random_activation(rng);
    spec.output = random_activation(rng);
    const std::size_t batch = 2 + rng.index(6);

    GradCheckProblem p;
    random_params(rng, spec, "M", 0.7, p.params);
    p.inputs["x"] = random_matrix(rng, batch, spec.input_size(), 1.0);
    p.inputs["y"] = random_matrix(rng, batch, spec.input_size(), 1.0);

    if (spec.output_size() == 1 && rng.bernoulli(0.5)) {
        const ObjectiveKind kind = random_objective(rng);
        spec.output = Activation::Identity;
        p.build = [spec, kind](Graph& g) {
            const Head head = required_head(kind);
            const auto score = [&](const char* name) {
                NodeId s = apply_mlp(g, spec, "M", g.input(name), true);
                return head == Head::Probability ? g.sigmoid(s) : s;
            };
            const NodeId real = score("x");
            const NodeId fake = score("y");
            return d_loss(g, kind, Scores{real, head}, Scores{fake, head});
        };
    } else {
        p.build = [spec](Graph& g) {
            const NodeId out = apply_mlp(g, spec, "M", g.input("x"), true);
            return g.mean(g.square(out));
        };
    }
    return p;
}

GradCheckProblem masked_generator_problem(Rng& rng) {
    Architecture arch;
    arch.latent.dim = 2 + rng.index(3);
    arch.generator = MlpSpec{{arch.latent.dim, 3 + rng.index(3), 2}, random_activation(rng), Activation::Identity};
    arch.discriminator = MlpSpec{{2, 3 + rng.index(3), 1}, random_activation(rng), Activation::Identity};
    const std::size_t k = 1 + rng.index(4);
    const std::size_t m = 2 + rng.index(4);
    const ObjectiveKind objective = random_objective(rng);
    const DropoutMask mask = sample_dropout_mask(k, rng.uniform(), rng);
    AggregationMode mode;
    mode.normalize_by_survivors = rng.bernoulli(0.5);

    GradCheckProblem p;
    random_params(rng, arch.generator, "G", 0.7, p.params);
    for (std::size_t d = 0; d < k; ++d) {
        std::map<std::string, Matrix> disc;
        random_params(rng, arch.discriminator, "D" + std::to_string(d), 0.7, disc);
        for (auto& [name, value] : disc) p.inputs[name] = std::move(value);
        p.inputs["z" + std::to_string(d)] = random_matrix(rng, m, arch.latent.dim, 1.0);
    }
    p.build = [arch, objective, mask, mode, k](Graph& g) {
        const auto who = mask.contributors();
        const auto losses = build_generator_losses(g, arch, objective, who, k);
        return aggregate_g_loss(g, mode, losses, mask);
    };
    return p;
}

GradCheckSuiteReport run_gradcheck_suite(std::size_t trials, std::uint64_t seed, double tol, double eps) {
    GradCheckSuiteReport report;
    report.trials = trials;
    for (std::size_t i = 0; i < trials; ++i) {
        const ProblemFactory factory = i % 2 == 0 ? ProblemFactory(random_mlp_problem)
                                                  : ProblemFactory(masked_generator_problem);
        const GradCheckReport r = gradient_check(factory, mix_seed(seed + i), tol, eps);
        if (!r.pass) ++report.failures;
        if (r.max_rel_err >= report.max_rel_err) {
            report.max_rel_err = r.max_rel_err;
            report.worst = "trial " + std::to_string(i) + ": " + r.worst_param;
        }
    }
    return report;
}

}  // namespace dropgan
