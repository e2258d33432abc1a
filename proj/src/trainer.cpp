// SPDX-License-Identifier: Apache-2.0

#include "dropgan/trainer.hpp"

#include <cmath>
#include <exception>
#include <sstream>
#include <thread>

namespace dropgan {

std::vector<std::string> EnsembleConfig::violations() const {
    std::vector<std::string> out;
    if (discriminators == 0) out.emplace_back("ensemble.discriminators: must be >= 1");
    if (!(dropout_rate >= 0.0 && dropout_rate <= 1.0)) {
        std::ostringstream os;
        os << "ensemble.dropout_rate: " << dropout_rate << " is outside [0, 1]";
        out.push_back(os.str());
    }
    if (batch_size == 0) out.emplace_back("ensemble.batch_size: must be >= 1");
    if (discriminators != 0 && batch_size % discriminators != 0) {
        out.push_back("ensemble.batch_size: " + std::to_string(batch_size) +
                      " is not divisible by " + std::to_string(discriminators) +
                      " discriminators (minibatch m = B/K must be integral)");
    }
    if (aggregation.kind == AggregationMode::Kind::Single && discriminators != 1) {
        out.emplace_back("ensemble.aggregation: 'single' requires exactly one discriminator");
    }
    if (!(adam.lr >= 0.0)) out.emplace_back("ensemble.adam.lr: must be >= 0");
    if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0)) out.emplace_back("ensemble.adam.beta1: must be in [0, 1)");
    if (!(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) out.emplace_back("ensemble.adam.beta2: must be in [0, 1)");
    if (!(adam.eps > 0.0)) out.emplace_back("ensemble.adam.eps: must be > 0");
    return out;
}

void EnsembleConfig::validate() const {
    const auto v = violations();
    if (v.empty()) return;
    std::string msg = "invalid ensemble configuration:";
    for (const auto& s : v) msg += "\n  " + s;
    throw ConfigError(msg);
}

std::vector<std::string> Architecture::violations() const {
    std::vector<std::string> out;
    const auto check = [&](const MlpSpec& s, const char* what) {
        try {
            s.validate();
        } catch (const ConfigError& e) {
            out.push_back(std::string(what) + ": " + e.what());
        }
    };
    check(generator, "generator");
    check(discriminator, "discriminator");
    if (latent.dim == 0) out.emplace_back("latent.dim: must be >= 1");
    if (!generator.layer_sizes.empty() && generator.layer_sizes.front() != latent.dim) {
        out.emplace_back("generator: input size must equal latent.dim");
    }
    if (!generator.layer_sizes.empty() && generator.layer_sizes.back() != 2) {
        out.emplace_back("generator: output size must be 2");
    }
    if (!discriminator.layer_sizes.empty() &&
        (discriminator.layer_sizes.front() != 2 || discriminator.layer_sizes.back() != 1)) {
        out.emplace_back("discriminator: must map 2 inputs to 1 output");
    }
    if (!(init_scale >= 0.0)) out.emplace_back("init_scale: must be >= 0");
    return out;
}

namespace {

std::string disc_prefix(std::size_t k) { return "D" + std::to_string(k); }

}  // namespace

EnsembleState init_ensemble(const EnsembleConfig& config, const Architecture& arch) {
    config.validate();
    if (const auto v = arch.violations(); !v.empty()) {
        std::string msg = "invalid architecture:";
        for (const auto& s : v) msg += "\n  " + s;
        throw ConfigError(msg);
    }
    const std::uint64_t seed = config.seed;
    EnsembleState s;
    s.generator = init_mlp(arch.generator, Rng::stream(seed, streams::kGeneratorInit).next_u64(),
                           "generator", arch.init_scale);
    s.generator_adam = AdamMoments::zeros_like(s.generator.tensors);
    for (std::size_t k = 0; k < config.discriminators; ++k) {
        const std::uint64_t base = streams::kDiscriminatorBase + 2 * k;
        s.discriminators.push_back(init_mlp(arch.discriminator,
                                            Rng::stream(seed, base + 1).next_u64(),
                                            "discriminator " + std::to_string(k), arch.init_scale));
        s.discriminator_adam.push_back(AdamMoments::zeros_like(s.discriminators.back().tensors));
        s.discriminator_rngs.push_back(Rng::stream(seed, base));
    }
    s.data_rng = Rng::stream(seed, streams::kData);
    s.mask_rng = Rng::stream(seed, streams::kMask);
    s.latent_rng = Rng::stream(seed, streams::kLatent);
    return s;
}

std::vector<Matrix> partition_batch(const Matrix& batch, std::size_t k) {
    if (k == 0) throw ConfigError("partition_batch: K must be >= 1");
    const auto rows = static_cast<std::size_t>(batch.rows());
    if (rows % k != 0) {
        throw ConfigError("partition_batch: " + std::to_string(rows) +
                          " rows are not divisible into " + std::to_string(k) + " slices");
    }
    const auto m = static_cast<Eigen::Index>(rows / k);
    std::vector<Matrix> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
        out.emplace_back(batch.middleRows(static_cast<Eigen::Index>(i) * m, m));
    }
    return out;
}

DropoutMask sample_dropout_mask(std::size_t k, double d, Rng& rng) {
    DropoutMask mask;
    mask.bits.resize(k);
    bool any = false;
    for (std::size_t i = 0; i < k; ++i) {
        mask.bits[i] = rng.bernoulli(1.0 - d) ? 1 : 0;
        any = any || mask.bits[i] != 0;
    }
    if (!any && k > 0) mask.fallback_index = rng.index(k);
    return mask;
}

DiscriminatorStep train_discriminator_step(const MlpSpec& spec, ParamSet& disc,
                                           AdamMoments& adam_state, const Matrix& real,
                                           const Matrix& fake, ObjectiveKind objective,
                                           const AdamHyper& hyper, std::uint64_t t) {
    const Head head = required_head(objective);
    Graph g;
    const auto score = [&](NodeId x) {
        NodeId out = apply_mlp(g, spec, "D", x, true);
        if (head == Head::Probability) out = g.sigmoid(out);
        return Scores{out, head};
    };
    const Scores s_real = score(g.input("real"));
    const Scores s_fake = score(g.input("fake"));
    d_loss(g, objective, s_real, s_fake);

    Bindings b;
    b.emplace("real", real);
    b.emplace("fake", fake);
    bind_params(disc, "D", b);
    const double loss = g.forward(b)(0, 0);
    const auto grads = collect_grads(g.backward(), "D", disc.layers());
    const double norm = global_norm(grads);
    if (!std::isfinite(loss) || !std::isfinite(norm)) {
        throw NonFiniteError(disc.owner + ": non-finite loss or gradient");
    }
    adam_update(disc.tensors, grads, adam_state, hyper, t);
    return {loss, norm};
}

std::vector<NodeId> build_generator_losses(Graph& g, const Architecture& arch, ObjectiveKind objective,
                                          std::span<const std::size_t> contributors, std::size_t k) {
    const Head head = required_head(objective);
    std::vector<NodeId> losses(k);
    for (std::size_t d : contributors) {
        if (d >= k) throw Error("build_generator_losses: discriminator index out of range");
        const NodeId fake = apply_mlp(g, arch.generator, "G", g.input("z" + std::to_string(d)), true);
        NodeId out = apply_mlp(g, arch.discriminator, disc_prefix(d), fake, false);
        if (head == Head::Probability) out = g.sigmoid(out);
        losses[d] = g_loss(g, objective, Scores{out, head});
    }
    return losses;
}

GeneratorObjective generator_objective(const EnsembleState& state, const Architecture& arch,
                                       ObjectiveKind objective, const AggregationMode& mode,
                                       const DropoutMask& mask, std::span<const Matrix> latents) {
    const std::size_t k = state.discriminators.size();
    const auto who = mode.kind == AggregationMode::Kind::Dropout
                         ? mask.contributors()
                         : DropoutMask::all_kept(k).contributors();
    if (who.empty()) throw Error("generator_objective: no contributing discriminator");
    if (latents.size() != who.size()) {
        throw Error("generator_objective: " + std::to_string(latents.size()) +
                    " latent minibatches for " + std::to_string(who.size()) + " discriminators");
    }
    Graph g;
    Bindings b;
    bind_params(state.generator, "G", b);
    const std::vector<NodeId> losses = build_generator_losses(g, arch, objective, who, k);
    for (std::size_t i = 0; i < who.size(); ++i) {
        b.emplace("z" + std::to_string(who[i]), latents[i]);
        bind_params(state.discriminators[who[i]], disc_prefix(who[i]), b);
    }
    g.forward(b);
    const NodeId total = aggregate_g_loss(g, mode, losses, mask);
    g.forward(b);

    GeneratorObjective out;
    out.loss = g.value(total)(0, 0);
    for (std::size_t d : who) out.per_d_losses.push_back(g.value(losses[d])(0, 0));
    out.grads = collect_grads(g.backward(total), "G", state.generator.layers());
    return out;
}

GeneratorStep train_generator_step(EnsembleState& state, const DropoutMask& mask,
                                   const EnsembleConfig& config, const Architecture& arch) {
    const std::size_t k = state.discriminators.size();
    const auto who = config.aggregation.kind == AggregationMode::Kind::Dropout
                         ? mask.contributors()
                         : DropoutMask::all_kept(k).contributors();
    std::vector<Matrix> latents;
    latents.reserve(who.size());
    for (std::size_t i = 0; i < who.size(); ++i) {
        latents.push_back(sample_latent(arch.latent, config.minibatch(), state.latent_rng));
    }
    GeneratorObjective obj = generator_objective(state, arch, config.objective,
                                                 config.aggregation, mask, latents);
    const double norm = global_norm(obj.grads);
    if (!std::isfinite(obj.loss) || !std::isfinite(norm)) {
        throw NonFiniteError("generator: non-finite loss or gradient");
    }
    adam_update(state.generator.tensors, obj.grads, state.generator_adam, config.adam,
                state.step + 1);
    return {obj.loss, norm};
}

StepRecord train_step(EnsembleState& state, const MixtureSpec& data,
                      const EnsembleConfig& config, const Architecture& arch) {
    const std::size_t k = state.discriminators.size();
    if (k != config.discriminators) {
        throw ConfigError("train_step: state has " + std::to_string(k) +
                          " discriminators, config has " + std::to_string(config.discriminators));
    }
    const std::uint64_t t = state.step + 1;
    StepRecord rec;
    rec.step = state.step;
    rec.d_losses.resize(k);
    rec.d_grad_norms.resize(k);

    try {
        const Matrix batch = sample_mixture(data, config.batch_size, state.data_rng);
        std::vector<Matrix> real_slices;
        Matrix shared_fake;
        if (config.split_batch) {
            real_slices = partition_batch(batch, k);
        } else {
            shared_fake = generator_forward(
                arch.generator, state.generator,
                sample_latent(arch.latent, config.batch_size, state.latent_rng));
        }

        const auto update_one = [&](std::size_t d) {
            const Matrix* real = &batch;
            Matrix fake;
            if (config.split_batch) {
                real = &real_slices[d];
                fake = generator_forward(
                    arch.generator, state.generator,
                    sample_latent(arch.latent, config.minibatch(), state.discriminator_rngs[d]));
            }
            const DiscriminatorStep r = train_discriminator_step(
                arch.discriminator, state.discriminators[d], state.discriminator_adam[d], *real,
                config.split_batch ? fake : shared_fake, config.objective, config.adam, t);
            rec.d_losses[d] = r.loss;
            rec.d_grad_norms[d] = r.grad_norm;
        };

        if (config.parallel_discriminators && k > 1) {
            std::vector<std::exception_ptr> errors(k);
            std::vector<std::thread> workers;
            workers.reserve(k);
            for (std::size_t d = 0; d < k; ++d) {
                workers.emplace_back([&, d] {
                    try {
                        update_one(d);
                    } catch (...) {
                        errors[d] = std::current_exception();
                    }
                });
            }
            for (auto& w : workers) w.join();
            for (auto& e : errors) {
                if (e) std::rethrow_exception(e);
            }
        } else {
            for (std::size_t d = 0; d < k; ++d) update_one(d);
        }

        rec.mask = config.aggregation.kind == AggregationMode::Kind::Dropout
                       ? sample_dropout_mask(k, config.dropout_rate, state.mask_rng)
                       : DropoutMask::all_kept(k);
        const GeneratorStep g = train_generator_step(state, rec.mask, config, arch);
        rec.g_loss = g.loss;
        rec.g_grad_norm = g.grad_norm;
    } catch (const TrainingAbort&) {
        throw;
    } catch (const NonFiniteError& e) {
        throw TrainingAbort(state.step, e.what());
    }
    ++state.step;
    return rec;
}

std::vector<StepRecord> run_epoch(EnsembleState& state, const MixtureSpec& data,
                                  const EnsembleConfig& config, const Architecture& arch) {
    std::vector<StepRecord> records;
    records.reserve(config.steps_per_epoch);
    for (std::size_t i = 0; i < config.steps_per_epoch; ++i) {
        records.push_back(train_step(state, data, config, arch));
    }
    return records;
}

}  // namespace dropgan
