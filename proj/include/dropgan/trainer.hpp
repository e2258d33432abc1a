// SPDX-License-Identifier: Apache-2.0
//
// One generator trained against K discriminators whose feedback is
// randomly dropped at every batch.
//
// Each iteration:
//   1. draw a real batch of B rows and hand every discriminator its slice
//      of m = B/K rows (or the whole batch when splitting is off);
//   2. update every discriminator on its real slice and a fresh fake
//      minibatch, whether or not it will be dropped below;
//   3. draw keep bits delta_k ~ Bern(1 - d); if all are zero pick one
//      discriminator uniformly instead;
//   4. update the generator on the sum of the kept discriminators' losses,
//      each evaluated on its own fresh latent minibatch.

#pragma once

#include "dropgan/adam.hpp"
#include "dropgan/datagen.hpp"
#include "dropgan/nets.hpp"
#include "dropgan/objectives.hpp"
#include "dropgan/rng.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace dropgan {

struct EnsembleConfig {
    std::size_t discriminators = 1;
    double dropout_rate = 0.5;
    std::size_t batch_size = 512;
    bool split_batch = true;
    ObjectiveKind objective = ObjectiveKind::GanNonSaturating;
    AggregationMode aggregation{};
    AdamHyper adam{};
    std::size_t steps_per_epoch = 1000;
    std::size_t epochs = 25;
    std::uint64_t seed = 0;
    /// Run the K discriminator updates on K threads. Results are
    /// bit-identical to the sequential order.
    bool parallel_discriminators = false;

    std::size_t minibatch() const { return batch_size / discriminators; }
    /// Every violated constraint, empty when valid.
    std::vector<std::string> violations() const;
    void validate() const;
};

struct Architecture {
    MlpSpec generator = MlpSpec::toy_generator();
    MlpSpec discriminator = MlpSpec::toy_discriminator();
    LatentSpec latent{};
    double init_scale = 0.02;

    std::vector<std::string> violations() const;
};

struct EnsembleState {
    ParamSet generator;
    AdamMoments generator_adam;
    std::vector<ParamSet> discriminators;
    std::vector<AdamMoments> discriminator_adam;
    Rng data_rng;
    Rng mask_rng;
    Rng latent_rng;
    std::vector<Rng> discriminator_rngs;
    std::uint64_t step = 0;

    friend bool operator==(const EnsembleState&, const EnsembleState&) = default;
};

/// Fresh state; every model gets its own initialization stream.
EnsembleState init_ensemble(const EnsembleConfig& config, const Architecture& arch);

struct StepRecord {
    std::uint64_t step = 0;
    std::vector<double> d_losses;
    std::vector<double> d_grad_norms;
    double g_loss = 0.0;
    double g_grad_norm = 0.0;
    DropoutMask mask;
};

/// Training stopped on a non-finite value; `step` is the failing step.
class TrainingAbort : public NonFiniteError {
public:
    TrainingAbort(std::uint64_t step, const std::string& what)
        : NonFiniteError("step " + std::to_string(step) + ": " + what), step_(step) {}
    std::uint64_t step() const { return step_; }

private:
    std::uint64_t step_;
};

/// K disjoint contiguous slices of B/K rows, in order.
std::vector<Matrix> partition_batch(const Matrix& batch, std::size_t k);

/// Each bit is 1 with probability 1 - d; if all are 0 a fallback index is
/// drawn uniformly from {0..K-1}.
DropoutMask sample_dropout_mask(std::size_t k, double d, Rng& rng);

struct DiscriminatorStep {
    double loss = 0.0;
    double grad_norm = 0.0;
};

/// One Adam step on d_loss for a single discriminator (t >= 1).
DiscriminatorStep train_discriminator_step(const MlpSpec& spec, ParamSet& disc,
                                           AdamMoments& adam_state, const Matrix& real,
                                           const Matrix& fake, ObjectiveKind objective,
                                           const AdamHyper& hyper, std::uint64_t t);

struct GeneratorObjective {
    double loss = 0.0;
    std::vector<double> per_d_losses;  // one per contributor, in order
    std::vector<Matrix> grads;         // generator tensors, ParamSet order
};

/// Per-discriminator generator losses for `contributors`, as a K-long
/// vector with empty handles elsewhere. Leaves: "G.*" params, and inputs
/// "z<d>" (latents) and "D<d>.*" (frozen discriminator weights).
std::vector<NodeId> build_generator_losses(Graph& g, const Architecture& arch, ObjectiveKind objective,
                                          std::span<const std::size_t> contributors, std::size_t k);

/// Aggregated generator loss and its gradient, without updating anything.
/// `latents[i]` feeds the i-th discriminator of `mask.contributors()`
/// (all K for the gman and single modes).
GeneratorObjective generator_objective(const EnsembleState& state, const Architecture& arch,
                                       ObjectiveKind objective, const AggregationMode& mode,
                                       const DropoutMask& mask, std::span<const Matrix> latents);

struct GeneratorStep {
    double loss = 0.0;
    double grad_norm = 0.0;
};

/// Draws the latent minibatches, computes generator_objective and applies
/// one Adam step to the generator.
GeneratorStep train_generator_step(EnsembleState& state, const DropoutMask& mask,
                                   const EnsembleConfig& config, const Architecture& arch);

/// One full iteration (all discriminators, mask, generator).
StepRecord train_step(EnsembleState& state, const MixtureSpec& data,
                      const EnsembleConfig& config, const Architecture& arch);

/// config.steps_per_epoch iterations.
std::vector<StepRecord> run_epoch(EnsembleState& state, const MixtureSpec& data,
                                  const EnsembleConfig& config, const Architecture& arch);

}  // namespace dropgan
