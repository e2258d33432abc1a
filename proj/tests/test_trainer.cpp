// SPDX-License-Identifier: Apache-2.0

#include "dropgan/trainer.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace dropgan;
using oracle::randn;

namespace {

Architecture tiny_arch() {
    Architecture a;
    a.latent.dim = 4;
    a.generator = MlpSpec{{4, 8, 2}};
    a.discriminator = MlpSpec{{2, 8, 1}};
    a.init_scale = 0.5;
    return a;
}

EnsembleConfig tiny_config(std::size_t k, double d) {
    EnsembleConfig c;
    c.discriminators = k;
    c.dropout_rate = d;
    c.batch_size = 12 * k;
    c.steps_per_epoch = 5;
    c.adam.lr = 1e-2;
    c.seed = 11;
    return c;
}

bool all_equal(const std::vector<Matrix>& a, const std::vector<Matrix>& b, double tol) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].rows() != b[i].rows() || a[i].cols() != b[i].cols()) return false;
        if ((a[i] - b[i]).cwiseAbs().maxCoeff() > tol) return false;
    }
    return true;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST_CASE("adam matches the scalar oracle") {
    const AdamHyper h{0.1, 0.9, 0.999, 1e-8};
    std::vector<Matrix> params{make_matrix({{0.0}})};
    AdamMoments m = AdamMoments::zeros_like(params);
    adam_update(params, std::vector<Matrix>{make_matrix({{1.0}})}, m, h, 1);
    CHECK(params[0](0, 0) == doctest::Approx(-0.1).epsilon(1e-6));

    Rng rng(3);
    std::vector<Matrix> theta{randn(rng, 3, 2), randn(rng, 1, 2)};
    std::vector<Matrix> expected = theta;
    std::vector<std::vector<oracle::ScalarAdam>> hand(2);
    for (std::size_t i = 0; i < 2; ++i) hand[i].resize(static_cast<std::size_t>(theta[i].size()));
    AdamMoments moments = AdamMoments::zeros_like(theta);
    const AdamHyper defaults{};
    for (std::uint64_t t = 1; t <= 20; ++t) {
        const std::vector<Matrix> g{randn(rng, 3, 2), randn(rng, 1, 2)};
        adam_update(theta, g, moments, defaults, t);
        for (std::size_t i = 0; i < 2; ++i) {
            for (Eigen::Index j = 0; j < g[i].size(); ++j) {
                expected[i].data()[j] = hand[i][static_cast<std::size_t>(j)].step(expected[i].data()[j],
                                                                                  g[i].data()[j], defaults, t);
            }
        }
    }
    CHECK(all_equal(theta, expected, 1e-12));
}

TEST_CASE("adam with zero gradients leaves params and decays moments") {
    std::vector<Matrix> params{make_matrix({{1.5, -2.0}})};
    AdamMoments m = AdamMoments::zeros_like(params);
    m.first[0] = make_matrix({{0.4, -0.2}});
    m.second[0] = make_matrix({{0.3, 0.1}});
    const AdamMoments before = m;
    const std::vector<Matrix> zero{Matrix::Zero(1, 2)};
    const AdamHyper h{};
    // With nonzero moments the step still moves params; from zero moments it must not.
    AdamMoments fresh = AdamMoments::zeros_like(params);
    std::vector<Matrix> still = params;
    adam_update(still, zero, fresh, h, 1);
    CHECK(still[0] == params[0]);
    CHECK(fresh.first[0].isZero(0.0));

    adam_update(params, zero, m, h, 2);
    CHECK(m.first[0].isApprox(h.beta1 * before.first[0]));
    CHECK(m.second[0].isApprox(h.beta2 * before.second[0]));
}

TEST_CASE("adam is deterministic") {
    Rng rng(9);
    const std::vector<Matrix> start{randn(rng, 4, 4)};
    const std::vector<Matrix> g{randn(rng, 4, 4)};
    std::vector<Matrix> a = start;
    std::vector<Matrix> b = start;
    AdamMoments ma = AdamMoments::zeros_like(a);
    AdamMoments mb = AdamMoments::zeros_like(b);
    adam_update(a, g, ma, AdamHyper{}, 1);
    adam_update(b, g, mb, AdamHyper{}, 1);
    CHECK(a[0] == b[0]);
    CHECK(ma == mb);
}

TEST_CASE("partition_batch") {
    Matrix batch(10, 2);
    for (Eigen::Index i = 0; i < 10; ++i) batch.row(i) << static_cast<double>(i), -static_cast<double>(i);
    const auto five = partition_batch(batch, 5);
    REQUIRE(five.size() == 5);
    for (std::size_t k = 0; k < 5; ++k) {
        REQUIRE(five[k].rows() == 2);
        CHECK(five[k](0, 0) == static_cast<double>(2 * k));
        CHECK(five[k](1, 0) == static_cast<double>(2 * k + 1));
    }
    const auto one = partition_batch(batch, 1);
    REQUIRE(one.size() == 1);
    CHECK(one[0] == batch);
    CHECK_THROWS_AS(partition_batch(batch, 3), ConfigError);

    EnsembleConfig c;
    c.discriminators = 3;
    c.batch_size = 10;
    CHECK_FALSE(c.violations().empty());
    CHECK_THROWS_AS(c.validate(), ConfigError);
    CHECK_THROWS_AS(init_ensemble(c, Architecture{}), ConfigError);
}

TEST_CASE("config validation") {
    EnsembleConfig c;
    c.dropout_rate = 1.5;
    c.discriminators = 0;
    const auto v = c.violations();
    CHECK(v.size() >= 2);
    c = EnsembleConfig{};
    c.dropout_rate = -0.1;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c.dropout_rate = 1.0;
    CHECK_NOTHROW(c.validate());
}

TEST_CASE("dropout mask edge rates") {
    Rng rng(1);
    for (int i = 0; i < 100; ++i) {
        const DropoutMask keep = sample_dropout_mask(6, 0.0, rng);
        CHECK(keep == DropoutMask::all_kept(6));
        CHECK_FALSE(keep.fallback_fired());

        const DropoutMask drop = sample_dropout_mask(6, 1.0, rng);
        for (auto b : drop.bits) CHECK(b == 0);
        REQUIRE(drop.fallback_fired());
        CHECK(*drop.fallback_index < 6);
        CHECK(drop.contributors() == std::vector<std::size_t>{*drop.fallback_index});
    }
}

TEST_CASE("dropout mask statistics") {
    Rng rng(2024);
    const std::size_t k = 10;
    const int n = 100000;
    std::vector<int> kept(k, 0);
    int fallbacks = 0;
    std::vector<int> fallback_hits(k, 0);
    for (int i = 0; i < n; ++i) {
        const DropoutMask m = sample_dropout_mask(k, 0.5, rng);
        for (std::size_t j = 0; j < k; ++j) kept[j] += m.bits[j];
        if (m.fallback_fired()) {
            ++fallbacks;
            ++fallback_hits[*m.fallback_index];
        }
        CHECK_FALSE(m.contributors().empty());
    }
    double total = 0.0;
    for (int c : kept) total += c;
    CHECK(std::abs(total / (static_cast<double>(n) * k) - 0.5) < 0.01);

    // Each bit inside its 99% binomial interval.
    const double half_width = 2.576 * std::sqrt(0.25 / n);
    for (int c : kept) CHECK(std::abs(static_cast<double>(c) / n - 0.5) < half_width);

    const double p = std::pow(2.0, -10.0);
    const double mean = n * p;
    const double sd = std::sqrt(n * p * (1 - p));
    CHECK(std::abs(fallbacks - mean) < 3 * sd);
}

TEST_CASE("discriminator step with zero learning rate reports loss only") {
    const Architecture arch = tiny_arch();
    Rng rng(5);
    ParamSet disc = init_mlp(arch.discriminator, 3, "d", 0.5);
    const ParamSet before = disc;
    AdamMoments m = AdamMoments::zeros_like(disc.tensors);
    AdamHyper h{};
    h.lr = 0.0;
    const DiscriminatorStep r = train_discriminator_step(arch.discriminator, disc, m, randn(rng, 6, 2),
                                                         randn(rng, 6, 2), ObjectiveKind::GanNonSaturating, h, 1);
    CHECK(disc == before);
    CHECK(std::isfinite(r.loss));
    CHECK(r.loss > 0.0);
    CHECK(r.grad_norm > 0.0);
}

TEST_CASE("all-zero discriminator loss is 2 ln 2") {
    const MlpSpec spec{{2, 8, 1}};
    ParamSet disc = init_mlp(spec, 1, "d");
    for (Matrix& t : disc.tensors) t.setZero();
    AdamMoments m = AdamMoments::zeros_like(disc.tensors);
    Rng rng(6);
    for (ObjectiveKind kind : {ObjectiveKind::GanMinimax, ObjectiveKind::GanNonSaturating}) {
        ParamSet d = disc;
        AdamMoments mm = m;
        const DiscriminatorStep r =
            train_discriminator_step(spec, d, mm, randn(rng, 4, 2), randn(rng, 4, 2), kind, AdamHyper{}, 1);
        CHECK(r.loss == doctest::Approx(2 * std::numbers::ln2).epsilon(1e-15));
    }
}

TEST_CASE("discriminator step matches hand-derived gradient and scalar adam") {
    // Linear logit D(x) = sigmoid(x.w + b), so the gradient is closed form.
    const MlpSpec spec{{2, 1}};
    Rng rng(8);
    ParamSet disc = init_mlp(spec, 4, "d", 0.7);
    disc.bias(0)(0, 0) = 0.3;
    const Matrix real = randn(rng, 5, 2);
    const Matrix fake = randn(rng, 5, 2);
    const AdamHyper h{0.05, 0.5, 0.999, 1e-8};

    double gw[2] = {0, 0};
    double gb = 0;
    double loss = 0;
    const double w0 = disc.weight(0)(0, 0);
    const double w1 = disc.weight(0)(1, 0);
    const double b = disc.bias(0)(0, 0);
    for (Eigen::Index i = 0; i < 5; ++i) {
        const double sr = sigmoid(real(i, 0) * w0 + real(i, 1) * w1 + b);
        const double sf = sigmoid(fake(i, 0) * w0 + fake(i, 1) * w1 + b);
        loss += (-std::log(sr) - std::log(1 - sf)) / 5;
        // d/dz -log s(z) = s - 1 ; d/dz -log(1 - s(z)) = s
        gw[0] += ((sr - 1) * real(i, 0) + sf * fake(i, 0)) / 5;
        gw[1] += ((sr - 1) * real(i, 1) + sf * fake(i, 1)) / 5;
        gb += ((sr - 1) + sf) / 5;
    }
    oracle::ScalarAdam a0, a1, ab;
    const double w0n = a0.step(w0, gw[0], h, 1);
    const double w1n = a1.step(w1, gw[1], h, 1);
    const double bn = ab.step(b, gb, h, 1);

    AdamMoments m = AdamMoments::zeros_like(disc.tensors);
    const DiscriminatorStep r =
        train_discriminator_step(spec, disc, m, real, fake, ObjectiveKind::GanNonSaturating, h, 1);
    CHECK(std::abs(r.loss - loss) < 1e-12);
    CHECK(std::abs(r.grad_norm - std::sqrt(gw[0] * gw[0] + gw[1] * gw[1] + gb * gb)) < 1e-12);
    CHECK(std::abs(disc.weight(0)(0, 0) - w0n) < 1e-12);
    CHECK(std::abs(disc.weight(0)(1, 0) - w1n) < 1e-12);
    CHECK(std::abs(disc.bias(0)(0, 0) - bn) < 1e-12);
}

TEST_CASE("generator gradient reduces to the surviving discriminators") {
    const Architecture arch = tiny_arch();
    const EnsembleConfig config = tiny_config(3, 0.5);
    const EnsembleState state = init_ensemble(config, arch);
    Rng rng(12);
    const Matrix z0 = randn(rng, 12, 4);
    const Matrix z1 = randn(rng, 12, 4);
    const AggregationMode dropout{};

    const auto alone = [&](std::size_t d, const Matrix& z) {
        EnsembleState single = state;
        single.discriminators = {state.discriminators[d]};
        single.discriminator_adam = {state.discriminator_adam[d]};
        return generator_objective(single, arch, config.objective, dropout, DropoutMask::all_kept(1),
                                   std::vector<Matrix>{z});
    };

    SUBCASE("one survivor") {
        DropoutMask mask;
        mask.bits = {0, 1, 0};
        const auto got = generator_objective(state, arch, config.objective, dropout, mask, std::vector<Matrix>{z0});
        const auto ref = alone(1, z0);
        CHECK(std::abs(got.loss - ref.loss) < 1e-12);
        CHECK(all_equal(got.grads, ref.grads, 1e-12));
    }
    SUBCASE("fallback") {
        DropoutMask mask;
        mask.bits = {0, 0, 0};
        mask.fallback_index = 2;
        const auto got = generator_objective(state, arch, config.objective, dropout, mask, std::vector<Matrix>{z1});
        const auto ref = alone(2, z1);
        CHECK(std::abs(got.loss - ref.loss) < 1e-12);
        CHECK(all_equal(got.grads, ref.grads, 1e-12));
    }
    SUBCASE("two kept sum") {
        DropoutMask mask;
        mask.bits = {1, 0, 1};
        const auto got =
            generator_objective(state, arch, config.objective, dropout, mask, std::vector<Matrix>{z0, z1});
        const auto a = alone(0, z0);
        const auto b = alone(2, z1);
        std::vector<Matrix> sum = a.grads;
        for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += b.grads[i];
        CHECK(std::abs(got.loss - (a.loss + b.loss)) < 1e-12);
        CHECK(all_equal(got.grads, sum, 1e-12));
        REQUIRE(got.per_d_losses.size() == 2);
        CHECK(got.per_d_losses[0] == a.loss);
        CHECK(got.per_d_losses[1] == b.loss);
    }
    SUBCASE("normalized by survivors halves the sum") {
        DropoutMask mask;
        mask.bits = {1, 0, 1};
        AggregationMode mean = dropout;
        mean.normalize_by_survivors = true;
        const auto plain =
            generator_objective(state, arch, config.objective, dropout, mask, std::vector<Matrix>{z0, z1});
        const auto halved =
            generator_objective(state, arch, config.objective, mean, mask, std::vector<Matrix>{z0, z1});
        CHECK(std::abs(halved.loss - plain.loss / 2) < 1e-12);
        std::vector<Matrix> half = plain.grads;
        for (Matrix& t : half) t /= 2;
        CHECK(all_equal(halved.grads, half, 1e-12));
    }
    SUBCASE("latent count must match") {
        DropoutMask mask;
        mask.bits = {1, 1, 0};
        CHECK_THROWS_AS(generator_objective(state, arch, config.objective, dropout, mask, std::vector<Matrix>{z0}),
                        Error);
    }
}

TEST_CASE("all-ones mask with two discriminators sums single-discriminator gradients") {
    const Architecture arch = tiny_arch();
    const EnsembleConfig config = tiny_config(2, 0.0);
    const EnsembleState state = init_ensemble(config, arch);
    Rng rng(21);
    const Matrix z0 = randn(rng, 12, 4);
    const Matrix z1 = randn(rng, 12, 4);
    const auto got = generator_objective(state, arch, config.objective, AggregationMode{}, DropoutMask::all_kept(2),
                                         std::vector<Matrix>{z0, z1});
    std::vector<Matrix> sum;
    for (std::size_t d = 0; d < 2; ++d) {
        EnsembleState single = state;
        single.discriminators = {state.discriminators[d]};
        const auto r = generator_objective(single, arch, config.objective, AggregationMode{},
                                           DropoutMask::all_kept(1), std::vector<Matrix>{d == 0 ? z0 : z1});
        if (sum.empty()) {
            sum = r.grads;
        } else {
            for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += r.grads[i];
        }
    }
    CHECK(all_equal(got.grads, sum, 1e-12));
}

TEST_CASE("dropped discriminators contribute exactly zero") {
    // Full K-term graph with dropped losses scaled by zero, against the
    // masked aggregate.
    const Architecture arch = tiny_arch();
    const EnsembleConfig config = tiny_config(4, 0.5);
    const EnsembleState state = init_ensemble(config, arch);
    Rng rng(31);
    std::vector<Matrix> z;
    for (int i = 0; i < 4; ++i) z.push_back(randn(rng, 12, 4));
    DropoutMask mask;
    mask.bits = {1, 0, 1, 0};
    const auto masked = generator_objective(state, arch, config.objective, AggregationMode{}, mask,
                                            std::vector<Matrix>{z[0], z[2]});

    Graph g;
    Bindings b;
    bind_params(state.generator, "G", b);
    const std::vector<std::size_t> all{0, 1, 2, 3};
    const auto losses = build_generator_losses(g, arch, config.objective, all, 4);
    for (std::size_t d = 0; d < 4; ++d) {
        b.emplace("z" + std::to_string(d), z[d]);
        bind_params(state.discriminators[d], "D" + std::to_string(d), b);
    }
    NodeId total = g.add(losses[0], g.scale(losses[1], 0.0));
    total = g.add(total, losses[2]);
    total = g.add(total, g.scale(losses[3], 0.0));
    g.forward(b);
    const auto grads = collect_grads(g.backward(total), "G", state.generator.layers());
    CHECK(g.value(total)(0, 0) == doctest::Approx(masked.loss).epsilon(1e-14));
    CHECK(all_equal(grads, masked.grads, 1e-13));
}

TEST_CASE("every discriminator updates even when dropped") {
    const Architecture arch = tiny_arch();
    const EnsembleConfig config = tiny_config(4, 1.0);
    EnsembleState state = init_ensemble(config, arch);
    const EnsembleState before = state;
    const StepRecord r = train_step(state, ring_mixture_spec(), config, arch);
    CHECK(r.mask.fallback_fired());
    for (std::size_t d = 0; d < 4; ++d) CHECK_FALSE(state.discriminators[d] == before.discriminators[d]);
    CHECK_FALSE(state.generator == before.generator);
    CHECK(state.step == 1);
}

TEST_CASE("generator moves every step under full dropout") {
    const Architecture arch = tiny_arch();
    const EnsembleConfig config = tiny_config(3, 1.0);
    EnsembleState state = init_ensemble(config, arch);
    for (int i = 0; i < 10; ++i) {
        const ParamSet g = state.generator;
        const StepRecord r = train_step(state, ring_mixture_spec(), config, arch);
        CHECK(r.mask.fallback_fired());
        CHECK(r.g_grad_norm > 0.0);
        CHECK_FALSE(state.generator == g);
    }
}

TEST_CASE("discriminator update ignores the other discriminators") {
    const Architecture arch = tiny_arch();
    const EnsembleConfig config = tiny_config(3, 0.5);
    EnsembleState a = init_ensemble(config, arch);
    EnsembleState b = a;
    std::swap(b.discriminators[0], b.discriminators[2]);
    std::swap(b.discriminator_adam[0], b.discriminator_adam[2]);
    b.discriminators[0].tensors[0].array() += 1.0;
    train_step(a, ring_mixture_spec(), config, arch);
    train_step(b, ring_mixture_spec(), config, arch);
    CHECK(a.discriminators[1] == b.discriminators[1]);
    CHECK(a.discriminator_adam[1] == b.discriminator_adam[1]);
}

TEST_CASE("step records") {
    const Architecture arch = tiny_arch();
    const EnsembleConfig config = tiny_config(5, 0.5);
    EnsembleState state = init_ensemble(config, arch);
    const auto records = run_epoch(state, ring_mixture_spec(), config, arch);
    REQUIRE(records.size() == 5);
    for (std::size_t i = 0; i < records.size(); ++i) {
        const StepRecord& r = records[i];
        CHECK(r.step == i);
        CHECK(r.d_losses.size() == 5);
        CHECK(r.d_grad_norms.size() == 5);
        CHECK(r.mask.size() == 5);
        CHECK(std::isfinite(r.g_loss));
        CHECK(std::isfinite(r.g_grad_norm));
        CHECK(r.g_grad_norm >= 0.0);
        for (double n : r.d_grad_norms) CHECK(n >= 0.0);
    }
    CHECK(state.step == 5);
}

TEST_CASE("run_epoch with zero steps is a no-op") {
    const Architecture arch = tiny_arch();
    EnsembleConfig config = tiny_config(2, 0.5);
    config.steps_per_epoch = 0;
    EnsembleState state = init_ensemble(config, arch);
    const EnsembleState before = state;
    CHECK(run_epoch(state, ring_mixture_spec(), config, arch).empty());
    CHECK(state == before);
}

TEST_CASE("training is deterministic") {
    const Architecture arch = tiny_arch();
    for (bool split : {true, false}) {
        EnsembleConfig config = tiny_config(3, 0.5);
        config.split_batch = split;
        EnsembleState a = init_ensemble(config, arch);
        EnsembleState b = init_ensemble(config, arch);
        const auto ra = run_epoch(a, ring_mixture_spec(), config, arch);
        const auto rb = run_epoch(b, ring_mixture_spec(), config, arch);
        CHECK(a == b);
        REQUIRE(ra.size() == rb.size());
        for (std::size_t i = 0; i < ra.size(); ++i) {
            CHECK(ra[i].g_loss == rb[i].g_loss);
            CHECK(ra[i].d_losses == rb[i].d_losses);
            CHECK(ra[i].mask == rb[i].mask);
        }
        config.seed += 1;
        EnsembleState c = init_ensemble(config, arch);
        run_epoch(c, ring_mixture_spec(), config, arch);
        CHECK_FALSE(a == c);
    }
}

TEST_CASE("parallel discriminator updates match the sequential run bitwise") {
    const Architecture arch = tiny_arch();
    EnsembleConfig config = tiny_config(4, 0.5);
    EnsembleState seq = init_ensemble(config, arch);
    run_epoch(seq, ring_mixture_spec(), config, arch);
    config.parallel_discriminators = true;
    EnsembleState par = init_ensemble(config, arch);
    run_epoch(par, ring_mixture_spec(), config, arch);
    CHECK(seq == par);
}

TEST_CASE("split mode gives each discriminator its own rows") {
    const Architecture arch = tiny_arch();
    EnsembleConfig config = tiny_config(2, 0.0);
    config.adam.lr = 0.0;
    EnsembleState state = init_ensemble(config, arch);
    state.discriminators[1] = state.discriminators[0];
    const StepRecord split = train_step(state, ring_mixture_spec(), config, arch);
    // Same weights, different slices and latents.
    CHECK(split.d_losses[0] != split.d_losses[1]);

    config.split_batch = false;
    EnsembleState shared = init_ensemble(config, arch);
    shared.discriminators[1] = shared.discriminators[0];
    const StepRecord whole = train_step(shared, ring_mixture_spec(), config, arch);
    CHECK(whole.d_losses[0] == whole.d_losses[1]);
}

TEST_CASE("non-finite values abort with the step index") {
    const Architecture arch = tiny_arch();
    const EnsembleConfig config = tiny_config(2, 0.5);
    EnsembleState state = init_ensemble(config, arch);
    run_epoch(state, ring_mixture_spec(), config, arch);
    state.discriminators[1].tensors[0](0, 0) = std::numeric_limits<double>::quiet_NaN();
    try {
        train_step(state, ring_mixture_spec(), config, arch);
        FAIL("expected an abort");
    } catch (const TrainingAbort& e) {
        CHECK(e.step() == 5);
        CHECK(std::string(e.what()).find("discriminator 1") != std::string::npos);
    }
    CHECK(state.step == 5);
}

TEST_CASE("state and config must agree") {
    const Architecture arch = tiny_arch();
    EnsembleState state = init_ensemble(tiny_config(2, 0.5), arch);
    CHECK_THROWS_AS(train_step(state, ring_mixture_spec(), tiny_config(3, 0.5), arch), ConfigError);
}
