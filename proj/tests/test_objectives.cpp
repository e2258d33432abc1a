// SPDX-License-Identifier: Apache-2.0

#include "dropgan/objectives.hpp"
#include "dropgan/rng.hpp"

#include <doctest.h>

#include <cmath>

using namespace dropgan;

namespace {

Matrix filled(Eigen::Index n, double v) { return Matrix::Constant(n, 1, v); }

double eval_d(ObjectiveKind k, const Matrix& real, const Matrix& fake) {
    Graph g;
    const Head h = required_head(k);
    d_loss(g, k, Scores{g.input("r"), h}, Scores{g.input("f"), h});
    return g.forward({{"r", real}, {"f", fake}})(0, 0);
}

double eval_g(ObjectiveKind k, const Matrix& fake) {
    Graph g;
    g_loss(g, k, Scores{g.input("f"), required_head(k)});
    return g.forward({{"f", fake}})(0, 0);
}

// Leaves l0..l{K-1} holding the given scalar losses.
struct Losses {
    Graph g;
    std::vector<NodeId> nodes;
    Bindings b;
    explicit Losses(const std::vector<double>& values) {
        for (std::size_t i = 0; i < values.size(); ++i) {
            const std::string n = "l" + std::to_string(i);
            nodes.push_back(g.param(n));
            b[n] = scalar_matrix(values[i]);
        }
        g.forward(b);
    }
    NodeId total;
    double aggregate(AggregationMode mode, const DropoutMask& mask) {
        total = aggregate_g_loss(g, mode, nodes, mask);
        g.forward(b);
        return g.value(total)(0, 0);
    }
    Gradients grads() { return g.backward(total); }
};

AggregationMode mode_of(AggregationMode::Kind k) { return AggregationMode{k, false}; }

}  // namespace

TEST_CASE("discriminator loss values") {
    CHECK(eval_d(ObjectiveKind::GanMinimax, filled(4, 0.5), filled(3, 0.5)) ==
          doctest::Approx(2 * std::log(2.0)).epsilon(1e-14));
    CHECK(eval_d(ObjectiveKind::LsGan, filled(4, 1.0), filled(3, 0.0)) == 0.0);
    CHECK(eval_d(ObjectiveKind::GanMinimax, filled(4, 0.9), filled(3, 0.1)) ==
          doctest::Approx(-2 * std::log(0.9)).epsilon(1e-14));
    CHECK(eval_d(ObjectiveKind::GanMinimax, filled(4, 0.9), filled(3, 0.1)) == doctest::Approx(0.2107).epsilon(1e-4));
}

TEST_CASE("generator loss values") {
    CHECK(eval_g(ObjectiveKind::GanMinimax, filled(5, 0.5)) == doctest::Approx(std::log(0.5)).epsilon(1e-14));
    CHECK(eval_g(ObjectiveKind::GanNonSaturating, filled(5, 0.5)) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
    CHECK(eval_g(ObjectiveKind::LsGan, filled(5, 1.0)) == 0.0);
}

TEST_CASE("d_loss is the negated game value") {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        Matrix r(7, 1), f(5, 1);
        for (Eigen::Index i = 0; i < r.size(); ++i) r.data()[i] = 0.01 + 0.98 * rng.uniform();
        for (Eigen::Index i = 0; i < f.size(); ++i) f.data()[i] = 0.01 + 0.98 * rng.uniform();
        const double value = r.array().log().mean() + (1.0 - f.array()).log().mean();
        CHECK(std::abs(eval_d(ObjectiveKind::GanMinimax, r, f) + value) < 1e-12);
    }
}

TEST_CASE("head and kind must agree") {
    Graph g;
    const NodeId s = g.input("s");
    CHECK_THROWS_AS(g_loss(g, ObjectiveKind::LsGan, Scores{s, Head::Probability}), Error);
    CHECK_THROWS_AS(d_loss(g, ObjectiveKind::GanMinimax, Scores{s, Head::Raw}, Scores{s, Head::Raw}), Error);
    CHECK(parse_objective("gan-nonsaturating") == ObjectiveKind::GanNonSaturating);
    CHECK_THROWS_AS(parse_objective("wgan"), ConfigError);
}

TEST_CASE("aggregation examples") {
    {
        Losses l({1, 2, 3});
        CHECK(l.aggregate(mode_of(AggregationMode::Kind::Dropout), DropoutMask{{1, 0, 1}, std::nullopt}) == 4.0);
    }
    {
        Losses l({1, 2, 3});
        CHECK(l.aggregate(mode_of(AggregationMode::Kind::GmanMean), DropoutMask::all_kept(3)) == 2.0);
    }
    {
        Losses l({1, 2, 3});
        CHECK(l.aggregate(mode_of(AggregationMode::Kind::GmanMax), DropoutMask::all_kept(3)) == 3.0);
    }
    {
        Losses l({5, 7, 9, 11});
        CHECK(l.aggregate(mode_of(AggregationMode::Kind::Dropout), DropoutMask{{0, 0, 0, 0}, 1}) == 7.0);
    }
    {
        Losses l({1, 2, 3});
        AggregationMode m{AggregationMode::Kind::Dropout, true};
        CHECK(l.aggregate(m, DropoutMask{{1, 0, 1}, std::nullopt}) == 2.0);
    }
}

TEST_CASE("aggregation errors") {
    {
        Losses l({1, 2, 3});
        CHECK_THROWS_AS(l.aggregate(mode_of(AggregationMode::Kind::Dropout), DropoutMask{{0, 0, 0}, std::nullopt}),
                        Error);
    }
    {
        Losses l({1, 2});
        CHECK_THROWS_AS(l.aggregate(mode_of(AggregationMode::Kind::Single), DropoutMask::all_kept(2)), Error);
    }
    {
        Losses l({4});
        CHECK(l.aggregate(mode_of(AggregationMode::Kind::Single), DropoutMask::all_kept(1)) == 4.0);
    }
}

TEST_CASE("gradient reaches exactly the kept losses") {
    Rng rng(17);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t k = 1 + rng.index(6);
        std::vector<double> values(k);
        DropoutMask mask;
        for (std::size_t i = 0; i < k; ++i) {
            values[i] = rng.normal();
            mask.bits.push_back(rng.bernoulli(0.5) ? 1 : 0);
        }
        if (std::count(mask.bits.begin(), mask.bits.end(), 1) == 0) mask.fallback_index = rng.index(k);
        Losses l(values);
        l.aggregate(mode_of(AggregationMode::Kind::Dropout), mask);
        const Gradients g = l.grads();
        const auto who = mask.contributors();
        for (std::size_t i = 0; i < k; ++i) {
            const bool kept = std::find(who.begin(), who.end(), i) != who.end();
            CHECK(g.at("l" + std::to_string(i))(0, 0) == (kept ? 1.0 : 0.0));
        }
    }
}

TEST_CASE("all-ones mask sums, single survivor is exact") {
    Losses all({0.3, -1.25, 2.5});
    CHECK(all.aggregate(mode_of(AggregationMode::Kind::Dropout), DropoutMask::all_kept(3)) == 0.3 + -1.25 + 2.5);
    Losses one({0.3, -1.25, 2.5});
    CHECK(one.aggregate(mode_of(AggregationMode::Kind::Dropout), DropoutMask{{0, 1, 0}, std::nullopt}) == -1.25);
}

TEST_CASE("gman-1 gradient goes to the argmax, lowest index on ties") {
    Losses l({2, 5, 5, 1});
    CHECK(l.aggregate(mode_of(AggregationMode::Kind::GmanMax), DropoutMask::all_kept(4)) == 5.0);
    const Gradients g = l.grads();
    CHECK(g.at("l0")(0, 0) == 0.0);
    CHECK(g.at("l1")(0, 0) == 1.0);
    CHECK(g.at("l2")(0, 0) == 0.0);
    CHECK(g.at("l3")(0, 0) == 0.0);
}

TEST_CASE("mask helpers") {
    const DropoutMask m{{0, 1, 1, 0}, std::nullopt};
    CHECK(m.contributors() == std::vector<std::size_t>{1, 2});
    CHECK_FALSE(m.fallback_fired());
    const DropoutMask f{{0, 0}, 1};
    CHECK(f.contributors() == std::vector<std::size_t>{1});
    CHECK(f.fallback_fired());
    CHECK(parse_aggregation(aggregation_name(AggregationMode::Kind::GmanMean)) == AggregationMode::Kind::GmanMean);
}
