// SPDX-License-Identifier: Apache-2.0

#include "dropgan/nets.hpp"
#include "dropgan/rng.hpp"

#include <doctest.h>

#include <cmath>

using namespace dropgan;

namespace {

Matrix randn(Rng& rng, Eigen::Index r, Eigen::Index c) {
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
    return m;
}

ParamSet zeros_like(const MlpSpec& spec) {
    ParamSet p = init_mlp(spec, 0, "zero");
    for (Matrix& t : p.tensors) t.setZero();
    return p;
}

double act(Activation a, double x) {
    switch (a) {
        case Activation::Identity: return x;
        case Activation::Relu: return x > 0 ? x : 0;
        case Activation::LeakyRelu: return x > 0 ? x : kLeakySlope * x;
        case Activation::Tanh: return std::tanh(x);
        case Activation::Sigmoid: return 1 / (1 + std::exp(-x));
    }
    return x;
}

// Row-at-a-time loops, independent of Eigen products.
std::vector<double> hand_forward(const MlpSpec& spec, const ParamSet& p, std::vector<double> x) {
    for (std::size_t l = 0; l < spec.layers(); ++l) {
        const Matrix& w = p.weight(l);
        const Matrix& b = p.bias(l);
        std::vector<double> y(static_cast<std::size_t>(w.cols()));
        for (Eigen::Index j = 0; j < w.cols(); ++j) {
            double s = b(0, j);
            for (Eigen::Index i = 0; i < w.rows(); ++i) s += x[static_cast<std::size_t>(i)] * w(i, j);
            y[static_cast<std::size_t>(j)] = act(l + 1 == spec.layers() ? spec.output : spec.hidden, s);
        }
        x = std::move(y);
    }
    return x;
}

}  // namespace

TEST_CASE("init is deterministic, seed dependent, zero bias") {
    const MlpSpec spec{{2, 4, 1}};
    const ParamSet a = init_mlp(spec, 1, "d");
    CHECK(a == init_mlp(spec, 1, "d"));
    CHECK_FALSE(a == init_mlp(spec, 2, "d"));
    for (std::size_t l = 0; l < a.layers(); ++l) CHECK(a.bias(l).isZero(0.0));
    CHECK(a.weight(0).rows() == 2);
    CHECK(a.weight(0).cols() == 4);
    CHECK(a.bias(1).cols() == 1);
    CHECK(a.parameter_count() == 2 * 4 + 4 + 4 + 1);
}

TEST_CASE("init scale is 0.02") {
    const ParamSet p = init_mlp(MlpSpec::toy_discriminator(), 3, "d");
    double ss = 0.0;
    Eigen::Index n = 0;
    for (std::size_t l = 0; l < p.layers(); ++l) {
        ss += p.weight(l).squaredNorm();
        n += p.weight(l).size();
    }
    CHECK(std::sqrt(ss / static_cast<double>(n)) == doctest::Approx(0.02).epsilon(0.03));
}

TEST_CASE("spec validation") {
    CHECK_THROWS_AS((MlpSpec{{2}}).validate(), ConfigError);
    CHECK_THROWS_AS((MlpSpec{{2, 0, 1}}).validate(), ConfigError);
    CHECK_NOTHROW(MlpSpec::toy_generator().validate());
    CHECK(MlpSpec::toy_generator().layer_sizes == std::vector<std::size_t>{256, 128, 128, 2});
    CHECK(MlpSpec::toy_discriminator().layer_sizes == std::vector<std::size_t>{2, 128, 128, 1});
}

TEST_CASE("generator forward") {
    const MlpSpec spec = MlpSpec::toy_generator(8);
    Rng rng(1);
    SUBCASE("zero network") {
        const Matrix out = generator_forward(spec, zeros_like(spec), randn(rng, 5, 8));
        CHECK(out.rows() == 5);
        CHECK(out.isZero(0.0));
    }
    SUBCASE("empty batch") {
        const Matrix out = generator_forward(spec, init_mlp(spec, 3, "G"), Matrix(0, 8));
        CHECK(out.rows() == 0);
        CHECK(out.cols() == 2);
    }
    SUBCASE("matches hand loops") {
        const ParamSet p = init_mlp(spec, 3, "G", 0.5);
        const Matrix z = randn(rng, 2, 8);
        const Matrix out = generator_forward(spec, p, z);
        for (Eigen::Index r = 0; r < 2; ++r) {
            const auto expect = hand_forward(spec, p, std::vector<double>(z.row(r).data(), z.row(r).data() + 8));
            CHECK(out(r, 0) == doctest::Approx(expect[0]).epsilon(1e-12));
            CHECK(out(r, 1) == doctest::Approx(expect[1]).epsilon(1e-12));
        }
    }
    SUBCASE("shape mismatch") {
        CHECK_THROWS_AS(generator_forward(spec, init_mlp(spec, 3, "G"), Matrix::Zero(2, 7)), ShapeError);
    }
}

TEST_CASE("discriminator heads") {
    const MlpSpec spec = MlpSpec::toy_discriminator();
    Rng rng(2);
    const Matrix x = randn(rng, 6, 2);
    const ParamSet zero = zeros_like(spec);
    CHECK((discriminator_forward(spec, zero, x, Head::Probability).array() == 0.5).all());
    CHECK(discriminator_forward(spec, zero, x, Head::Raw).isZero(0.0));

    const ParamSet big = init_mlp(spec, 4, "D", 3.0);
    Matrix far = randn(rng, 200, 2) * 50.0;
    const Matrix s = discriminator_forward(spec, big, far, Head::Probability);
    CHECK((s.array() > 0.0).all());
    CHECK((s.array() < 1.0).all());
}

TEST_CASE("batch forward equals stacked single rows") {
    const MlpSpec spec{{5, 16, 9, 2}, Activation::LeakyRelu, Activation::Identity};
    const ParamSet p = init_mlp(spec, 8, "G", 0.4);
    Rng rng(9);
    const Matrix z = randn(rng, 13, 5);
    const Matrix all = generator_forward(spec, p, z);
    for (Eigen::Index r = 0; r < z.rows(); ++r) {
        const Matrix one = generator_forward(spec, p, z.row(r));
        CHECK(std::abs(one(0, 0) - all(r, 0)) < 1e-12);
        CHECK(std::abs(one(0, 1) - all(r, 1)) < 1e-12);
    }
}

TEST_CASE("param names and grads round trip") {
    CHECK(param_names("G", 2) == std::vector<std::string>{"G.w0", "G.b0", "G.w1", "G.b1"});
    const MlpSpec spec{{2, 3, 1}};
    const ParamSet p = init_mlp(spec, 1, "D");
    Bindings b;
    bind_params(p, "D", b);
    CHECK(b.at("D.w1") == p.weight(1));
    CHECK(global_norm({make_matrix({{3, 0}}), make_matrix({{4}})}) == 5.0);
    CHECK(parse_activation(activation_name(Activation::LeakyRelu)) == Activation::LeakyRelu);
    CHECK_THROWS_AS(parse_activation("swish"), ConfigError);
}
