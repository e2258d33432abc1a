// SPDX-License-Identifier: Apache-2.0

#include "dropgan/nets.hpp"

#include "dropgan/rng.hpp"

#include <cmath>
#include <cstring>

namespace dropgan {

std::string_view activation_name(Activation a) {
    switch (a) {
        case Activation::Identity: return "identity";
        case Activation::Relu: return "relu";
        case Activation::LeakyRelu: return "leaky-relu";
        case Activation::Tanh: return "tanh";
        case Activation::Sigmoid: return "sigmoid";
    }
    return "identity";
}

Activation parse_activation(std::string_view name) {
    for (Activation a : {Activation::Identity, Activation::Relu, Activation::LeakyRelu,
                         Activation::Tanh, Activation::Sigmoid}) {
        if (activation_name(a) == name) return a;
    }
    throw ConfigError("unknown activation '" + std::string(name) + "'");
}

void MlpSpec::validate() const {
    if (layer_sizes.size() < 2) {
        throw ConfigError("mlp: need at least an input and an output size");
    }
    for (std::size_t s : layer_sizes) {
        if (s == 0) throw ConfigError("mlp: layer sizes must be >= 1");
    }
}

MlpSpec MlpSpec::toy_generator(std::size_t latent_dim) {
    return MlpSpec{{latent_dim, 128, 128, 2}, Activation::Relu, Activation::Identity};
}

MlpSpec MlpSpec::toy_discriminator() {
    return MlpSpec{{2, 128, 128, 1}, Activation::Relu, Activation::Identity};
}

std::size_t ParamSet::parameter_count() const {
    std::size_t n = 0;
    for (const Matrix& t : tensors) n += static_cast<std::size_t>(t.size());
    return n;
}

bool operator==(const ParamSet& a, const ParamSet& b) {
    if (a.owner != b.owner || a.tensors.size() != b.tensors.size()) return false;
    for (std::size_t i = 0; i < a.tensors.size(); ++i) {
        const Matrix& x = a.tensors[i];
        const Matrix& y = b.tensors[i];
        if (x.rows() != y.rows() || x.cols() != y.cols()) return false;
        if (x.size() != 0 &&
            std::memcmp(x.data(), y.data(), sizeof(double) * static_cast<std::size_t>(x.size())) != 0) {
            return false;
        }
    }
    return true;
}

std::vector<std::string> param_names(std::string_view prefix, std::size_t layers) {
    std::vector<std::string> names;
    names.reserve(2 * layers);
    for (std::size_t i = 0; i < layers; ++i) {
        names.push_back(std::string(prefix) + ".w" + std::to_string(i));
        names.push_back(std::string(prefix) + ".b" + std::to_string(i));
    }
    return names;
}

ParamSet init_mlp(const MlpSpec& spec, std::uint64_t seed, std::string owner, double scale) {
    spec.validate();
    Rng rng(mix_seed(seed));
    ParamSet p;
    p.owner = std::move(owner);
    for (std::size_t i = 0; i < spec.layers(); ++i) {
        const auto in = static_cast<Eigen::Index>(spec.layer_sizes[i]);
        const auto out = static_cast<Eigen::Index>(spec.layer_sizes[i + 1]);
        Matrix w(in, out);
        for (Eigen::Index k = 0; k < w.size(); ++k) w.data()[k] = scale * rng.normal();
        p.tensors.push_back(std::move(w));
        p.tensors.push_back(Matrix::Zero(1, out));
    }
    return p;
}

namespace {

NodeId activate(Graph& g, NodeId x, Activation a) {
    switch (a) {
        case Activation::Identity: return x;
        case Activation::Relu: return g.relu(x);
        case Activation::LeakyRelu: return g.leaky_relu(x, kLeakySlope);
        case Activation::Tanh: return g.tanh(x);
        case Activation::Sigmoid: return g.sigmoid(x);
    }
    return x;
}

}  // namespace

NodeId apply_mlp(Graph& graph, const MlpSpec& spec, std::string_view prefix, NodeId x,
                 bool trainable) {
    const auto names = param_names(prefix, spec.layers());
    NodeId h = x;
    for (std::size_t i = 0; i < spec.layers(); ++i) {
        const NodeId w = trainable ? graph.param(names[2 * i]) : graph.input(names[2 * i]);
        const NodeId b = trainable ? graph.param(names[2 * i + 1]) : graph.input(names[2 * i + 1]);
        h = graph.add_row(graph.matmul(h, w), b);
        h = activate(graph, h, i + 1 == spec.layers() ? spec.output : spec.hidden);
    }
    return h;
}

void bind_params(const ParamSet& params, std::string_view prefix, Bindings& bindings) {
    const auto names = param_names(prefix, params.layers());
    for (std::size_t i = 0; i < names.size(); ++i) bindings[names[i]] = params.tensors[i];
}

std::vector<Matrix> collect_grads(const Gradients& grads, std::string_view prefix,
                                  std::size_t layers) {
    std::vector<Matrix> out;
    for (const auto& name : param_names(prefix, layers)) {
        auto it = grads.find(name);
        if (it == grads.end()) throw Error("collect_grads: no gradient for '" + name + "'");
        out.push_back(it->second);
    }
    return out;
}

double global_norm(const std::vector<Matrix>& tensors) {
    double s = 0.0;
    for (const Matrix& t : tensors) s += t.squaredNorm();
    return std::sqrt(s);
}

namespace {

void check_params(const MlpSpec& spec, const ParamSet& params) {
    spec.validate();
    if (params.layers() != spec.layers()) {
        throw ShapeError("mlp: parameter set has " + std::to_string(params.layers()) +
                         " layers, spec has " + std::to_string(spec.layers()));
    }
}

}  // namespace

Matrix generator_forward(const MlpSpec& spec, const ParamSet& params, const Matrix& z) {
    check_params(spec, params);
    if (static_cast<std::size_t>(z.cols()) != spec.input_size()) {
        throw ShapeError("generator_forward: latent batch is " + shape_str(z) + ", expected " +
                         std::to_string(spec.input_size()) + " columns");
    }
    Graph g;
    apply_mlp(g, spec, "G", g.input("z"), false);
    Bindings b;
    b.emplace("z", z);
    bind_params(params, "G", b);
    return g.forward(b);
}

Matrix discriminator_forward(const MlpSpec& spec, const ParamSet& params, const Matrix& x,
                             Head head) {
    check_params(spec, params);
    if (static_cast<std::size_t>(x.cols()) != spec.input_size()) {
        throw ShapeError("discriminator_forward: sample batch is " + shape_str(x) +
                         ", expected " + std::to_string(spec.input_size()) + " columns");
    }
    Graph g;
    NodeId out = apply_mlp(g, spec, "D", g.input("x"), false);
    if (head == Head::Probability) out = g.sigmoid(out);
    Bindings b;
    b.emplace("x", x);
    bind_params(params, "D", b);
    return g.forward(b);
}

}  // namespace dropgan
