// SPDX-License-Identifier: Apache-2.0
//
// Multilayer perceptrons for the generator and the discriminators.

#pragma once

#include "dropgan/graph.hpp"

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace dropgan {

enum class Activation { Identity, Relu, LeakyRelu, Tanh, Sigmoid };

inline constexpr double kLeakySlope = 0.2;

std::string_view activation_name(Activation a);
Activation parse_activation(std::string_view name);

struct MlpSpec {
    std::vector<std::size_t> layer_sizes;  // input, hidden..., output
    Activation hidden = Activation::Relu;
    Activation output = Activation::Identity;

    std::size_t input_size() const { return layer_sizes.front(); }
    std::size_t output_size() const { return layer_sizes.back(); }
    std::size_t layers() const { return layer_sizes.size() - 1; }

    /// Throws ConfigError unless there are >= 2 sizes, all positive.
    void validate() const;

    static MlpSpec toy_generator(std::size_t latent_dim = 256);
    static MlpSpec toy_discriminator();

    friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

/// Weights and biases of one MLP, stored as w0, b0, w1, b1, ...
/// Weight i is (in x out), bias i is (1 x out).
struct ParamSet {
    std::string owner;
    std::vector<Matrix> tensors;

    std::size_t layers() const { return tensors.size() / 2; }
    Matrix& weight(std::size_t i) { return tensors[2 * i]; }
    const Matrix& weight(std::size_t i) const { return tensors[2 * i]; }
    Matrix& bias(std::size_t i) { return tensors[2 * i + 1]; }
    const Matrix& bias(std::size_t i) const { return tensors[2 * i + 1]; }
    std::size_t parameter_count() const;

    /// Bitwise equality of every tensor.
    friend bool operator==(const ParamSet& a, const ParamSet& b);
};

/// "<prefix>.w<i>" / "<prefix>.b<i>", in ParamSet tensor order.
std::vector<std::string> param_names(std::string_view prefix, std::size_t layers);

/// Weights ~ Normal(0, scale^2), biases 0; a pure function of (spec, seed).
ParamSet init_mlp(const MlpSpec& spec, std::uint64_t seed, std::string owner,
                  double scale = 0.02);

/// Appends the MLP to `graph` applied to `x`. With `trainable`, weights are
/// Param leaves (gradients reported); otherwise they are Input leaves that
/// still pass gradient through to `x` but get none themselves.
NodeId apply_mlp(Graph& graph, const MlpSpec& spec, std::string_view prefix, NodeId x,
                 bool trainable);

void bind_params(const ParamSet& params, std::string_view prefix, Bindings& bindings);

/// Gradients in ParamSet tensor order.
std::vector<Matrix> collect_grads(const Gradients& grads, std::string_view prefix,
                                  std::size_t layers);

/// L2 norm over all entries of all tensors.
double global_norm(const std::vector<Matrix>& tensors);

enum class Head { Probability, Raw };

Matrix generator_forward(const MlpSpec& spec, const ParamSet& params, const Matrix& z);
Matrix discriminator_forward(const MlpSpec& spec, const ParamSet& params, const Matrix& x,
                             Head head);

}  // namespace dropgan
