// SPDX-License-Identifier: Apache-2.0
//
// Define-by-run reverse-mode automatic differentiation over dense matrices.
//
// A Graph is an append-only tape of nodes. Leaves are named inputs, named
// parameters or constants; every other node applies one OpKind to earlier
// nodes, so the tape order is a topological order. forward() evaluates
// every node that has not been evaluated yet (the tape may grow between
// calls), backward() differentiates the last node, which must be 1x1.

#pragma once

#include "dropgan/matrix.hpp"

#include <array>
#include <cstddef>
#include <limits>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace dropgan {

enum class OpKind {
    Input,
    Param,
    Constant,
    MatMul,
    AddRowBroadcast,
    Add,
    Mul,
    ScalarMul,
    Relu,
    LeakyRelu,
    Tanh,
    Sigmoid,
    Log,
    Square,
    MeanReduce,
    SumReduce,
    Negate,
    AddConstant,
};

std::string_view op_name(OpKind kind);

/// Handle to a node in one Graph. A default-constructed handle is empty.
struct NodeId {
    static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
    std::size_t index = kNone;

    bool valid() const { return index != kNone; }
    friend bool operator==(NodeId, NodeId) = default;
};

/// Name -> value for the Input and Param leaves of a graph.
using Bindings = std::unordered_map<std::string, Matrix>;
/// Name -> gradient of the root with respect to a Param leaf.
using Gradients = std::map<std::string, Matrix>;

/// Inputs at or below this value are clamped before log is taken.
inline constexpr double kLogFloor = 1e-12;

#ifdef NDEBUG
inline constexpr bool kDefaultFiniteChecks = false;
#else
inline constexpr bool kDefaultFiniteChecks = true;
#endif

class Graph {
public:
    Graph() = default;

    // Leaves. Param and input names share one namespace; asking for an
    // existing name returns the existing node, so a parameter reused in
    // several places accumulates gradient from every use.
    NodeId input(const std::string& name);
    NodeId param(const std::string& name);
    NodeId constant(Matrix value);

    NodeId matmul(NodeId a, NodeId b);
    /// a (n x k) plus row vector b (1 x k) added to every row.
    NodeId add_row(NodeId a, NodeId row);
    NodeId add(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b);
    NodeId scale(NodeId a, double c);
    NodeId relu(NodeId a);
    NodeId leaky_relu(NodeId a, double slope);
    NodeId tanh(NodeId a);
    /// Output clamped to the open interval (0, 1).
    NodeId sigmoid(NodeId a);
    /// Natural log of max(a, kLogFloor); zero derivative inside the clamp.
    NodeId log(NodeId a);
    NodeId square(NodeId a);
    NodeId mean(NodeId a);
    NodeId sum(NodeId a);
    NodeId negate(NodeId a);
    NodeId add_constant(NodeId a, double c);

    /// Evaluates all pending nodes and returns the value of the last one.
    /// Leaves already evaluated keep their values; new bindings only
    /// matter for leaves that have not been evaluated yet.
    const Matrix& forward(const Bindings& bindings);

    /// Gradient of the last node (must be 1x1 and evaluated) with respect
    /// to every Param leaf. Params that do not reach the root get zeros.
    Gradients backward();
    /// Same, differentiating `root` instead of the last node. Nodes
    /// appended after `root` are ignored.
    Gradients backward(NodeId root);

    const Matrix& value(NodeId id) const;
    bool evaluated(NodeId id) const;
    std::size_t size() const { return nodes_.size(); }
    NodeId root() const;
    OpKind kind(NodeId id) const;

    /// When enabled, forward and backward verify every produced value is
    /// finite and name the first offending node. Off by default in
    /// release builds.
    void set_finite_checks(bool enabled) { finite_checks_ = enabled; }

private:
    struct Node {
        OpKind kind;
        std::array<std::size_t, 2> inputs{NodeId::kNone, NodeId::kNone};
        double scalar = 0.0;
        std::string name;
        Matrix value;
        Matrix grad;
        bool evaluated = false;
        bool needs_grad = false;
    };

    NodeId leaf(OpKind kind, const std::string& name);
    NodeId unary(OpKind kind, NodeId a, double scalar = 0.0);
    NodeId binary(OpKind kind, NodeId a, NodeId b);
    const Node& at(NodeId id) const;
    void evaluate(std::size_t index, const Bindings& bindings);
    void propagate(std::size_t index);
    [[noreturn]] void shape_error(std::size_t index, const std::string& detail) const;

    std::vector<Node> nodes_;
    std::unordered_map<std::string, std::size_t> leaves_;
    std::size_t evaluated_count_ = 0;
    bool finite_checks_ = kDefaultFiniteChecks;
};

}  // namespace dropgan
