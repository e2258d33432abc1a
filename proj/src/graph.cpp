// SPDX-License-Identifier: Apache-2.0

#include "dropgan/graph.hpp"

#include <algorithm>
#include <cmath>

namespace dropgan {

std::string_view op_name(OpKind kind) {
    switch (kind) {
        case OpKind::Input: return "input";
        case OpKind::Param: return "param";
        case OpKind::Constant: return "constant";
        case OpKind::MatMul: return "matmul";
        case OpKind::AddRowBroadcast: return "add-broadcast-row";
        case OpKind::Add: return "elementwise-add";
        case OpKind::Mul: return "elementwise-mul";
        case OpKind::ScalarMul: return "scalar-mul";
        case OpKind::Relu: return "relu";
        case OpKind::LeakyRelu: return "leaky-relu";
        case OpKind::Tanh: return "tanh";
        case OpKind::Sigmoid: return "sigmoid";
        case OpKind::Log: return "log";
        case OpKind::Square: return "square";
        case OpKind::MeanReduce: return "mean-reduce";
        case OpKind::SumReduce: return "sum-reduce";
        case OpKind::Negate: return "negate";
        case OpKind::AddConstant: return "add-constant";
    }
    return "unknown";
}

NodeId Graph::leaf(OpKind kind, const std::string& name) {
    if (auto it = leaves_.find(name); it != leaves_.end()) {
        if (nodes_[it->second].kind != kind) {
            throw Error("graph: leaf '" + name + "' already declared as " +
                        std::string(op_name(nodes_[it->second].kind)));
        }
        return NodeId{it->second};
    }
    Node n;
    n.kind = kind;
    n.name = name;
    n.needs_grad = kind == OpKind::Param;
    nodes_.push_back(std::move(n));
    leaves_.emplace(name, nodes_.size() - 1);
    return NodeId{nodes_.size() - 1};
}

NodeId Graph::input(const std::string& name) { return leaf(OpKind::Input, name); }
NodeId Graph::param(const std::string& name) { return leaf(OpKind::Param, name); }

NodeId Graph::constant(Matrix value) {
    Node n;
    n.kind = OpKind::Constant;
    n.value = std::move(value);
    nodes_.push_back(std::move(n));
    return NodeId{nodes_.size() - 1};
}

const Graph::Node& Graph::at(NodeId id) const {
    if (!id.valid() || id.index >= nodes_.size()) {
        throw Error("graph: invalid node handle");
    }
    return nodes_[id.index];
}

NodeId Graph::unary(OpKind kind, NodeId a, double scalar) {
    const bool grad = at(a).needs_grad;
    Node n;
    n.kind = kind;
    n.inputs = {a.index, NodeId::kNone};
    n.scalar = scalar;
    n.needs_grad = grad;
    nodes_.push_back(std::move(n));
    return NodeId{nodes_.size() - 1};
}

NodeId Graph::binary(OpKind kind, NodeId a, NodeId b) {
    const bool grad = at(a).needs_grad || at(b).needs_grad;
    Node n;
    n.kind = kind;
    n.inputs = {a.index, b.index};
    n.needs_grad = grad;
    nodes_.push_back(std::move(n));
    return NodeId{nodes_.size() - 1};
}

NodeId Graph::matmul(NodeId a, NodeId b) { return binary(OpKind::MatMul, a, b); }
NodeId Graph::add_row(NodeId a, NodeId row) { return binary(OpKind::AddRowBroadcast, a, row); }
NodeId Graph::add(NodeId a, NodeId b) { return binary(OpKind::Add, a, b); }
NodeId Graph::mul(NodeId a, NodeId b) { return binary(OpKind::Mul, a, b); }
NodeId Graph::scale(NodeId a, double c) { return unary(OpKind::ScalarMul, a, c); }
NodeId Graph::relu(NodeId a) { return unary(OpKind::Relu, a); }
NodeId Graph::leaky_relu(NodeId a, double slope) { return unary(OpKind::LeakyRelu, a, slope); }
NodeId Graph::tanh(NodeId a) { return unary(OpKind::Tanh, a); }
NodeId Graph::sigmoid(NodeId a) { return unary(OpKind::Sigmoid, a); }
NodeId Graph::log(NodeId a) { return unary(OpKind::Log, a); }
NodeId Graph::square(NodeId a) { return unary(OpKind::Square, a); }
NodeId Graph::mean(NodeId a) { return unary(OpKind::MeanReduce, a); }
NodeId Graph::sum(NodeId a) { return unary(OpKind::SumReduce, a); }
NodeId Graph::negate(NodeId a) { return unary(OpKind::Negate, a); }
NodeId Graph::add_constant(NodeId a, double c) { return unary(OpKind::AddConstant, a, c); }

const Matrix& Graph::value(NodeId id) const {
    const Node& n = at(id);
    if (!n.evaluated) {
        throw Error("graph: node " + std::to_string(id.index) + " has not been evaluated");
    }
    return n.value;
}

bool Graph::evaluated(NodeId id) const { return at(id).evaluated; }

OpKind Graph::kind(NodeId id) const { return at(id).kind; }

NodeId Graph::root() const {
    if (nodes_.empty()) throw Error("graph: empty graph has no root");
    return NodeId{nodes_.size() - 1};
}

void Graph::shape_error(std::size_t index, const std::string& detail) const {
    throw ShapeError("graph: node " + std::to_string(index) + " (" +
                     std::string(op_name(nodes_[index].kind)) + "): " + detail);
}

namespace {

// Kept strictly inside (0, 1) even where the exact value rounds to 0 or 1.
double sigmoid_scalar(double x) {
    constexpr double kBelowOne = 1.0 - 0x1p-53;
    if (x >= 0.0) return std::min(1.0 / (1.0 + std::exp(-x)), kBelowOne);
    const double e = std::exp(x);
    return std::max(e / (1.0 + e), std::numeric_limits<double>::min());
}

}  // namespace

void Graph::evaluate(std::size_t index, const Bindings& bindings) {
    Node& n = nodes_[index];
    const Matrix* a = n.inputs[0] != NodeId::kNone ? &nodes_[n.inputs[0]].value : nullptr;
    const Matrix* b = n.inputs[1] != NodeId::kNone ? &nodes_[n.inputs[1]].value : nullptr;

    switch (n.kind) {
        case OpKind::Input:
        case OpKind::Param: {
            auto it = bindings.find(n.name);
            if (it == bindings.end()) {
                throw Error("graph: node " + std::to_string(index) + " ('" + n.name +
                            "') is not bound");
            }
            n.value = it->second;
            break;
        }
        case OpKind::Constant:
            break;
        case OpKind::MatMul:
            if (a->cols() != b->rows()) {
                shape_error(index, shape_str(*a) + " times " + shape_str(*b));
            }
            n.value.resize(a->rows(), b->cols());
            n.value.noalias() = (*a) * (*b);
            break;
        case OpKind::AddRowBroadcast:
            if (b->rows() != 1 || b->cols() != a->cols()) {
                shape_error(index, "row " + shape_str(*b) + " onto " + shape_str(*a));
            }
            n.value = a->rowwise() + b->row(0);
            break;
        case OpKind::Add:
        case OpKind::Mul:
            if (a->rows() != b->rows() || a->cols() != b->cols()) {
                shape_error(index, shape_str(*a) + " vs " + shape_str(*b));
            }
            if (n.kind == OpKind::Add) {
                n.value = *a + *b;
            } else {
                n.value = a->cwiseProduct(*b);
            }
            break;
        case OpKind::ScalarMul: n.value = n.scalar * (*a); break;
        case OpKind::Relu: n.value = a->cwiseMax(0.0); break;
        case OpKind::LeakyRelu: {
            const double s = n.scalar;
            n.value = a->unaryExpr([s](double x) { return x > 0.0 ? x : s * x; });
            break;
        }
        case OpKind::Tanh: n.value = a->array().tanh().matrix(); break;
        case OpKind::Sigmoid: n.value = a->unaryExpr(&sigmoid_scalar); break;
        case OpKind::Log:
            n.value = a->unaryExpr([](double x) { return std::log(std::max(x, kLogFloor)); });
            break;
        case OpKind::Square: n.value = a->array().square().matrix(); break;
        case OpKind::MeanReduce:
            if (a->size() == 0) shape_error(index, "mean of an empty " + shape_str(*a) + " matrix");
            n.value = scalar_matrix(a->mean());
            break;
        case OpKind::SumReduce: n.value = scalar_matrix(a->sum()); break;
        case OpKind::Negate: n.value = -(*a); break;
        case OpKind::AddConstant: n.value = a->array() + n.scalar; break;
    }
    n.evaluated = true;
    if (finite_checks_ && !all_finite(n.value)) {
        throw NonFiniteError("graph: node " + std::to_string(index) + " (" +
                             std::string(op_name(n.kind)) + ") produced a non-finite value");
    }
}

const Matrix& Graph::forward(const Bindings& bindings) {
    if (nodes_.empty()) throw Error("graph: forward on an empty graph");
    for (std::size_t i = evaluated_count_; i < nodes_.size(); ++i) {
        if (!nodes_[i].evaluated) evaluate(i, bindings);
        evaluated_count_ = i + 1;
    }
    return nodes_.back().value;
}

namespace {

void accumulate(Matrix& target, const Matrix& contribution) {
    if (target.size() == 0) {
        target = contribution;
    } else {
        target += contribution;
    }
}

}  // namespace

void Graph::propagate(std::size_t index) {
    Node& n = nodes_[index];
    if (n.grad.size() == 0) return;  // not reachable from the root
    const Matrix& g = n.grad;
    Node* in_a = n.inputs[0] != NodeId::kNone ? &nodes_[n.inputs[0]] : nullptr;
    Node* in_b = n.inputs[1] != NodeId::kNone ? &nodes_[n.inputs[1]] : nullptr;
    const bool ga = in_a != nullptr && in_a->needs_grad;
    const bool gb = in_b != nullptr && in_b->needs_grad;

    switch (n.kind) {
        case OpKind::Input:
        case OpKind::Param:
        case OpKind::Constant:
            break;
        case OpKind::MatMul:
            if (ga) {
                Matrix d(g.rows(), in_b->value.rows());
                d.noalias() = g * in_b->value.transpose();
                accumulate(in_a->grad, d);
            }
            if (gb) {
                Matrix d(in_a->value.cols(), g.cols());
                d.noalias() = in_a->value.transpose() * g;
                accumulate(in_b->grad, d);
            }
            break;
        case OpKind::AddRowBroadcast:
            if (ga) accumulate(in_a->grad, g);
            if (gb) accumulate(in_b->grad, g.colwise().sum());
            break;
        case OpKind::Add:
            if (ga) accumulate(in_a->grad, g);
            if (gb) accumulate(in_b->grad, g);
            break;
        case OpKind::Mul:
            if (ga) accumulate(in_a->grad, g.cwiseProduct(in_b->value));
            if (gb) accumulate(in_b->grad, g.cwiseProduct(in_a->value));
            break;
        case OpKind::ScalarMul:
            if (ga) accumulate(in_a->grad, n.scalar * g);
            break;
        case OpKind::Relu:
            if (ga) {
                accumulate(in_a->grad,
                           (in_a->value.array() > 0.0).select(g.array(), 0.0).matrix());
            }
            break;
        case OpKind::LeakyRelu:
            if (ga) {
                accumulate(in_a->grad, (in_a->value.array() > 0.0)
                                           .select(g.array(), n.scalar * g.array())
                                           .matrix());
            }
            break;
        case OpKind::Tanh:
            if (ga) {
                accumulate(in_a->grad,
                           (g.array() * (1.0 - n.value.array().square())).matrix());
            }
            break;
        case OpKind::Sigmoid:
            if (ga) {
                accumulate(in_a->grad,
                           (g.array() * n.value.array() * (1.0 - n.value.array())).matrix());
            }
            break;
        case OpKind::Log:
            if (ga) {
                const Matrix& x = in_a->value;
                accumulate(in_a->grad, (x.array() > kLogFloor)
                                           .select(g.array() / x.array(), 0.0)
                                           .matrix());
            }
            break;
        case OpKind::Square:
            if (ga) accumulate(in_a->grad, (2.0 * g.array() * in_a->value.array()).matrix());
            break;
        case OpKind::MeanReduce:
            if (ga) {
                const double share = g(0, 0) / static_cast<double>(in_a->value.size());
                accumulate(in_a->grad,
                           Matrix::Constant(in_a->value.rows(), in_a->value.cols(), share));
            }
            break;
        case OpKind::SumReduce:
            if (ga) {
                accumulate(in_a->grad,
                           Matrix::Constant(in_a->value.rows(), in_a->value.cols(), g(0, 0)));
            }
            break;
        case OpKind::Negate:
            if (ga) accumulate(in_a->grad, -g);
            break;
        case OpKind::AddConstant:
            if (ga) accumulate(in_a->grad, g);
            break;
    }
}

Gradients Graph::backward() { return backward(root()); }

Gradients Graph::backward(NodeId root_id) {
    at(root_id);
    const std::size_t root = root_id.index;
    if (!nodes_[root].evaluated) {
        throw Error("graph: backward called before forward");
    }
    if (nodes_[root].value.rows() != 1 || nodes_[root].value.cols() != 1) {
        throw ShapeError("graph: backward needs a 1x1 root, got " +
                         shape_str(nodes_[root].value));
    }
    for (Node& n : nodes_) n.grad.resize(0, 0);
    nodes_[root].grad = scalar_matrix(1.0);

    for (std::size_t i = root + 1; i-- > 0;) {
        if (!nodes_[i].needs_grad) continue;
        propagate(i);
        if (finite_checks_ && nodes_[i].grad.size() != 0 && !all_finite(nodes_[i].grad)) {
            throw NonFiniteError("graph: gradient at node " + std::to_string(i) + " (" +
                                 std::string(op_name(nodes_[i].kind)) + ") is non-finite");
        }
    }

    Gradients out;
    for (const Node& n : nodes_) {
        if (n.kind != OpKind::Param) continue;
        if (n.grad.size() == 0) {
            out.emplace(n.name, Matrix::Zero(n.value.rows(), n.value.cols()));
        } else {
            out.emplace(n.name, n.grad);
        }
    }
    return out;
}

}  // namespace dropgan
