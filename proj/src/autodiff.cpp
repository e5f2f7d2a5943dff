#include "solis/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "solis/error.hpp"

namespace solis::ad {

const char* op_name(Op op) {
    switch (op) {
        case Op::Input: return "input";
        case Op::Add: return "add";
        case Op::Sub: return "sub";
        case Op::Mul: return "mul";
        case Op::Neg: return "neg";
        case Op::Reciprocal: return "reciprocal";
        case Op::Tanh: return "tanh";
        case Op::Exp: return "exp";
        case Op::Sqrt: return "sqrt";
        case Op::Softplus: return "softplus";
        case Op::Max: return "max";
        case Op::Abs: return "abs";
        case Op::AddConst: return "add_const";
        case Op::MulConst: return "mul_const";
    }
    return "?";
}

double& GradientMap::at(std::size_t index) {
    if (index >= values_.size()) values_.resize(index + 1, 0.0);
    return values_[index];
}

Var Graph::input(const std::string& name, double value) {
    if (inputs_by_name_.contains(name)) throw UsageError("duplicate graph input '" + name + "'");
    const auto slot = static_cast<std::int32_t>(input_names_.size());
    input_names_.push_back(name);
    Var v = push(Op::Input, -1, slot, value);
    inputs_by_name_.emplace(name, v.id());
    return v;
}

Var Graph::parameter(std::size_t index, double value) {
    parameter_count_ = std::max(parameter_count_, index + 1);
    return push(Op::Input, static_cast<std::int32_t>(index), -1, value);
}

std::vector<Var> Graph::parameters(std::span<const double> values, std::size_t offset) {
    std::vector<Var> out;
    out.reserve(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) out.push_back(parameter(offset + i, values[i]));
    return out;
}

void Graph::clear() {
    nodes_.clear();
    input_names_.clear();
    inputs_by_name_.clear();
    parameter_count_ = 0;
}

namespace {

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double apply(Op op, double a, double b, double imm) {
    switch (op) {
        case Op::Add: return a + b;
        case Op::Sub: return a - b;
        case Op::Mul: return a * b;
        case Op::Neg: return -a;
        case Op::Reciprocal: return 1.0 / a;
        case Op::Tanh: return std::tanh(a);
        case Op::Exp: return std::exp(a);
        case Op::Sqrt: return std::sqrt(a);
        case Op::Softplus: return softplus(a);
        case Op::Max: return a >= b ? a : b;
        case Op::Abs: return std::fabs(a);
        case Op::AddConst: return a + imm;
        case Op::MulConst: return a * imm;
        case Op::Input: break;
    }
    return a;
}

}  // namespace

double Graph::evaluate(const Bindings& bindings, Var output) {
    check_output(output);
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        Node& n = nodes_[i];
        if (n.op == Op::Input) {
            if (n.b >= 0) {
                const std::string& name = input_names_[static_cast<std::size_t>(n.b)];
                auto it = bindings.find(name);
                if (it == bindings.end()) throw ConfigError("unbound graph input '" + name + "'");
                n.value = it->second;
            }
        } else {
            const double a = nodes_[static_cast<std::size_t>(n.a)].value;
            const double b = n.b >= 0 ? nodes_[static_cast<std::size_t>(n.b)].value : 0.0;
            n.value = apply(n.op, a, b, n.imm);
        }
        if (!std::isfinite(n.value)) {
            std::ostringstream msg;
            msg << "non-finite value " << n.value << " at node " << i << " (" << op_name(n.op) << ")";
            throw NumericError(msg.str());
        }
    }
    return nodes_[static_cast<std::size_t>(output.id())].value;
}

void Graph::check_output(Var output) const {
    if (output.graph() != this || output.id() < 0 || static_cast<std::size_t>(output.id()) >= nodes_.size())
        throw UsageError("output node does not belong to this graph");
}

void Graph::reverse_sweep(Var output, std::vector<double>& adj) const {
    check_output(output);
    const auto out = static_cast<std::size_t>(output.id());
    adj.assign(out + 1, 0.0);
    adj[out] = 1.0;
    const Node* nodes = nodes_.data();
    double* g = adj.data();
    for (std::size_t i = out + 1; i-- > 0;) {
        const double gi = g[i];
        if (gi == 0.0) continue;
        const Node& n = nodes[i];
        switch (n.op) {
            case Op::Input: break;
            case Op::Add:
                g[n.a] += gi;
                g[n.b] += gi;
                break;
            case Op::Sub:
                g[n.a] += gi;
                g[n.b] -= gi;
                break;
            case Op::Mul:
                g[n.a] += gi * nodes[n.b].value;
                g[n.b] += gi * nodes[n.a].value;
                break;
            case Op::Neg: g[n.a] -= gi; break;
            case Op::Reciprocal: g[n.a] -= gi * n.value * n.value; break;
            case Op::Tanh: g[n.a] += gi * (1.0 - n.value * n.value); break;
            case Op::Exp: g[n.a] += gi * n.value; break;
            case Op::Sqrt: g[n.a] += gi * 0.5 / n.value; break;
            case Op::Softplus: g[n.a] += gi * sigmoid(nodes[n.a].value); break;
            case Op::Max:
                if (nodes[n.a].value >= nodes[n.b].value)
                    g[n.a] += gi;
                else
                    g[n.b] += gi;
                break;
            case Op::Abs: {
                const double x = nodes[n.a].value;
                g[n.a] += gi * (x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0));
                break;
            }
            case Op::AddConst: g[n.a] += gi; break;
            case Op::MulConst: g[n.a] += gi * n.imm; break;
        }
    }
}

GradientMap Graph::backward(Var output) const {
    reverse_sweep(output, adjoint_);
    GradientMap grad(parameter_count_);
    for (std::size_t i = 0; i < adjoint_.size(); ++i) {
        const Node& n = nodes_[i];
        if (n.op == Op::Input && n.a >= 0) grad.at(static_cast<std::size_t>(n.a)) += adjoint_[i];
    }
    return grad;
}

void Graph::backward_into(Var output, std::span<double> grad) const {
    reverse_sweep(output, adjoint_);
    for (std::size_t i = 0; i < adjoint_.size(); ++i) {
        const Node& n = nodes_[i];
        if (n.op == Op::Input && n.a >= 0) {
            const auto p = static_cast<std::size_t>(n.a);
            if (p >= grad.size()) throw UsageError("gradient buffer smaller than parameter count");
            grad[p] += adjoint_[i];
        }
    }
}

// --- primitives ------------------------------------------------------------

namespace {

Graph* common_graph(const Var& a, const Var& b) {
    if (a.graph() != b.graph()) throw UsageError("operands belong to different graphs");
    return a.graph();
}

Var add_const(const Var& x, double c) {
    if (c == 0.0) return x;
    return x.graph()->push(Op::AddConst, x.id(), -1, x.value() + c, c);
}

Var mul_const(const Var& x, double c) {
    if (c == 1.0) return x;
    if (c == 0.0) return Var(0.0);
    return x.graph()->push(Op::MulConst, x.id(), -1, x.value() * c, c);
}

Var unary(Op op, const Var& x, double value) {
    if (x.is_constant()) return Var(value);
    return x.graph()->push(op, x.id(), -1, value);
}

}  // namespace

Var operator+(const Var& a, const Var& b) {
    if (a.is_constant()) return b.is_constant() ? Var(a.value() + b.value()) : add_const(b, a.value());
    if (b.is_constant()) return add_const(a, b.value());
    return common_graph(a, b)->push(Op::Add, a.id(), b.id(), a.value() + b.value());
}

Var operator-(const Var& a) { return unary(Op::Neg, a, -a.value()); }

Var operator-(const Var& a, const Var& b) {
    if (b.is_constant()) return a.is_constant() ? Var(a.value() - b.value()) : add_const(a, -b.value());
    if (a.is_constant()) return add_const(-b, a.value());
    return common_graph(a, b)->push(Op::Sub, a.id(), b.id(), a.value() - b.value());
}

Var operator*(const Var& a, const Var& b) {
    if (a.is_constant()) return b.is_constant() ? Var(a.value() * b.value()) : mul_const(b, a.value());
    if (b.is_constant()) return mul_const(a, b.value());
    return common_graph(a, b)->push(Op::Mul, a.id(), b.id(), a.value() * b.value());
}

Var reciprocal(const Var& x) { return unary(Op::Reciprocal, x, 1.0 / x.value()); }

Var operator/(const Var& a, const Var& b) {
    if (b.is_constant()) return a * Var(1.0 / b.value());
    return a * reciprocal(b);
}

Var tanh(const Var& x) { return unary(Op::Tanh, x, std::tanh(x.value())); }
Var exp(const Var& x) { return unary(Op::Exp, x, std::exp(x.value())); }
Var sqrt(const Var& x) { return unary(Op::Sqrt, x, std::sqrt(x.value())); }
Var softplus(const Var& x) { return unary(Op::Softplus, x, softplus(x.value())); }
Var abs(const Var& x) { return unary(Op::Abs, x, std::fabs(x.value())); }

Var max(const Var& a, const Var& b) {
    if (a.is_constant() && b.is_constant()) return Var(std::max(a.value(), b.value()));
    if (a.is_constant() || b.is_constant()) {
        // Only the taped operand can carry a gradient; the constant branch is flat.
        const Var& taped = a.is_constant() ? b : a;
        const Var& fixed = a.is_constant() ? a : b;
        if (taped.value() >= fixed.value()) return taped.graph()->push(Op::AddConst, taped.id(), -1, taped.value(), 0.0);
        return fixed;
    }
    return common_graph(a, b)->push(Op::Max, a.id(), b.id(), std::max(a.value(), b.value()));
}

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
double tanh(double x) { return std::tanh(x); }
double exp(double x) { return std::exp(x); }
double sqrt(double x) { return std::sqrt(x); }
double max(double a, double b) { return a >= b ? a : b; }
double abs(double x) { return std::fabs(x); }

}  // namespace solis::ad
