#pragma once

// Scalar reverse-mode automatic differentiation.
//
// A Graph is an append-only tape of scalar nodes. Every operation on Var
// handles records a node eagerly (the primal is computed at construction),
// so the tape is always in topological order. Vars that are not attached to
// a graph are constants and never appear on the tape: mixing them with taped
// values folds into AddConst / MulConst nodes.

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace solis::ad {

enum class Op : std::uint8_t {
    Input,
    Add,
    Sub,
    Mul,
    Neg,
    Reciprocal,
    Tanh,
    Exp,
    Sqrt,
    Softplus,
    Max,
    Abs,
    AddConst,
    MulConst,
};

const char* op_name(Op op);

struct Node {
    double value;
    double imm;     // constant operand for AddConst / MulConst
    std::int32_t a; // first operand; parameter index for Input nodes
    std::int32_t b; // second operand; name slot for Input nodes
    Op op;
};

class Graph;

class Var {
  public:
    Var() = default;
    Var(double constant) : value_(constant) {}  // NOLINT: implicit by design of generic code

    double value() const { return value_; }
    bool is_constant() const { return graph_ == nullptr; }
    std::int32_t id() const { return id_; }
    Graph* graph() const { return graph_; }

  private:
    friend class Graph;
    Var(Graph* g, std::int32_t id, double value) : graph_(g), id_(id), value_(value) {}

    Graph* graph_ = nullptr;
    std::int32_t id_ = -1;
    double value_ = 0.0;
};

// Dense map parameter index -> partial derivative. Indices never touched by
// the expression read as zero.
class GradientMap {
  public:
    GradientMap() = default;
    explicit GradientMap(std::size_t n) : values_(n, 0.0) {}

    double operator[](std::size_t index) const { return index < values_.size() ? values_[index] : 0.0; }
    double& at(std::size_t index);
    std::size_t size() const { return values_.size(); }
    std::span<const double> values() const { return values_; }

  private:
    std::vector<double> values_;
};

using Bindings = std::map<std::string, double, std::less<>>;

class Graph {
  public:
    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    // Named free input. Its value is taken from the bindings on evaluate().
    Var input(const std::string& name, double value = 0.0);
    // Trainable leaf; `index` is its slot in the GradientMap.
    Var parameter(std::size_t index, double value);
    // Convenience: one parameter leaf per entry of `values`, indices offset..offset+n-1.
    std::vector<Var> parameters(std::span<const double> values, std::size_t offset = 0);

    std::size_t size() const { return nodes_.size(); }
    const Node& node(std::int32_t id) const { return nodes_.at(static_cast<std::size_t>(id)); }
    std::size_t parameter_count() const { return parameter_count_; }
    void clear();
    void reserve(std::size_t n) { nodes_.reserve(n); }

    // Re-evaluates every node with the given bindings for named inputs and
    // returns the value of `output`. Cached primals are overwritten.
    double evaluate(const Bindings& bindings, Var output);

    GradientMap backward(Var output) const;
    // Accumulates d(output)/d(parameter) into grad[parameter index].
    void backward_into(Var output, std::span<double> grad) const;

    Var push(Op op, std::int32_t a, std::int32_t b, double value, double imm = 0.0) {
        nodes_.push_back(Node{value, imm, a, b, op});
        return Var(this, static_cast<std::int32_t>(nodes_.size() - 1), value);
    }

  private:
    void check_output(Var output) const;
    void reverse_sweep(Var output, std::vector<double>& adjoint) const;

    std::vector<Node> nodes_;
    std::vector<std::string> input_names_;
    std::unordered_map<std::string, std::int32_t> inputs_by_name_;
    std::size_t parameter_count_ = 0;
    mutable std::vector<double> adjoint_;
};

// --- primitives ------------------------------------------------------------

Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator*(const Var& a, const Var& b);
Var operator/(const Var& a, const Var& b);
Var operator-(const Var& a);

inline Var& operator+=(Var& a, const Var& b) { return a = a + b; }
inline Var& operator-=(Var& a, const Var& b) { return a = a - b; }
inline Var& operator*=(Var& a, const Var& b) { return a = a * b; }

Var reciprocal(const Var& x);
Var tanh(const Var& x);
Var exp(const Var& x);
Var sqrt(const Var& x);
Var softplus(const Var& x);
Var max(const Var& a, const Var& b);
Var abs(const Var& x);

double softplus(double x);
inline double reciprocal(double x) { return 1.0 / x; }
double tanh(double x);
double exp(double x);
double sqrt(double x);
double max(double a, double b);
double abs(double x);

inline double value_of(double x) { return x; }
inline double value_of(const Var& x) { return x.value(); }

}  // namespace solis::ad
