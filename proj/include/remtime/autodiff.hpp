#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace remtime::ad {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major float64 array. Parameters are Tensors owned by layers;
/// activations only live inside a Graph.
struct Tensor {
    Shape shape;
    std::vector<double> values;
    bool requires_grad = false;
    std::vector<double> grad;  // empty until the first backward pass touches it

    Tensor() = default;
    explicit Tensor(Shape s, double fill = 0.0);
    Tensor(Shape s, std::vector<double> v);

    static Tensor scalar(double v);

    std::size_t size() const { return values.size(); }
    bool has_grad() const { return !grad.empty(); }
    void zero_grad();

    double& operator[](std::size_t i) { return values[i]; }
    double operator[](std::size_t i) const { return values[i]; }
};

class Graph;

/// Handle to a node of a Graph. Cheap to copy; only valid while the graph lives.
class Var {
public:
    Var() = default;

    bool valid() const { return graph_ != nullptr; }
    std::size_t id() const { return id_; }
    Graph& graph() const { return *graph_; }

    Shape shape() const;
    const std::vector<double>& values() const;
    std::size_t size() const { return values().size(); }
    double item() const;

private:
    friend class Graph;
    Var(Graph* g, std::size_t id) : graph_(g), id_(id) {}

    Graph* graph_ = nullptr;
    std::size_t id_ = 0;
};

/// Tape of primitive operations in creation (hence topological) order.
///
/// A graph is single-threaded. Parameter leaves reference the caller's Tensor
/// without copying it, so the tensor must outlive the graph and stay unchanged
/// until backward() returns.
class Graph {
public:
    using BackwardFn = std::function<void(Graph&, std::size_t)>;

    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    Var constant(Tensor value);
    Var constant(Shape shape, std::vector<double> values);
    Var parameter(const Tensor& t);

    /// Appends a primitive. `fn` reads grad(self) and adds into its inputs' grads.
    Var record(const char* op, Tensor value, std::vector<std::size_t> inputs, BackwardFn fn);

    /// Reverse sweep from a single-element output.
    void backward(Var output);
    /// As above, then adds each parameter's gradient into its Tensor::grad
    /// (zeros for parameters that did not participate).
    void backward(Var output, std::span<Tensor* const> params);

    const Tensor& value(std::size_t id) const;
    const char* op(std::size_t id) const { return nodes_[id].op; }
    const std::vector<std::size_t>& inputs(std::size_t id) const { return nodes_[id].inputs; }
    std::size_t size() const { return nodes_.size(); }

    /// Gradient buffer of a node, allocated (zeroed) on first access.
    std::vector<double>& grad_buffer(std::size_t id);
    bool has_grad(std::size_t id) const { return !nodes_[id].grad.empty(); }

    /// Gradient of a parameter leaf after backward(); zeros if it was not used.
    std::vector<double> grad_of(const Tensor& param) const;

private:
    struct Node {
        const char* op = "";
        Tensor value;
        const Tensor* external = nullptr;
        std::vector<std::size_t> inputs;
        BackwardFn backward;
        std::vector<double> grad;
    };

    std::vector<Node> nodes_;
    std::unordered_map<const Tensor*, std::size_t> param_nodes_;
};

// Primitives. Shape mismatches raise DimensionError naming the primitive.

Var matmul(Var a, Var b);                 // [m,k] x [k,n] -> [m,n]
Var add(Var a, Var b);                    // same shape
Var sub(Var a, Var b);
Var mul(Var a, Var b);                    // elementwise
Var add_bias(Var a, Var bias);            // bias [n] broadcast over the last axis of a
Var scale(Var a, double c);
Var add_const(Var a, double c);
Var mul_scalar(Var a, Var s);             // s holds one element
Var add_scalar(Var a, Var s);
Var exp(Var a);
Var log(Var a);
Var sigmoid(Var a);
Var tanh(Var a);
Var relu(Var a);
Var square(Var a);
Var sum(Var a);                           // -> [1]
Var mean(Var a);                          // -> [1]
Var reshape(Var a, Shape shape);
Var slice_cols(Var a, std::size_t begin, std::size_t end);  // 2-D column range
Var concat_cols(std::span<const Var> parts);                 // 2-D, equal row counts
Var time_step(Var x, std::size_t t);      // [B,L,D] -> [B,D]
/// Valid 1-D cross-correlation: [B,L,Cin] with kernel [K,Cin,Cout] -> [B,L-K+1,Cout].
Var conv1d(Var x, Var kernel);
/// Rows of table [V,d] selected by index; `padding_index` yields a zero row
/// and receives no gradient.
Var gather_rows(Var table, std::span<const std::int32_t> indices, std::int32_t padding_index = 0);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }

struct GradCheckEntry {
    std::string name;
    double max_abs_error = 0.0;
    /// Largest |analytic - numeric| relative to the largest gradient magnitude
    /// of the same tensor.
    double max_rel_error = 0.0;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    double max_rel_error = 0.0;

    bool passed(double tolerance) const { return max_rel_error < tolerance; }
};

using NamedTensor = std::pair<std::string, Tensor*>;

/// Compares backward() against central finite differences. `f` must rebuild the
/// whole computation (including any random draws) identically on every call.
GradCheckReport grad_check(const std::function<Var(Graph&)>& f, std::span<const NamedTensor> params,
                           double step = 1e-5);

}  // namespace remtime::ad
