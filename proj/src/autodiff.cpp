#include "remtime/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "remtime/errors.hpp"

namespace remtime::ad {

namespace {

[[noreturn]] void dimension_error(const char* op, const std::string& what) {
    throw DimensionError("autodiff", std::string(op) + ": " + what);
}

void require_same_shape(const char* op, Var a, Var b) {
    if (a.shape() != b.shape()) {
        dimension_error(op, "shape " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    }
}

void require_rank(const char* op, Var a, std::size_t rank) {
    if (a.shape().size() != rank) {
        dimension_error(op, "expected rank " + std::to_string(rank) + ", got " + shape_str(a.shape()));
    }
}

/// Elementwise unary op whose derivative is expressed through input x and output y.
template <typename Fwd, typename Deriv>
Var unary(const char* op, Var a, Fwd fwd, Deriv deriv) {
    Graph& g = a.graph();
    const auto& x = a.values();
    Tensor out(a.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out.values[i] = fwd(x[i]);
    const std::size_t ia = a.id();
    return g.record(op, std::move(out), {ia}, [ia, deriv](Graph& gr, std::size_t self) {
        const auto& xv = gr.value(ia).values;
        const auto& yv = gr.value(self).values;
        const auto& dy = gr.grad_buffer(self);
        auto& dx = gr.grad_buffer(ia);
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dy[i] * deriv(xv[i], yv[i]);
    });
}

}  // namespace

std::size_t shape_size(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

Tensor::Tensor(Shape s, double fill) : shape(std::move(s)), values(shape_size(shape), fill) {}

Tensor::Tensor(Shape s, std::vector<double> v) : shape(std::move(s)), values(std::move(v)) {
    if (values.size() != shape_size(shape)) {
        throw DimensionError("autodiff", "tensor buffer of " + std::to_string(values.size()) +
                                             " values does not fit shape " + shape_str(shape));
    }
}

Tensor Tensor::scalar(double v) { return Tensor(Shape{1}, std::vector<double>{v}); }

void Tensor::zero_grad() { grad.assign(values.size(), 0.0); }

Shape Var::shape() const { return graph_->value(id_).shape; }

const std::vector<double>& Var::values() const { return graph_->value(id_).values; }

double Var::item() const {
    const auto& v = values();
    if (v.size() != 1) {
        throw ContractError("autodiff", "item() on tensor of shape " + shape_str(shape()));
    }
    return v[0];
}

Var Graph::constant(Tensor value) {
    Node n;
    n.op = "constant";
    n.value = std::move(value);
    nodes_.push_back(std::move(n));
    return Var(this, nodes_.size() - 1);
}

Var Graph::constant(Shape shape, std::vector<double> values) {
    return constant(Tensor(std::move(shape), std::move(values)));
}

Var Graph::parameter(const Tensor& t) {
    if (auto it = param_nodes_.find(&t); it != param_nodes_.end()) return Var(this, it->second);
    if (t.values.size() != shape_size(t.shape)) {
        throw DimensionError("autodiff", "parameter buffer does not fit shape " + shape_str(t.shape));
    }
    Node n;
    n.op = "parameter";
    n.external = &t;
    nodes_.push_back(std::move(n));
    param_nodes_.emplace(&t, nodes_.size() - 1);
    return Var(this, nodes_.size() - 1);
}

Var Graph::record(const char* op, Tensor value, std::vector<std::size_t> inputs, BackwardFn fn) {
    Node n;
    n.op = op;
    n.value = std::move(value);
    n.inputs = std::move(inputs);
    n.backward = std::move(fn);
    nodes_.push_back(std::move(n));
    return Var(this, nodes_.size() - 1);
}

const Tensor& Graph::value(std::size_t id) const {
    const Node& n = nodes_[id];
    return n.external ? *n.external : n.value;
}

std::vector<double>& Graph::grad_buffer(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.empty()) n.grad.assign(value(id).values.size(), 0.0);
    return n.grad;
}

void Graph::backward(Var output) {
    if (output.graph_ != this) throw ContractError("autodiff", "backward on a foreign variable");
    if (output.size() != 1) {
        throw ContractError("autodiff",
                            "backward requires a single-element output, got shape " + shape_str(output.shape()));
    }
    for (auto& n : nodes_) n.grad.clear();
    grad_buffer(output.id())[0] = 1.0;
    for (std::size_t i = output.id() + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (n.grad.empty() || !n.backward) continue;
        n.backward(*this, i);
    }
}

void Graph::backward(Var output, std::span<Tensor* const> params) {
    backward(output);
    for (Tensor* p : params) {
        if (!p->requires_grad) continue;
        if (p->grad.size() != p->values.size()) p->grad.assign(p->values.size(), 0.0);
        const auto it = param_nodes_.find(p);
        if (it == param_nodes_.end() || nodes_[it->second].grad.empty()) continue;
        const auto& g = nodes_[it->second].grad;
        for (std::size_t i = 0; i < g.size(); ++i) p->grad[i] += g[i];
    }
}

std::vector<double> Graph::grad_of(const Tensor& param) const {
    const auto it = param_nodes_.find(&param);
    if (it == param_nodes_.end() || nodes_[it->second].grad.empty()) {
        return std::vector<double>(param.values.size(), 0.0);
    }
    return nodes_[it->second].grad;
}

Var matmul(Var a, Var b) {
    require_rank("matmul", a, 2);
    require_rank("matmul", b, 2);
    const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    if (b.shape()[0] != k) {
        dimension_error("matmul", "inner dimensions " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    }
    Tensor out(Shape{m, n});
    const auto& av = a.values();
    const auto& bv = b.values();
    for (std::size_t i = 0; i < m; ++i) {
        double* row = &out.values[i * n];
        for (std::size_t p = 0; p < k; ++p) {
            const double s = av[i * k + p];
            if (s == 0.0) continue;
            const double* brow = &bv[p * n];
            for (std::size_t j = 0; j < n; ++j) row[j] += s * brow[j];
        }
    }
    const std::size_t ia = a.id(), ib = b.id();
    return a.graph().record("matmul", std::move(out), {ia, ib}, [ia, ib, m, k, n](Graph& g, std::size_t self) {
        const auto& dc = g.grad_buffer(self);
        const auto& av = g.value(ia).values;
        const auto& bv = g.value(ib).values;
        if (g.op(ia) != std::string_view("constant")) {
            auto& da = g.grad_buffer(ia);
            for (std::size_t i = 0; i < m; ++i) {
                const double* drow = &dc[i * n];
                for (std::size_t p = 0; p < k; ++p) {
                    const double* brow = &bv[p * n];
                    double acc = 0.0;
                    for (std::size_t j = 0; j < n; ++j) acc += drow[j] * brow[j];
                    da[i * k + p] += acc;
                }
            }
        }
        if (g.op(ib) != std::string_view("constant")) {
            auto& db = g.grad_buffer(ib);
            for (std::size_t i = 0; i < m; ++i) {
                const double* drow = &dc[i * n];
                for (std::size_t p = 0; p < k; ++p) {
                    const double s = av[i * k + p];
                    if (s == 0.0) continue;
                    double* dbrow = &db[p * n];
                    for (std::size_t j = 0; j < n; ++j) dbrow[j] += s * drow[j];
                }
            }
        }
    });
}

Var add(Var a, Var b) {
    require_same_shape("add", a, b);
    Tensor out(a.shape());
    const auto& x = a.values();
    const auto& y = b.values();
    for (std::size_t i = 0; i < x.size(); ++i) out.values[i] = x[i] + y[i];
    const std::size_t ia = a.id(), ib = b.id();
    return a.graph().record("add", std::move(out), {ia, ib}, [ia, ib](Graph& g, std::size_t self) {
        const auto& d = g.grad_buffer(self);
        for (std::size_t in : {ia, ib}) {
            auto& dx = g.grad_buffer(in);
            for (std::size_t i = 0; i < d.size(); ++i) dx[i] += d[i];
        }
    });
}

Var sub(Var a, Var b) {
    require_same_shape("sub", a, b);
    Tensor out(a.shape());
    const auto& x = a.values();
    const auto& y = b.values();
    for (std::size_t i = 0; i < x.size(); ++i) out.values[i] = x[i] - y[i];
    const std::size_t ia = a.id(), ib = b.id();
    return a.graph().record("sub", std::move(out), {ia, ib}, [ia, ib](Graph& g, std::size_t self) {
        const auto& d = g.grad_buffer(self);
        auto& da = g.grad_buffer(ia);
        for (std::size_t i = 0; i < d.size(); ++i) da[i] += d[i];
        auto& db = g.grad_buffer(ib);
        for (std::size_t i = 0; i < d.size(); ++i) db[i] -= d[i];
    });
}

Var mul(Var a, Var b) {
    require_same_shape("mul", a, b);
    Tensor out(a.shape());
    const auto& x = a.values();
    const auto& y = b.values();
    for (std::size_t i = 0; i < x.size(); ++i) out.values[i] = x[i] * y[i];
    const std::size_t ia = a.id(), ib = b.id();
    return a.graph().record("mul", std::move(out), {ia, ib}, [ia, ib](Graph& g, std::size_t self) {
        const auto& d = g.grad_buffer(self);
        const auto& x = g.value(ia).values;
        const auto& y = g.value(ib).values;
        if (g.op(ia) != std::string_view("constant")) {
            auto& da = g.grad_buffer(ia);
            for (std::size_t i = 0; i < d.size(); ++i) da[i] += d[i] * y[i];
        }
        if (g.op(ib) != std::string_view("constant")) {
            auto& db = g.grad_buffer(ib);
            for (std::size_t i = 0; i < d.size(); ++i) db[i] += d[i] * x[i];
        }
    });
}

Var add_bias(Var a, Var bias) {
    require_rank("add_bias", bias, 1);
    const std::size_t n = bias.shape()[0];
    if (a.shape().empty() || a.shape().back() != n) {
        dimension_error("add_bias", "bias " + shape_str(bias.shape()) + " vs input " + shape_str(a.shape()));
    }
    Tensor out(a.shape());
    const auto& x = a.values();
    const auto& bv = bias.values();
    for (std::size_t i = 0; i < x.size(); ++i) out.values[i] = x[i] + bv[i % n];
    const std::size_t ia = a.id(), ib = bias.id();
    return a.graph().record("add_bias", std::move(out), {ia, ib}, [ia, ib, n](Graph& g, std::size_t self) {
        const auto& d = g.grad_buffer(self);
        auto& da = g.grad_buffer(ia);
        for (std::size_t i = 0; i < d.size(); ++i) da[i] += d[i];
        auto& db = g.grad_buffer(ib);
        for (std::size_t i = 0; i < d.size(); ++i) db[i % n] += d[i];
    });
}

Var scale(Var a, double c) {
    return unary("scale", a, [c](double x) { return c * x; }, [c](double, double) { return c; });
}

Var add_const(Var a, double c) {
    return unary("add_const", a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

Var mul_scalar(Var a, Var s) {
    if (s.size() != 1) dimension_error("mul_scalar", "scalar operand has shape " + shape_str(s.shape()));
    const double sv = s.values()[0];
    Tensor out(a.shape());
    const auto& x = a.values();
    for (std::size_t i = 0; i < x.size(); ++i) out.values[i] = x[i] * sv;
    const std::size_t ia = a.id(), is = s.id();
    return a.graph().record("mul_scalar", std::move(out), {ia, is}, [ia, is](Graph& g, std::size_t self) {
        const auto& d = g.grad_buffer(self);
        const auto& x = g.value(ia).values;
        const double sv = g.value(is).values[0];
        auto& da = g.grad_buffer(ia);
        double acc = 0.0;
        for (std::size_t i = 0; i < d.size(); ++i) {
            da[i] += d[i] * sv;
            acc += d[i] * x[i];
        }
        g.grad_buffer(is)[0] += acc;
    });
}

Var add_scalar(Var a, Var s) {
    if (s.size() != 1) dimension_error("add_scalar", "scalar operand has shape " + shape_str(s.shape()));
    const double sv = s.values()[0];
    Tensor out(a.shape());
    const auto& x = a.values();
    for (std::size_t i = 0; i < x.size(); ++i) out.values[i] = x[i] + sv;
    const std::size_t ia = a.id(), is = s.id();
    return a.graph().record("add_scalar", std::move(out), {ia, is}, [ia, is](Graph& g, std::size_t self) {
        const auto& d = g.grad_buffer(self);
        auto& da = g.grad_buffer(ia);
        double acc = 0.0;
        for (std::size_t i = 0; i < d.size(); ++i) {
            da[i] += d[i];
            acc += d[i];
        }
        g.grad_buffer(is)[0] += acc;
    });
}

Var exp(Var a) {
    return unary("exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(Var a) {
    return unary("log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var sigmoid(Var a) {
    return unary(
        "sigmoid", a,
        [](double x) {
            if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
            const double e = std::exp(x);
            return e / (1.0 + e);
        },
        [](double, double y) { return y * (1.0 - y); });
}

Var tanh(Var a) {
    return unary("tanh", a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var relu(Var a) {
    return unary("relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
                 [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var square(Var a) {
    return unary("square", a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var sum(Var a) {
    double s = 0.0;
    for (double x : a.values()) s += x;
    const std::size_t ia = a.id();
    return a.graph().record("sum", Tensor::scalar(s), {ia}, [ia](Graph& g, std::size_t self) {
        const double d = g.grad_buffer(self)[0];
        for (auto& dx : g.grad_buffer(ia)) dx += d;
    });
}

Var mean(Var a) {
    const std::size_t n = a.size();
    if (n == 0) dimension_error("mean", "empty input");
    double s = 0.0;
    for (double x : a.values()) s += x;
    const std::size_t ia = a.id();
    return a.graph().record("mean", Tensor::scalar(s / static_cast<double>(n)), {ia},
                            [ia, n](Graph& g, std::size_t self) {
                                const double d = g.grad_buffer(self)[0] / static_cast<double>(n);
                                for (auto& dx : g.grad_buffer(ia)) dx += d;
                            });
}

Var reshape(Var a, Shape shape) {
    if (shape_size(shape) != a.size()) {
        dimension_error("reshape", shape_str(a.shape()) + " -> " + shape_str(shape));
    }
    Tensor out(std::move(shape), a.values());
    const std::size_t ia = a.id();
    return a.graph().record("reshape", std::move(out), {ia}, [ia](Graph& g, std::size_t self) {
        const auto& d = g.grad_buffer(self);
        auto& dx = g.grad_buffer(ia);
        for (std::size_t i = 0; i < d.size(); ++i) dx[i] += d[i];
    });
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
    require_rank("slice_cols", a, 2);
    const std::size_t rows = a.shape()[0], cols = a.shape()[1];
    if (begin >= end || end > cols) {
        dimension_error("slice_cols", "range [" + std::to_string(begin) + "," + std::to_string(end) +
                                          ") of " + shape_str(a.shape()));
    }
    const std::size_t w = end - begin;
    Tensor out(Shape{rows, w});
    const auto& x = a.values();
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < w; ++c) out.values[r * w + c] = x[r * cols + begin + c];
    const std::size_t ia = a.id();
    return a.graph().record("slice_cols", std::move(out), {ia},
                            [ia, rows, cols, begin, w](Graph& g, std::size_t self) {
                                const auto& d = g.grad_buffer(self);
                                auto& dx = g.grad_buffer(ia);
                                for (std::size_t r = 0; r < rows; ++r)
                                    for (std::size_t c = 0; c < w; ++c) dx[r * cols + begin + c] += d[r * w + c];
                            });
}

Var concat_cols(std::span<const Var> parts) {
    if (parts.empty()) dimension_error("concat_cols", "no inputs");
    const std::size_t rows = parts[0].shape().empty() ? 0 : parts[0].shape()[0];
    std::vector<std::size_t> widths;
    std::vector<std::size_t> ids;
    std::size_t total = 0;
    for (const Var& p : parts) {
        require_rank("concat_cols", p, 2);
        if (p.shape()[0] != rows) {
            dimension_error("concat_cols", "row count " + std::to_string(p.shape()[0]) + " vs " +
                                               std::to_string(rows));
        }
        widths.push_back(p.shape()[1]);
        ids.push_back(p.id());
        total += p.shape()[1];
    }
    Tensor out(Shape{rows, total});
    std::size_t offset = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        const auto& x = parts[k].values();
        const std::size_t w = widths[k];
        for (std::size_t r = 0; r < rows; ++r)
            std::copy_n(&x[r * w], w, &out.values[r * total + offset]);
        offset += w;
    }
    return parts[0].graph().record("concat_cols", std::move(out), ids,
                                   [ids, widths, rows, total](Graph& g, std::size_t self) {
                                       const auto& d = g.grad_buffer(self);
                                       std::size_t off = 0;
                                       for (std::size_t k = 0; k < ids.size(); ++k) {
                                           const std::size_t w = widths[k];
                                           if (g.op(ids[k]) != std::string_view("constant")) {
                                               auto& dx = g.grad_buffer(ids[k]);
                                               for (std::size_t r = 0; r < rows; ++r)
                                                   for (std::size_t c = 0; c < w; ++c)
                                                       dx[r * w + c] += d[r * total + off + c];
                                           }
                                           off += w;
                                       }
                                   });
}

Var time_step(Var x, std::size_t t) {
    require_rank("time_step", x, 3);
    const std::size_t b = x.shape()[0], len = x.shape()[1], d = x.shape()[2];
    if (t >= len) dimension_error("time_step", "step " + std::to_string(t) + " of " + shape_str(x.shape()));
    Tensor out(Shape{b, d});
    const auto& xv = x.values();
    for (std::size_t i = 0; i < b; ++i) std::copy_n(&xv[(i * len + t) * d], d, &out.values[i * d]);
    const std::size_t ix = x.id();
    return x.graph().record("time_step", std::move(out), {ix}, [ix, b, len, d, t](Graph& g, std::size_t self) {
        if (g.op(ix) == std::string_view("constant")) return;
        const auto& dy = g.grad_buffer(self);
        auto& dx = g.grad_buffer(ix);
        for (std::size_t i = 0; i < b; ++i)
            for (std::size_t c = 0; c < d; ++c) dx[(i * len + t) * d + c] += dy[i * d + c];
    });
}

Var conv1d(Var x, Var kernel) {
    require_rank("conv1d", x, 3);
    require_rank("conv1d", kernel, 3);
    const std::size_t batch = x.shape()[0], len = x.shape()[1], cin = x.shape()[2];
    const std::size_t width = kernel.shape()[0], cout = kernel.shape()[2];
    if (kernel.shape()[1] != cin) {
        dimension_error("conv1d", "kernel " + shape_str(kernel.shape()) + " vs input " + shape_str(x.shape()));
    }
    if (width > len) {
        dimension_error("conv1d", "kernel width " + std::to_string(width) + " exceeds sequence length " +
                                      std::to_string(len));
    }
    const std::size_t lout = len - width + 1;
    Tensor out(Shape{batch, lout, cout});
    const auto& xv = x.values();
    const auto& wv = kernel.values();
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t t = 0; t < lout; ++t) {
            double* orow = &out.values[(b * lout + t) * cout];
            for (std::size_t k = 0; k < width; ++k) {
                const double* xrow = &xv[(b * len + t + k) * cin];
                for (std::size_t c = 0; c < cin; ++c) {
                    const double s = xrow[c];
                    if (s == 0.0) continue;
                    const double* wrow = &wv[(k * cin + c) * cout];
                    for (std::size_t o = 0; o < cout; ++o) orow[o] += s * wrow[o];
                }
            }
        }
    }
    const std::size_t ix = x.id(), ik = kernel.id();
    return x.graph().record(
        "conv1d", std::move(out), {ix, ik},
        [ix, ik, batch, len, cin, width, cout, lout](Graph& g, std::size_t self) {
            const auto& dy = g.grad_buffer(self);
            const auto& xv = g.value(ix).values;
            const auto& wv = g.value(ik).values;
            const bool want_x = g.op(ix) != std::string_view("constant");
            const bool want_k = g.op(ik) != std::string_view("constant");
            std::vector<double>* dx = want_x ? &g.grad_buffer(ix) : nullptr;
            std::vector<double>* dk = want_k ? &g.grad_buffer(ik) : nullptr;
            for (std::size_t b = 0; b < batch; ++b) {
                for (std::size_t t = 0; t < lout; ++t) {
                    const double* drow = &dy[(b * lout + t) * cout];
                    for (std::size_t k = 0; k < width; ++k) {
                        const std::size_t xoff = (b * len + t + k) * cin;
                        for (std::size_t c = 0; c < cin; ++c) {
                            const std::size_t woff = (k * cin + c) * cout;
                            if (dx) {
                                double acc = 0.0;
                                for (std::size_t o = 0; o < cout; ++o) acc += drow[o] * wv[woff + o];
                                (*dx)[xoff + c] += acc;
                            }
                            if (dk) {
                                const double s = xv[xoff + c];
                                if (s == 0.0) continue;
                                for (std::size_t o = 0; o < cout; ++o) (*dk)[woff + o] += s * drow[o];
                            }
                        }
                    }
                }
            }
        });
}

Var gather_rows(Var table, std::span<const std::int32_t> indices, std::int32_t padding_index) {
    require_rank("gather_rows", table, 2);
    const std::size_t rows = table.shape()[0], d = table.shape()[1];
    Tensor out(Shape{indices.size(), d});
    const auto& tv = table.values();
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const std::int32_t idx = indices[i];
        if (idx < 0 || static_cast<std::size_t>(idx) >= rows) {
            dimension_error("gather_rows", "index " + std::to_string(idx) + " outside table of " +
                                               std::to_string(rows) + " rows");
        }
        if (idx == padding_index) continue;
        std::copy_n(&tv[static_cast<std::size_t>(idx) * d], d, &out.values[i * d]);
    }
    const std::size_t it = table.id();
    std::vector<std::int32_t> idx(indices.begin(), indices.end());
    return table.graph().record("gather_rows", std::move(out), {it},
                                [it, d, padding_index, idx = std::move(idx)](Graph& g, std::size_t self) {
                                    const auto& dy = g.grad_buffer(self);
                                    auto& dt = g.grad_buffer(it);
                                    for (std::size_t i = 0; i < idx.size(); ++i) {
                                        if (idx[i] == padding_index) continue;
                                        const std::size_t r = static_cast<std::size_t>(idx[i]);
                                        for (std::size_t c = 0; c < d; ++c) dt[r * d + c] += dy[i * d + c];
                                    }
                                });
}

GradCheckReport grad_check(const std::function<Var(Graph&)>& f, std::span<const NamedTensor> params,
                           double step) {
    std::vector<std::vector<double>> analytic;
    {
        Graph g;
        Var out = f(g);
        g.backward(out);
        for (const auto& [name, p] : params) analytic.push_back(g.grad_of(*p));
    }

    auto evaluate = [&f]() {
        Graph g;
        return f(g).item();
    };

    GradCheckReport report;
    for (std::size_t k = 0; k < params.size(); ++k) {
        Tensor* p = params[k].second;
        GradCheckEntry entry{params[k].first, 0.0, 0.0};
        double scale_ref = 0.0;
        for (std::size_t i = 0; i < p->values.size(); ++i) {
            const double saved = p->values[i];
            p->values[i] = saved + step;
            const double up = evaluate();
            p->values[i] = saved - step;
            const double down = evaluate();
            p->values[i] = saved;
            const double numeric = (up - down) / (2.0 * step);
            entry.max_abs_error = std::max(entry.max_abs_error, std::abs(numeric - analytic[k][i]));
            scale_ref = std::max({scale_ref, std::abs(numeric), std::abs(analytic[k][i])});
        }
        entry.max_rel_error = scale_ref > 0.0 ? entry.max_abs_error / scale_ref : entry.max_abs_error;
        report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
        report.entries.push_back(entry);
    }
    return report;
}

}  // namespace remtime::ad
