#include "gap/ndiff/graph.hpp"

#include <cmath>
#include <stdexcept>

namespace gap::ndiff {

const Tensor& Var::value() const { return graph->value(*this); }
const Tensor& Var::grad() const { return graph->grad(*this); }

Var Graph::constant(Tensor value) {
    return push("constant", std::move(value), {}, nullptr);
}

Var Graph::param(ParamStore& store, const std::string& name) {
    Parameter& p = store.get(name);
    // One leaf per parameter: reusing it avoids copying weights at every call site.
    if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var{this, it->second};
    Var v = push("param", p.value, {}, nullptr);
    nodes_[v.id].param_grad = &p.grad;
    param_nodes_.emplace(&p, v.id);
    return v;
}

const Tensor& Graph::grad(Var v) const {
    const Node& n = nodes_.at(v.id);
    return n.grad.empty() ? empty_ : n.grad;
}

Var Graph::push(const char* op, Tensor value, std::vector<std::size_t> parents, BackwardFn fn) {
    if (!value.all_finite()) {
        throw std::domain_error(std::string("non-finite value produced by ") + op + " " + shape_string(value.shape()));
    }
    nodes_.push_back(Node{std::move(value), Tensor{}, std::move(parents), std::move(fn), nullptr});
    return Var{this, nodes_.size() - 1};
}

Tensor& Graph::grad_slot(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.empty()) n.grad = Tensor(n.value.shape(), 0.0);
    return n.grad;
}

void Graph::backward(Var root) {
    if (root.graph != this) throw std::invalid_argument("backward: root belongs to another graph");
    const Tensor& rv = nodes_.at(root.id).value;
    if (rv.size() != 1) throw std::invalid_argument("backward: root must be scalar, got " + shape_string(rv.shape()));

    std::vector<char> reachable(root.id + 1, 0);
    reachable[root.id] = 1;
    for (std::size_t i = root.id + 1; i-- > 0;) {
        if (!reachable[i]) continue;
        for (auto p : nodes_[i].parents) reachable[p] = 1;
    }
    for (std::size_t i = 0; i <= root.id; ++i) {
        if (reachable[i]) nodes_[i].grad = Tensor{};
    }
    grad_slot(root.id).fill(1.0);
    for (std::size_t i = root.id + 1; i-- > 0;) {
        if (!reachable[i] || nodes_[i].grad.empty()) continue;
        Node& n = nodes_[i];
        if (n.backward) n.backward(*this, i);
        if (n.param_grad != nullptr) kernels::axpy(1.0, n.grad, *n.param_grad);
    }
}

namespace {

Graph& same_graph(Var a, Var b) {
    if (a.graph == nullptr || a.graph != b.graph) throw std::invalid_argument("operands belong to different graphs");
    return *a.graph;
}

enum class Broadcast { none, row };

Broadcast check_binary(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() == b.shape()) return Broadcast::none;
    if (a.rank() == 2 && b.rows() == 1 && b.cols() == a.cols()) return Broadcast::row;
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                                shape_string(b.shape()));
}

/// Reduces an m×n gradient to the shape of a broadcast 1×n operand.
void accumulate_broadcast(Graph& g, std::size_t target, const Tensor& grad, Broadcast mode, double sign = 1.0) {
    Tensor& dst = g.grad_slot(target);
    if (mode == Broadcast::none) {
        kernels::axpy(sign, grad, dst);
        return;
    }
    const std::size_t m = grad.cols();
    for (std::size_t i = 0; i < grad.rows(); ++i) {
        const double* src = grad.raw() + i * m;
        for (std::size_t j = 0; j < m; ++j) dst[j] += sign * src[j];
    }
}

template <typename F>
Var unary(const char* op, Var a, F f, std::function<void(Graph&, std::size_t, std::size_t)> bw) {
    Tensor out = a.value();
    for (double& v : out.data()) v = f(v);
    return a.graph->push(op, std::move(out), {a.id}, [pa = a.id, bw](Graph& g, std::size_t self) { bw(g, self, pa); });
}

}  // namespace

Var matmul(Var a, Var b) {
    Graph& g = same_graph(a, b);
    Tensor out = kernels::matmul(a.value(), b.value());
    return g.push("matmul", std::move(out), {a.id, b.id}, [pa = a.id, pb = b.id](Graph& gr, std::size_t self) {
        const Tensor& dc = gr.node_grad(self);
        kernels::matmul_nt_accumulate(dc, gr.node_value(pb), gr.grad_slot(pa));
        kernels::matmul_tn_accumulate(gr.node_value(pa), dc, gr.grad_slot(pb));
    });
}

Var add(Var a, Var b) {
    Graph& g = same_graph(a, b);
    const Broadcast mode = check_binary("add", a.value(), b.value());
    Tensor out = a.value();
    if (mode == Broadcast::row) {
        kernels::add_row_inplace(out, b.value());
    } else {
        kernels::axpy(1.0, b.value(), out);
    }
    return g.push("add", std::move(out), {a.id, b.id}, [pa = a.id, pb = b.id, mode](Graph& gr, std::size_t self) {
        const Tensor& dc = gr.node_grad(self);
        kernels::axpy(1.0, dc, gr.grad_slot(pa));
        accumulate_broadcast(gr, pb, dc, mode);
    });
}

Var sub(Var a, Var b) {
    Graph& g = same_graph(a, b);
    const Broadcast mode = check_binary("sub", a.value(), b.value());
    Tensor out = a.value();
    if (mode == Broadcast::row) {
        Tensor neg = b.value();
        for (double& v : neg.data()) v = -v;
        kernels::add_row_inplace(out, neg);
    } else {
        kernels::axpy(-1.0, b.value(), out);
    }
    return g.push("sub", std::move(out), {a.id, b.id}, [pa = a.id, pb = b.id, mode](Graph& gr, std::size_t self) {
        const Tensor& dc = gr.node_grad(self);
        kernels::axpy(1.0, dc, gr.grad_slot(pa));
        accumulate_broadcast(gr, pb, dc, mode, -1.0);
    });
}

Var mul(Var a, Var b) {
    Graph& g = same_graph(a, b);
    const Broadcast mode = check_binary("mul", a.value(), b.value());
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    Tensor out = av;
    const std::size_t m = av.cols();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mode == Broadcast::row ? bv[i % m] : bv[i];
    return g.push("mul", std::move(out), {a.id, b.id}, [pa = a.id, pb = b.id, mode](Graph& gr, std::size_t self) {
        const Tensor& dc = gr.node_grad(self);
        const Tensor& x = gr.node_value(pa);
        const Tensor& y = gr.node_value(pb);
        const std::size_t cols = x.cols();
        Tensor& dx = gr.grad_slot(pa);
        Tensor dy_full(dc.shape(), 0.0);
        for (std::size_t i = 0; i < dc.size(); ++i) {
            const double yv = mode == Broadcast::row ? y[i % cols] : y[i];
            dx[i] += dc[i] * yv;
            dy_full[i] = dc[i] * x[i];
        }
        accumulate_broadcast(gr, pb, dy_full, mode);
    });
}

Var scale(Var a, double s) {
    return unary("scale", a, [s](double v) { return s * v; }, [s](Graph& g, std::size_t self, std::size_t pa) {
        kernels::axpy(s, g.node_grad(self), g.grad_slot(pa));
    });
}

Var add_scalar(Var a, double s) {
    return unary("add_scalar", a, [s](double v) { return v + s; }, [](Graph& g, std::size_t self, std::size_t pa) {
        kernels::axpy(1.0, g.node_grad(self), g.grad_slot(pa));
    });
}

Var relu(Var a) {
    return unary("relu", a, [](double v) { return v > 0.0 ? v : 0.0; }, [](Graph& g, std::size_t self, std::size_t pa) {
        const Tensor& dc = g.node_grad(self);
        const Tensor& x = g.node_value(pa);
        Tensor& dx = g.grad_slot(pa);
        for (std::size_t i = 0; i < dc.size(); ++i) dx[i] += x[i] > 0.0 ? dc[i] : 0.0;
    });
}

Var sigmoid(Var a) {
    return unary("sigmoid", a, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
                 [](Graph& g, std::size_t self, std::size_t pa) {
                     const Tensor& dc = g.node_grad(self);
                     const Tensor& y = g.node_value(self);
                     Tensor& dx = g.grad_slot(pa);
                     for (std::size_t i = 0; i < dc.size(); ++i) dx[i] += dc[i] * y[i] * (1.0 - y[i]);
                 });
}

Var exp(Var a) {
    return unary("exp", a, [](double v) { return std::exp(v); }, [](Graph& g, std::size_t self, std::size_t pa) {
        const Tensor& dc = g.node_grad(self);
        const Tensor& y = g.node_value(self);
        Tensor& dx = g.grad_slot(pa);
        for (std::size_t i = 0; i < dc.size(); ++i) dx[i] += dc[i] * y[i];
    });
}

Var square(Var a) {
    return unary("square", a, [](double v) { return v * v; }, [](Graph& g, std::size_t self, std::size_t pa) {
        const Tensor& dc = g.node_grad(self);
        const Tensor& x = g.node_value(pa);
        Tensor& dx = g.grad_slot(pa);
        for (std::size_t i = 0; i < dc.size(); ++i) dx[i] += 2.0 * x[i] * dc[i];
    });
}

Var sum(Var a) {
    double s = 0.0;
    for (double v : a.value().data()) s += v;
    return a.graph->push("sum", Tensor::scalar(s), {a.id}, [pa = a.id](Graph& g, std::size_t self) {
        const double d = g.node_grad(self).item();
        for (double& v : g.grad_slot(pa).data()) v += d;
    });
}

Var mean(Var a) {
    const double n = static_cast<double>(a.value().size());
    return scale(sum(a), 1.0 / n);
}

Var concat(std::initializer_list<Var> parts) {
    return concat(std::vector<Var>(parts));
}

Var concat(const std::vector<Var>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat of zero operands");
    Graph& g = *parts.front().graph;
    std::vector<const Tensor*> values;
    std::vector<std::size_t> ids;
    std::vector<std::size_t> widths;
    for (Var p : parts) {
        same_graph(parts.front(), p);
        values.push_back(&p.value());
        ids.push_back(p.id);
        widths.push_back(p.value().cols());
    }
    Tensor out = kernels::hconcat(values);
    return g.push("concat", std::move(out), ids, [ids, widths](Graph& gr, std::size_t self) {
        const Tensor& dc = gr.node_grad(self);
        const std::size_t total = dc.cols();
        std::size_t offset = 0;
        for (std::size_t k = 0; k < ids.size(); ++k) {
            Tensor& dx = gr.grad_slot(ids[k]);
            const std::size_t w = widths[k];
            for (std::size_t i = 0; i < dc.rows(); ++i) {
                for (std::size_t j = 0; j < w; ++j) dx[i * w + j] += dc[i * total + offset + j];
            }
            offset += w;
        }
    });
}

Var slice(Var a, std::size_t begin, std::size_t end) {
    Tensor out = kernels::slice_cols(a.value(), begin, end);
    return a.graph->push("slice", std::move(out), {a.id}, [pa = a.id, begin, end](Graph& g, std::size_t self) {
        const Tensor& dc = g.node_grad(self);
        Tensor& dx = g.grad_slot(pa);
        const std::size_t w = end - begin;
        const std::size_t total = dx.cols();
        for (std::size_t i = 0; i < dc.rows(); ++i) {
            for (std::size_t j = 0; j < w; ++j) dx[i * total + begin + j] += dc[i * w + j];
        }
    });
}

Var clamp(Var a, double lo, double hi) {
    return unary("clamp", a, [lo, hi](double v) { return v < lo ? lo : (v > hi ? hi : v); },
                 [lo, hi](Graph& g, std::size_t self, std::size_t pa) {
                     const Tensor& dc = g.node_grad(self);
                     const Tensor& x = g.node_value(pa);
                     Tensor& dx = g.grad_slot(pa);
                     for (std::size_t i = 0; i < dc.size(); ++i) dx[i] += (x[i] >= lo && x[i] <= hi) ? dc[i] : 0.0;
                 });
}

Var detach(Var a) {
    return a.graph->constant(a.value());
}

}  // namespace gap::ndiff
