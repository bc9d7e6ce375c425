#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <string>
#include <unordered_map>
#include <vector>

#include "gap/ndiff/params.hpp"
#include "gap/ndiff/tensor.hpp"

namespace gap::ndiff {

class Graph;

/// Handle to a node of a Graph. Cheap to copy; only valid while its graph lives.
struct Var {
    Graph* graph = nullptr;
    std::size_t id = 0;

    const Tensor& value() const;
    const Tensor& grad() const;
};

/// Tape of operations recorded in creation order, which is already a
/// topological order. One graph per training step; not thread-safe.
class Graph {
public:
    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    Var constant(Tensor value);
    /// Leaf bound to a stored parameter; backward() adds into its gradient.
    Var param(ParamStore& store, const std::string& name);

    const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
    /// Gradient from the most recent backward(); zeros if the node was unreachable.
    const Tensor& grad(Var v) const;

    /// Reverse sweep from a 1×1 root. Node gradients are recomputed from
    /// scratch; parameter gradients in the bound ParamStore accumulate.
    void backward(Var root);

    std::size_t size() const noexcept { return nodes_.size(); }

    using BackwardFn = std::function<void(Graph&, std::size_t self)>;
    Var push(const char* op, Tensor value, std::vector<std::size_t> parents, BackwardFn fn);
    Tensor& grad_slot(std::size_t id);
    const Tensor& node_value(std::size_t id) const { return nodes_[id].value; }
    const Tensor& node_grad(std::size_t id) const { return nodes_[id].grad; }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        std::vector<std::size_t> parents;
        BackwardFn backward;
        Tensor* param_grad = nullptr;
    };
    std::vector<Node> nodes_;
    std::unordered_map<const Parameter*, std::size_t> param_nodes_;
    Tensor empty_;
};

// Differentiable operations. Binary elementwise ops accept equal shapes, or a
// 1×n right operand broadcast over the rows of an m×n left operand.
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var relu(Var a);
Var sigmoid(Var a);
Var exp(Var a);
Var square(Var a);
/// Sum of all entries, 1×1.
Var sum(Var a);
/// Mean of all entries, 1×1.
Var mean(Var a);
/// Column-wise concatenation.
Var concat(std::initializer_list<Var> parts);
Var concat(const std::vector<Var>& parts);
/// Columns [begin, end).
Var slice(Var a, std::size_t begin, std::size_t end);
/// Clamp with zero gradient outside [lo, hi].
Var clamp(Var a, double lo, double hi);
/// Copies the value; no gradient flows back.
Var detach(Var a);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator*(double s, Var a) { return scale(a, s); }

}  // namespace gap::ndiff
