#pragma once

#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "sern/tensor.hpp"

namespace sern {

class Graph;

/// Lightweight handle to a node inside a Graph.
struct Var {
    Graph* graph = nullptr;
    int id = -1;
};

/// Tape of primitive operations recorded during a forward pass.
///
/// Nodes are appended in topological order by construction: an operation's
/// inputs always precede it on the tape. `backward` walks the tape once in
/// reverse, accumulating gradients; `replay` recomputes every recorded value
/// in forward order and must reproduce the original values bit for bit.
///
/// A graph is single-writer. Distinct graphs share no state and may run on
/// distinct threads.
class Graph {
public:
    using ForwardFn = std::function<Tensor(const std::vector<const Tensor*>&)>;
    using BackwardFn = std::function<void(const std::vector<const Tensor*>& inputs,
                                          const Tensor& out, std::span<const double> out_grad,
                                          const std::vector<std::span<double>>& input_grads)>;

    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    /// Tracked leaf bound to an external parameter tensor. After `backward`,
    /// `param.grad` holds d(loss)/d(param), summed over every use.
    Var leaf(Tensor& param);

    /// Untracked leaf holding a fixed value.
    Var constant(Tensor value);
    Var constant_vec(std::vector<double> v) { return constant(Tensor::vec(std::move(v))); }
    Var constant_scalar(double v) { return constant(Tensor::scalar(v)); }

    /// Record an operation node. `forward` computes the value from the parent
    /// values (also used by `replay`); `backward` scatters the node's gradient
    /// onto the parents. This is the extension point every primitive uses.
    Var custom(const std::vector<Var>& parents, ForwardFn forward, BackwardFn backward);

    /// Node values live as long as the graph; appending ops never invalidates
    /// previously returned references.
    const Tensor& value(Var v) const;
    std::span<const double> grad(Var v) const;

    /// Reverse pass from a scalar loss node. Zeroes the grad buffers of all
    /// bound parameters first; leaves unreachable from the loss end with
    /// all-zero grads.
    void backward(Var loss);

    /// Recompute every recorded value in forward order.
    void replay();

    std::size_t node_count() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        std::vector<double> grad;
        std::vector<int> parents;
        ForwardFn fwd;
        BackwardFn bwd;
        Tensor* bound = nullptr;
    };

    std::vector<const Tensor*> parent_values(const Node& n) const;
    void check_owns(Var v) const;

    std::deque<Node> nodes_;
};

// ---------------------------------------------------------------------------
// Primitives. All differentiable; gradients accumulate additively across
// every use of a node.
// ---------------------------------------------------------------------------

/// Elementwise logistic sigmoid. Saturates cleanly, never NaN for finite input.
Var sigmoid(Var x);

/// Elementwise hyperbolic tangent.
Var tanh_act(Var x);

/// Vector softmax with max-subtraction. Rejects empty input.
Var softmax(Var x);

/// Matrix-vector product m(r x c) * v(c) -> (r).
Var matvec(Var m, Var v);

/// W x + b.
Var affine(Var x, Var w, Var b);

Var add(Var a, Var b);
Var sub(Var a, Var b);

/// Hadamard (elementwise) product.
Var mul(Var a, Var b);

/// 1 - x, elementwise.
Var complement(Var x);

/// Concatenate vectors (scalars are treated as 1-vectors).
Var concat(std::span<const Var> parts);
inline Var concat(Var a, Var b) {
    const Var parts[] = {a, b};
    return concat(std::span<const Var>(parts, 2));
}

/// Sum of all entries -> scalar.
Var sum(Var x);

/// Index-select a matrix row; the adjoint scatter-adds into that row.
Var row(Var m, std::size_t i);

/// Index-select one vector entry -> scalar.
Var pick(Var v, std::size_t i);

/// Scale a vector by a scalar node.
Var scale(Var v, Var s);

/// Inner product of two equal-length vectors -> scalar.
Var dot(Var a, Var b);

/// ln(max(x, floor)), elementwise; gradient is zero in the clamped region.
Var log_clamped(Var x, double floor = 1e-12);

Var neg(Var x);

}  // namespace sern
