#include "sern/graph.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace sern {

Var Graph::leaf(Tensor& param) {
    Node n;
    n.value = param;  // copy of the current values; grads flow to `param.grad`
    n.value.grad.clear();
    n.bound = &param;
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Graph::constant(Tensor value) {
    Node n;
    n.value = std::move(value);
    n.value.grad.clear();
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Graph::custom(const std::vector<Var>& parents, ForwardFn forward, BackwardFn backward) {
    Node n;
    n.parents.reserve(parents.size());
    for (Var p : parents) {
        check_owns(p);
        n.parents.push_back(p.id);
    }
    n.fwd = std::move(forward);
    n.bwd = std::move(backward);
    n.value = n.fwd(parent_values(n));
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<int>(nodes_.size()) - 1};
}

void Graph::check_owns(Var v) const {
    if (v.graph != this || v.id < 0 || v.id >= static_cast<int>(nodes_.size())) {
        throw ContractError("var does not belong to this graph");
    }
}

std::vector<const Tensor*> Graph::parent_values(const Node& n) const {
    std::vector<const Tensor*> vals;
    vals.reserve(n.parents.size());
    for (int p : n.parents) vals.push_back(&nodes_[p].value);
    return vals;
}

const Tensor& Graph::value(Var v) const {
    check_owns(v);
    return nodes_[v.id].value;
}

std::span<const double> Graph::grad(Var v) const {
    check_owns(v);
    return nodes_[v.id].grad;
}

void Graph::backward(Var loss) {
    check_owns(loss);
    if (nodes_[loss.id].value.size() != 1) {
        throw ContractError("backward requires a scalar loss, got shape " +
                            shape_str(nodes_[loss.id].value.shape));
    }

    for (Node& n : nodes_) n.grad.assign(n.value.size(), 0.0);
    nodes_[loss.id].grad[0] = 1.0;

    // Nodes recorded after the loss cannot be its ancestors.
    for (int id = loss.id; id >= 0; --id) {
        Node& n = nodes_[id];
        if (!n.bwd) continue;
        std::vector<std::span<double>> parent_grads;
        parent_grads.reserve(n.parents.size());
        for (int p : n.parents) parent_grads.emplace_back(nodes_[p].grad);
        n.bwd(parent_values(n), n.value, n.grad, parent_grads);
    }

    std::unordered_set<Tensor*> zeroed;
    for (Node& n : nodes_) {
        if (n.bound && zeroed.insert(n.bound).second) n.bound->zero_grad();
    }
    for (Node& n : nodes_) {
        if (!n.bound) continue;
        for (std::size_t i = 0; i < n.grad.size(); ++i) n.bound->grad[i] += n.grad[i];
    }
}

void Graph::replay() {
    for (Node& n : nodes_) {
        if (n.fwd) n.value = n.fwd(parent_values(n));
    }
}

// ---------------------------------------------------------------------------
// Primitives
// ---------------------------------------------------------------------------

namespace {

Graph& graph_of(Var v) {
    if (!v.graph) throw ContractError("operation on a null var");
    return *v.graph;
}

void require_same_graph(Var a, Var b) {
    if (a.graph != b.graph) throw ContractError("operands recorded on different graphs");
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape != b.shape) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape) + " vs " +
                         shape_str(b.shape));
    }
}

}  // namespace

Var sigmoid(Var x) {
    return graph_of(x).custom(
        {x},
        [](const std::vector<const Tensor*>& in) {
            Tensor out = *in[0];
            for (double& v : out.values) v = 1.0 / (1.0 + std::exp(-v));
            return out;
        },
        [](const std::vector<const Tensor*>&, const Tensor& out, std::span<const double> g,
           const std::vector<std::span<double>>& pg) {
            for (std::size_t i = 0; i < g.size(); ++i) {
                const double y = out.values[i];
                pg[0][i] += g[i] * y * (1.0 - y);
            }
        });
}

Var tanh_act(Var x) {
    return graph_of(x).custom(
        {x},
        [](const std::vector<const Tensor*>& in) {
            Tensor out = *in[0];
            for (double& v : out.values) v = std::tanh(v);
            return out;
        },
        [](const std::vector<const Tensor*>&, const Tensor& out, std::span<const double> g,
           const std::vector<std::span<double>>& pg) {
            for (std::size_t i = 0; i < g.size(); ++i) {
                const double y = out.values[i];
                pg[0][i] += g[i] * (1.0 - y * y);
            }
        });
}

Var softmax(Var x) {
    if (graph_of(x).value(x).size() == 0) throw ShapeError("softmax: empty input");
    return graph_of(x).custom(
        {x},
        [](const std::vector<const Tensor*>& in) {
            Tensor out = *in[0];
            const double m = *std::max_element(out.values.begin(), out.values.end());
            double total = 0.0;
            for (double& v : out.values) {
                v = std::exp(v - m);
                total += v;
            }
            for (double& v : out.values) v /= total;
            return out;
        },
        [](const std::vector<const Tensor*>&, const Tensor& out, std::span<const double> g,
           const std::vector<std::span<double>>& pg) {
            double inner = 0.0;
            for (std::size_t i = 0; i < g.size(); ++i) inner += g[i] * out.values[i];
            for (std::size_t i = 0; i < g.size(); ++i) {
                pg[0][i] += out.values[i] * (g[i] - inner);
            }
        });
}

Var matvec(Var m, Var v) {
    require_same_graph(m, v);
    Graph& g = graph_of(m);
    const Tensor& mv = g.value(m);
    const Tensor& vv = g.value(v);
    if (!mv.is_matrix() || !vv.is_vector() || mv.cols() != vv.size()) {
        throw ShapeError("matvec: incompatible shapes " + shape_str(mv.shape) + " vs " +
                         shape_str(vv.shape));
    }
    return g.custom(
        {m, v},
        [](const std::vector<const Tensor*>& in) {
            const Tensor& M = *in[0];
            const Tensor& x = *in[1];
            const std::size_t r = M.rows(), c = M.cols();
            std::vector<double> out(r, 0.0);
            for (std::size_t i = 0; i < r; ++i) {
                double acc = 0.0;
                for (std::size_t j = 0; j < c; ++j) acc += M.values[i * c + j] * x.values[j];
                out[i] = acc;
            }
            return Tensor::vec(std::move(out));
        },
        [](const std::vector<const Tensor*>& in, const Tensor&, std::span<const double> g,
           const std::vector<std::span<double>>& pg) {
            const Tensor& M = *in[0];
            const Tensor& x = *in[1];
            const std::size_t r = M.rows(), c = M.cols();
            for (std::size_t i = 0; i < r; ++i) {
                const double gi = g[i];
                for (std::size_t j = 0; j < c; ++j) {
                    pg[0][i * c + j] += gi * x.values[j];
                    pg[1][j] += gi * M.values[i * c + j];
                }
            }
        });
}

Var affine(Var x, Var w, Var b) {
    require_same_graph(x, w);
    require_same_graph(x, b);
    Graph& g = graph_of(x);
    const Tensor& wv = g.value(w);
    const Tensor& xv = g.value(x);
    const Tensor& bv = g.value(b);
    if (!wv.is_matrix() || !xv.is_vector() || wv.cols() != xv.size()) {
        throw ShapeError("affine: weight " + shape_str(wv.shape) + " incompatible with input " +
                         shape_str(xv.shape));
    }
    if (!bv.is_vector() || bv.size() != wv.rows()) {
        throw ShapeError("affine: bias " + shape_str(bv.shape) + " incompatible with weight " +
                         shape_str(wv.shape));
    }
    return g.custom(
        {x, w, b},
        [](const std::vector<const Tensor*>& in) {
            const Tensor& x = *in[0];
            const Tensor& W = *in[1];
            const Tensor& b = *in[2];
            const std::size_t r = W.rows(), c = W.cols();
            std::vector<double> out(r);
            for (std::size_t i = 0; i < r; ++i) {
                double acc = 0.0;
                for (std::size_t j = 0; j < c; ++j) acc += W.values[i * c + j] * x.values[j];
                out[i] = acc + b.values[i];
            }
            return Tensor::vec(std::move(out));
        },
        [](const std::vector<const Tensor*>& in, const Tensor&, std::span<const double> g,
           const std::vector<std::span<double>>& pg) {
            const Tensor& x = *in[0];
            const Tensor& W = *in[1];
            const std::size_t r = W.rows(), c = W.cols();
            for (std::size_t i = 0; i < r; ++i) {
                const double gi = g[i];
                for (std::size_t j = 0; j < c; ++j) {
                    pg[1][i * c + j] += gi * x.values[j];
                    pg[0][j] += gi * W.values[i * c + j];
                }
                pg[2][i] += gi;
            }
        });
}

namespace {

Var elementwise2(Var a, Var b, const char* name, double (*fwd)(double, double),
                 void (*bwd)(double g, double av, double bv, double& ga, double& gb)) {
    require_same_graph(a, b);
    Graph& g = graph_of(a);
    require_same_shape(g.value(a), g.value(b), name);
    return g.custom(
        {a, b},
        [fwd](const std::vector<const Tensor*>& in) {
            Tensor out = *in[0];
            for (std::size_t i = 0; i < out.size(); ++i) {
                out.values[i] = fwd(in[0]->values[i], in[1]->values[i]);
            }
            return out;
        },
        [bwd](const std::vector<const Tensor*>& in, const Tensor&, std::span<const double> g,
              const std::vector<std::span<double>>& pg) {
            for (std::size_t i = 0; i < g.size(); ++i) {
                bwd(g[i], in[0]->values[i], in[1]->values[i], pg[0][i], pg[1][i]);
            }
        });
}

}  // namespace

Var add(Var a, Var b) {
    return elementwise2(
        a, b, "add", [](double x, double y) { return x + y; },
        [](double g, double, double, double& ga, double& gb) {
            ga += g;
            gb += g;
        });
}

Var sub(Var a, Var b) {
    return elementwise2(
        a, b, "sub", [](double x, double y) { return x - y; },
        [](double g, double, double, double& ga, double& gb) {
            ga += g;
            gb -= g;
        });
}

Var mul(Var a, Var b) {
    return elementwise2(
        a, b, "mul", [](double x, double y) { return x * y; },
        [](double g, double av, double bv, double& ga, double& gb) {
            ga += g * bv;
            gb += g * av;
        });
}

Var complement(Var x) {
    return graph_of(x).custom(
        {x},
        [](const std::vector<const Tensor*>& in) {
            Tensor out = *in[0];
            for (double& v : out.values) v = 1.0 - v;
            return out;
        },
        [](const std::vector<const Tensor*>&, const Tensor&, std::span<const double> g,
           const std::vector<std::span<double>>& pg) {
            for (std::size_t i = 0; i < g.size(); ++i) pg[0][i] -= g[i];
        });
}

Var concat(std::span<const Var> parts) {
    if (parts.empty()) throw ShapeError("concat: no inputs");
    Graph& g = graph_of(parts[0]);
    std::vector<Var> parents;
    parents.reserve(parts.size());
    for (Var p : parts) {
        require_same_graph(parts[0], p);
        if (g.value(p).shape.size() > 1) {
            throw ShapeError("concat: expected vectors/scalars, got " +
                             shape_str(g.value(p).shape));
        }
        parents.push_back(p);
    }
    return g.custom(
        parents,
        [](const std::vector<const Tensor*>& in) {
            std::vector<double> out;
            for (const Tensor* t : in) out.insert(out.end(), t->values.begin(), t->values.end());
            return Tensor::vec(std::move(out));
        },
        [](const std::vector<const Tensor*>& in, const Tensor&, std::span<const double> g,
           const std::vector<std::span<double>>& pg) {
            std::size_t off = 0;
            for (std::size_t k = 0; k < in.size(); ++k) {
                for (std::size_t i = 0; i < in[k]->size(); ++i) pg[k][i] += g[off + i];
                off += in[k]->size();
            }
        });
}

Var sum(Var x) {
    return graph_of(x).custom(
        {x},
        [](const std::vector<const Tensor*>& in) {
            double acc = 0.0;
            for (double v : in[0]->values) acc += v;
            return Tensor::scalar(acc);
        },
        [](const std::vector<const Tensor*>&, const Tensor&, std::span<const double> g,
           const std::vector<std::span<double>>& pg) {
            for (std::size_t i = 0; i < pg[0].size(); ++i) pg[0][i] += g[0];
        });
}

Var row(Var m, std::size_t i) {
    Graph& g = graph_of(m);
    const Tensor& mv = g.value(m);
    if (!mv.is_matrix()) throw ShapeError("row: expected a matrix, got " + shape_str(mv.shape));
    if (i >= mv.rows()) {
        throw ShapeError("row: index " + std::to_string(i) + " out of range for " +
                         shape_str(mv.shape));
    }
    return g.custom(
        {m},
        [i](const std::vector<const Tensor*>& in) {
            const Tensor& M = *in[0];
            const std::size_t c = M.cols();
            return Tensor::vec(std::vector<double>(M.values.begin() + i * c,
                                                   M.values.begin() + (i + 1) * c));
        },
        [i](const std::vector<const Tensor*>& in, const Tensor&, std::span<const double> g,
            const std::vector<std::span<double>>& pg) {
            const std::size_t c = in[0]->cols();
            for (std::size_t j = 0; j < c; ++j) pg[0][i * c + j] += g[j];
        });
}

Var pick(Var v, std::size_t i) {
    Graph& g = graph_of(v);
    const Tensor& vv = g.value(v);
    if (!vv.is_vector()) throw ShapeError("pick: expected a vector, got " + shape_str(vv.shape));
    if (i >= vv.size()) {
        throw ShapeError("pick: index " + std::to_string(i) + " out of range for " +
                         shape_str(vv.shape));
    }
    return g.custom(
        {v},
        [i](const std::vector<const Tensor*>& in) { return Tensor::scalar(in[0]->values[i]); },
        [i](const std::vector<const Tensor*>&, const Tensor&, std::span<const double> g,
            const std::vector<std::span<double>>& pg) { pg[0][i] += g[0]; });
}

Var scale(Var v, Var s) {
    require_same_graph(v, s);
    Graph& g = graph_of(v);
    if (g.value(s).size() != 1) {
        throw ShapeError("scale: scale factor must be scalar, got " +
                         shape_str(g.value(s).shape));
    }
    return g.custom(
        {v, s},
        [](const std::vector<const Tensor*>& in) {
            Tensor out = *in[0];
            const double k = in[1]->values[0];
            for (double& x : out.values) x *= k;
            return out;
        },
        [](const std::vector<const Tensor*>& in, const Tensor&, std::span<const double> g,
           const std::vector<std::span<double>>& pg) {
            const double k = in[1]->values[0];
            double acc = 0.0;
            for (std::size_t i = 0; i < g.size(); ++i) {
                pg[0][i] += g[i] * k;
                acc += g[i] * in[0]->values[i];
            }
            pg[1][0] += acc;
        });
}

Var dot(Var a, Var b) {
    require_same_graph(a, b);
    Graph& g = graph_of(a);
    require_same_shape(g.value(a), g.value(b), "dot");
    return g.custom(
        {a, b},
        [](const std::vector<const Tensor*>& in) {
            double acc = 0.0;
            for (std::size_t i = 0; i < in[0]->size(); ++i) {
                acc += in[0]->values[i] * in[1]->values[i];
            }
            return Tensor::scalar(acc);
        },
        [](const std::vector<const Tensor*>& in, const Tensor&, std::span<const double> g,
           const std::vector<std::span<double>>& pg) {
            for (std::size_t i = 0; i < in[0]->size(); ++i) {
                pg[0][i] += g[0] * in[1]->values[i];
                pg[1][i] += g[0] * in[0]->values[i];
            }
        });
}

Var log_clamped(Var x, double floor) {
    return graph_of(x).custom(
        {x},
        [floor](const std::vector<const Tensor*>& in) {
            Tensor out = *in[0];
            for (double& v : out.values) v = std::log(std::max(v, floor));
            return out;
        },
        [floor](const std::vector<const Tensor*>& in, const Tensor&, std::span<const double> g,
                const std::vector<std::span<double>>& pg) {
            for (std::size_t i = 0; i < g.size(); ++i) {
                const double v = in[0]->values[i];
                if (v > floor) pg[0][i] += g[i] / v;
            }
        });
}

Var neg(Var x) {
    return graph_of(x).custom(
        {x},
        [](const std::vector<const Tensor*>& in) {
            Tensor out = *in[0];
            for (double& v : out.values) v = -v;
            return out;
        },
        [](const std::vector<const Tensor*>&, const Tensor&, std::span<const double> g,
           const std::vector<std::span<double>>& pg) {
            for (std::size_t i = 0; i < g.size(); ++i) pg[0][i] -= g[i];
        });
}

}  // namespace sern
