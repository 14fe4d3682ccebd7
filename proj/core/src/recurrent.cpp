#include "sern/recurrent.hpp"

#include <cmath>

namespace sern {

namespace {

// Uniform in [-k, k] with k = 1/sqrt(d_hidden); keeps early activations in
// the linear regime.
Tensor init_weight(std::size_t rows, std::size_t cols, std::size_t d_hidden, std::mt19937& rng) {
    const double k = 1.0 / std::sqrt(static_cast<double>(d_hidden));
    return Tensor::uniform({rows, cols}, -k, k, rng);
}

Tensor init_bias(std::size_t d_hidden, std::mt19937& rng) {
    const double k = 1.0 / std::sqrt(static_cast<double>(d_hidden));
    return Tensor::uniform({d_hidden}, -k, k, rng);
}

}  // namespace

GruParams GruParams::init(std::size_t d_in, std::size_t d_hidden, std::mt19937& rng) {
    GruParams p;
    p.w_z = init_weight(d_hidden, d_in, d_hidden, rng);
    p.w_r = init_weight(d_hidden, d_in, d_hidden, rng);
    p.w_h = init_weight(d_hidden, d_in, d_hidden, rng);
    p.u_z = init_weight(d_hidden, d_hidden, d_hidden, rng);
    p.u_r = init_weight(d_hidden, d_hidden, d_hidden, rng);
    p.u_h = init_weight(d_hidden, d_hidden, d_hidden, rng);
    p.b_z = init_bias(d_hidden, rng);
    p.b_r = init_bias(d_hidden, rng);
    p.b_h = init_bias(d_hidden, rng);
    return p;
}

std::vector<Tensor*> GruParams::parameters() {
    return {&w_z, &w_r, &w_h, &u_z, &u_r, &u_h, &b_z, &b_r, &b_h};
}

LstmParams LstmParams::init(std::size_t d_in, std::size_t d_hidden, std::mt19937& rng) {
    LstmParams p;
    p.w_f = init_weight(d_hidden, d_in, d_hidden, rng);
    p.w_i = init_weight(d_hidden, d_in, d_hidden, rng);
    p.w_o = init_weight(d_hidden, d_in, d_hidden, rng);
    p.w_c = init_weight(d_hidden, d_in, d_hidden, rng);
    p.u_f = init_weight(d_hidden, d_hidden, d_hidden, rng);
    p.u_i = init_weight(d_hidden, d_hidden, d_hidden, rng);
    p.u_o = init_weight(d_hidden, d_hidden, d_hidden, rng);
    p.u_c = init_weight(d_hidden, d_hidden, d_hidden, rng);
    p.b_f = init_bias(d_hidden, rng);
    p.b_i = init_bias(d_hidden, rng);
    p.b_o = init_bias(d_hidden, rng);
    p.b_c = init_bias(d_hidden, rng);
    return p;
}

std::vector<Tensor*> LstmParams::parameters() {
    return {&w_f, &w_i, &w_o, &w_c, &u_f, &u_i, &u_o, &u_c, &b_f, &b_i, &b_o, &b_c};
}

GruVars stage(Graph& g, GruParams& p) {
    return GruVars{g.leaf(p.w_z), g.leaf(p.w_r), g.leaf(p.w_h), g.leaf(p.u_z), g.leaf(p.u_r),
                   g.leaf(p.u_h), g.leaf(p.b_z), g.leaf(p.b_r), g.leaf(p.b_h)};
}

LstmVars stage(Graph& g, LstmParams& p) {
    return LstmVars{g.leaf(p.w_f), g.leaf(p.w_i), g.leaf(p.w_o), g.leaf(p.w_c),
                    g.leaf(p.u_f), g.leaf(p.u_i), g.leaf(p.u_o), g.leaf(p.u_c),
                    g.leaf(p.b_f), g.leaf(p.b_i), g.leaf(p.b_o), g.leaf(p.b_c)};
}

namespace {

// W x + U h + b
Var gate_preact(Var x, Var w, Var h, Var u, Var b) {
    return add(affine(x, w, b), matvec(u, h));
}

}  // namespace

Var gru_step(const GruVars& p, Var x, Var h_prev) {
    Var z = sigmoid(gate_preact(x, p.w_z, h_prev, p.u_z, p.b_z));
    Var r = sigmoid(gate_preact(x, p.w_r, h_prev, p.u_r, p.b_r));
    Var candidate = tanh_act(add(affine(x, p.w_h, p.b_h), matvec(p.u_h, mul(r, h_prev))));
    return add(mul(complement(z), h_prev), mul(z, candidate));
}

LstmState lstm_step(const LstmVars& p, Var x, const LstmState& prev) {
    Var f = sigmoid(gate_preact(x, p.w_f, prev.h, p.u_f, p.b_f));
    Var i = sigmoid(gate_preact(x, p.w_i, prev.h, p.u_i, p.b_i));
    Var o = sigmoid(gate_preact(x, p.w_o, prev.h, p.u_o, p.b_o));
    Var candidate = tanh_act(gate_preact(x, p.w_c, prev.h, p.u_c, p.b_c));
    Var c = add(mul(f, prev.c), mul(i, candidate));
    Var h = mul(o, tanh_act(c));
    return LstmState{h, c};
}

Var zero_state(Graph& g, std::size_t dim) {
    return g.constant(Tensor::zeros({dim}));
}

LstmState zero_lstm_state(Graph& g, std::size_t dim) {
    return LstmState{zero_state(g, dim), zero_state(g, dim)};
}

std::vector<Var> run_gru(const GruVars& p, std::span<const Var> inputs, Var h0) {
    if (inputs.empty()) throw ContractError("run_gru: empty input sequence");
    std::vector<Var> states;
    states.reserve(inputs.size());
    Var h = h0;
    for (Var x : inputs) {
        h = gru_step(p, x, h);
        states.push_back(h);
    }
    return states;
}

std::vector<Var> run_lstm(const LstmVars& p, std::span<const Var> inputs, const LstmState& s0) {
    if (inputs.empty()) throw ContractError("run_lstm: empty input sequence");
    std::vector<Var> states;
    states.reserve(inputs.size());
    LstmState s = s0;
    for (Var x : inputs) {
        s = lstm_step(p, x, s);
        states.push_back(s.h);
    }
    return states;
}

namespace {

template <typename RunFn>
BiOutput run_bidirectional(std::span<const Var> inputs, RunFn&& run_one_direction) {
    if (inputs.empty()) throw ContractError("bidirectional: empty input sequence");
    std::vector<Var> reversed(inputs.rbegin(), inputs.rend());

    std::vector<Var> fwd_states = run_one_direction(inputs, /*forward=*/true);
    std::vector<Var> bwd_states = run_one_direction(std::span<const Var>(reversed),
                                                    /*forward=*/false);

    const std::size_t t_count = inputs.size();
    BiOutput out;
    out.states.reserve(t_count);
    for (std::size_t t = 0; t < t_count; ++t) {
        // bwd_states[k] corresponds to original position t_count-1-k
        out.states.push_back(concat(fwd_states[t], bwd_states[t_count - 1 - t]));
    }
    out.final_concat = concat(fwd_states.back(), bwd_states.back());
    return out;
}

}  // namespace

BiOutput run_bilstm(const LstmVars& fwd, const LstmVars& bwd, std::span<const Var> inputs) {
    Graph* g = inputs.empty() ? nullptr : inputs[0].graph;
    if (g && g->value(fwd.b_f).size() != g->value(bwd.b_f).size()) {
        throw ShapeError("run_bilstm: forward/backward hidden dims differ: " +
                         std::to_string(g->value(fwd.b_f).size()) + " vs " +
                         std::to_string(g->value(bwd.b_f).size()));
    }
    return run_bidirectional(inputs, [&](std::span<const Var> seq, bool forward) {
        const LstmVars& vars = forward ? fwd : bwd;
        const std::size_t dim = g->value(vars.b_f).size();
        return run_lstm(vars, seq, zero_lstm_state(*g, dim));
    });
}

BiOutput run_bigru(const GruVars& fwd, const GruVars& bwd, std::span<const Var> inputs) {
    Graph* g = inputs.empty() ? nullptr : inputs[0].graph;
    if (g && g->value(fwd.b_z).size() != g->value(bwd.b_z).size()) {
        throw ShapeError("run_bigru: forward/backward hidden dims differ: " +
                         std::to_string(g->value(fwd.b_z).size()) + " vs " +
                         std::to_string(g->value(bwd.b_z).size()));
    }
    return run_bidirectional(inputs, [&](std::span<const Var> seq, bool forward) {
        const GruVars& vars = forward ? fwd : bwd;
        const std::size_t dim = g->value(vars.b_z).size();
        return run_gru(vars, seq, zero_state(*g, dim));
    });
}

}  // namespace sern
