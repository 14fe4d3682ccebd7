#pragma once

#include <random>
#include <span>
#include <vector>

#include "sern/graph.hpp"

namespace sern {

/// Gate weights of a GRU cell:
///   z_t = sigmoid(W_z x_t + U_z h_{t-1} + b_z)
///   r_t = sigmoid(W_r x_t + U_r h_{t-1} + b_r)
///   h_t = (1 - z_t) o h_{t-1} + z_t o tanh(W_h x_t + U_h (r_t o h_{t-1}) + b_h)
/// Note the update-gate convention: z_t multiplies the candidate.
struct GruParams {
    Tensor w_z, w_r, w_h;  // (d_hidden x d_in)
    Tensor u_z, u_r, u_h;  // (d_hidden x d_hidden)
    Tensor b_z, b_r, b_h;  // (d_hidden)

    static GruParams init(std::size_t d_in, std::size_t d_hidden, std::mt19937& rng);
    std::size_t hidden_dim() const { return b_z.size(); }
    std::size_t input_dim() const { return w_z.cols(); }
    std::vector<Tensor*> parameters();
};

/// Gate weights of an LSTM cell (forget / input / output / candidate).
struct LstmParams {
    Tensor w_f, w_i, w_o, w_c;
    Tensor u_f, u_i, u_o, u_c;
    Tensor b_f, b_i, b_o, b_c;

    static LstmParams init(std::size_t d_in, std::size_t d_hidden, std::mt19937& rng);
    std::size_t hidden_dim() const { return b_f.size(); }
    std::size_t input_dim() const { return w_f.cols(); }
    std::vector<Tensor*> parameters();
};

struct GruVars {
    Var w_z, w_r, w_h, u_z, u_r, u_h, b_z, b_r, b_h;
};
struct LstmVars {
    Var w_f, w_i, w_o, w_c, u_f, u_i, u_o, u_c, b_f, b_i, b_o, b_c;
};

GruVars stage(Graph& g, GruParams& p);
LstmVars stage(Graph& g, LstmParams& p);

struct LstmState {
    Var h, c;
};

Var gru_step(const GruVars& p, Var x, Var h_prev);
LstmState lstm_step(const LstmVars& p, Var x, const LstmState& prev);

Var zero_state(Graph& g, std::size_t dim);
LstmState zero_lstm_state(Graph& g, std::size_t dim);

/// Apply the step T times with shared params; returns all T hidden states.
std::vector<Var> run_gru(const GruVars& p, std::span<const Var> inputs, Var h0);
std::vector<Var> run_lstm(const LstmVars& p, std::span<const Var> inputs, const LstmState& s0);

/// Forward pass over the inputs plus a backward pass over the reversed
/// inputs. `states[t]` is concat(h_fwd_t, h_bwd_t) with the backward state
/// aligned to original position t; `final_concat` concatenates the last state
/// of each direction (forward at T, backward at 1).
struct BiOutput {
    std::vector<Var> states;
    Var final_concat;
};

BiOutput run_bilstm(const LstmVars& fwd, const LstmVars& bwd, std::span<const Var> inputs);
BiOutput run_bigru(const GruVars& fwd, const GruVars& bwd, std::span<const Var> inputs);

}  // namespace sern
