#include "sern/attention.hpp"

#include <cmath>

namespace sern {

std::string to_string(ScoreKind kind) {
    switch (kind) {
        case ScoreKind::dot: return "dot";
        case ScoreKind::general: return "general";
        case ScoreKind::concat: return "concat";
    }
    return "dot";
}

ScoreKind score_kind_from_string(const std::string& s) {
    if (s == "dot") return ScoreKind::dot;
    if (s == "general") return ScoreKind::general;
    if (s == "concat") return ScoreKind::concat;
    throw ContractError("unknown score kind: " + s);
}

AttentionParams AttentionParams::init(ScoreKind kind, std::size_t d, std::size_t d_attn,
                                      std::mt19937& rng) {
    AttentionParams p;
    p.kind = kind;
    const double k = 1.0 / std::sqrt(static_cast<double>(d));
    switch (kind) {
        case ScoreKind::dot:
            break;
        case ScoreKind::general:
            p.w_a = Tensor::uniform({d, d}, -k, k, rng);
            break;
        case ScoreKind::concat:
            p.w_a = Tensor::uniform({d_attn, 2 * d}, -k, k, rng);
            p.u_a = Tensor::uniform({d_attn}, -k, k, rng);
            break;
    }
    return p;
}

std::vector<Tensor*> AttentionParams::parameters() {
    switch (kind) {
        case ScoreKind::dot: return {};
        case ScoreKind::general: return {&w_a};
        case ScoreKind::concat: return {&w_a, &u_a};
    }
    return {};
}

AttentionVars stage(Graph& g, AttentionParams& p) {
    AttentionVars v;
    v.kind = p.kind;
    if (p.kind == ScoreKind::general) v.w_a = g.leaf(p.w_a);
    if (p.kind == ScoreKind::concat) {
        v.w_a = g.leaf(p.w_a);
        v.u_a = g.leaf(p.u_a);
    }
    return v;
}

Var attention_score(const AttentionVars& p, Var h_t, Var h_s) {
    switch (p.kind) {
        case ScoreKind::dot: return dot(h_t, h_s);
        case ScoreKind::general: return dot(h_t, matvec(p.w_a, h_s));
        case ScoreKind::concat: return dot(p.u_a, tanh_act(matvec(p.w_a, concat(h_t, h_s))));
    }
    throw ContractError("attention_score: bad kind");
}

std::size_t attended_range(std::size_t s, std::optional<std::size_t> window) {
    if (window && *window < 1) throw ContractError("attention window must be >= 1");
    return window ? std::min(s, *window) : s;
}

Var causal_weights(const AttentionVars& p, std::span<const Var> states,
                   std::optional<std::size_t> window) {
    if (states.empty()) throw ContractError("causal_weights: no states");
    const std::size_t s = states.size();
    const std::size_t len = attended_range(s, window);
    const Var h_s = states[s - 1];

    std::vector<Var> scores;
    scores.reserve(len);
    for (std::size_t t = s - len; t < s; ++t) {
        scores.push_back(attention_score(p, states[t], h_s));
    }
    return softmax(concat(scores));
}

Var context_vector(Var weights, std::span<const Var> states_in_range) {
    Graph& g = *weights.graph;
    if (g.value(weights).size() != states_in_range.size()) {
        throw ShapeError("context_vector: " + std::to_string(g.value(weights).size()) +
                         " weights vs " + std::to_string(states_in_range.size()) + " states");
    }
    Var acc = scale(states_in_range[0], pick(weights, 0));
    for (std::size_t t = 1; t < states_in_range.size(); ++t) {
        acc = add(acc, scale(states_in_range[t], pick(weights, t)));
    }
    return acc;
}

}  // namespace sern
