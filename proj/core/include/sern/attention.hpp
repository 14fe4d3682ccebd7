#pragma once

#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sern/graph.hpp"

namespace sern {

/// Affinity measure between two hidden states.
///   dot:     h_t' h_s            (parameter-free)
///   general: h_t' W_a h_s        W_a (d x d)
///   concat:  u_a' tanh(W_a [h_t; h_s])   W_a (d_a x 2d), u_a (d_a)
enum class ScoreKind { dot, general, concat };

std::string to_string(ScoreKind kind);
ScoreKind score_kind_from_string(const std::string& s);

struct AttentionParams {
    ScoreKind kind = ScoreKind::dot;
    Tensor w_a;  // unused for dot
    Tensor u_a;  // concat only

    static AttentionParams init(ScoreKind kind, std::size_t d, std::size_t d_attn,
                                std::mt19937& rng);
    std::vector<Tensor*> parameters();
};

struct AttentionVars {
    ScoreKind kind = ScoreKind::dot;
    Var w_a;
    Var u_a;
};

AttentionVars stage(Graph& g, AttentionParams& p);

Var attention_score(const AttentionVars& p, Var h_t, Var h_s);

/// Softmax-normalized affinities of the newest state against the attended
/// range. `states` holds h_1..h_s in order; the range covers the latest
/// min(s, window) positions, current position included.
Var causal_weights(const AttentionVars& p, std::span<const Var> states,
                   std::optional<std::size_t> window);

/// Weighted sum of the states in the attended range.
Var context_vector(Var weights, std::span<const Var> states_in_range);

/// Per-position attention rows captured from a forward pass.
/// `first_index` is the 0-based absolute dialog position of the first
/// attended state; weights cover first_index .. first_index+len-1.
struct AttentionTrace {
    struct Row {
        std::size_t first_index = 0;
        std::vector<double> weights;
    };
    std::vector<Row> rows;
};

/// Number of attended positions at 1-based position s.
std::size_t attended_range(std::size_t s, std::optional<std::size_t> window);

}  // namespace sern
