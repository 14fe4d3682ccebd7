#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "sern/graph.hpp"
#include "sern/text.hpp"

namespace sern {

/// Word-embedding table of shape (vocab_size x d_emb), entries uniform in
/// [-0.05, 0.05] under `seed`. The PAD row is zeroed and stays zero for the
/// lifetime of the model (PAD never occurs in encoded text).
Tensor init_embeddings(std::size_t vocab_size, std::size_t d_emb, std::uint64_t seed);

/// Row lookups through the graph; gradients scatter-add onto the selected
/// rows only.
std::vector<Var> lookup(Var table, std::span<const int> token_ids);

struct SkipgramOptions {
    std::size_t window = 2;
    std::size_t epochs = 0;
    double lr = 0.1;
    std::uint64_t seed = 42;  // output-layer init
};

struct SkipgramResult {
    std::vector<double> epoch_loss;  // mean loss per center/context pair
};

/// Full-softmax skip-gram warm start: each center word predicts every context
/// word within +-window inside its utterance. One full-batch gradient-descent
/// step per epoch; updates `table` in place and never touches the PAD row.
SkipgramResult skipgram_pretrain(const std::vector<EncodedDialog>& corpus, Tensor& table,
                                 const SkipgramOptions& options);

/// Probability that `center` predicts `context` under the trained table and
/// the given output matrix; inspection helper for the pretraining objective.
double skipgram_predict(const Tensor& table, const Tensor& output, int center, int context);

/// Text matrix format: header line with version, vocab hash and dims, then
/// one row per line. Round-trips doubles exactly.
void save_embeddings(const std::filesystem::path& path, const Tensor& table,
                     std::uint64_t vocab_hash);
Tensor load_embeddings(const std::filesystem::path& path, std::uint64_t expected_vocab_hash);

/// The output (context-prediction) matrix trained alongside the table; only
/// needed by callers that want to inspect the objective after pretraining.
struct SkipgramModel {
    Tensor table;
    Tensor output;
};

SkipgramModel skipgram_pretrain_full(const std::vector<EncodedDialog>& corpus, Tensor table,
                                     const SkipgramOptions& options, SkipgramResult* log);

}  // namespace sern
