#pragma once

#include <deque>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sern/attention.hpp"
#include "sern/embeddings.hpp"
#include "sern/recurrent.hpp"
#include "sern/text.hpp"

namespace sern {

/// sern: embeddings -> utterance BiLSTM -> dialog GRU -> causal self-attention
///       -> classifier.
/// bilstm: classifier directly on the utterance encoding (context-free).
/// bilstm_att: causal self-attention over the utterance encodings, no dialog GRU.
enum class ModelKind { sern, bilstm, bilstm_att };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& s);

struct ModelConfig {
    ModelKind kind = ModelKind::sern;
    ScoreKind score = ScoreKind::dot;
    std::optional<std::size_t> window;
    bool concat_state = false;  // classifier input: concat(c_s, state_s) instead of c_s
    std::size_t d_emb = 100;
    std::size_t d_lstm = 128;  // per direction
    std::size_t d_gru = 128;
    std::size_t d_attn = 64;  // concat-score inner dim
};

struct SernParams {
    ModelConfig config;
    std::size_t vocab_size = 0;
    std::size_t n_classes = 0;

    Tensor embedding;               // (vocab_size x d_emb), PAD row zero
    LstmParams utt_fwd, utt_bwd;    // utterance-level BiLSTM
    GruParams dialog;               // dialog-level GRU (sern only)
    AttentionParams attn;           // sern and bilstm_att
    Tensor w_out, b_out;            // classifier

    static SernParams init(const ModelConfig& config, std::size_t vocab_size,
                           std::size_t n_classes, std::uint64_t seed);

    /// Trainable tensors actually used by this model kind.
    std::vector<Tensor*> parameters();

    /// Dimensionality of the states the attention (and dialog encoder) runs
    /// over: d_gru for sern, 2*d_lstm for the baselines.
    std::size_t state_dim() const;
    std::size_t classifier_input_dim() const;
};

struct SernVars {
    ModelConfig config;
    Var embedding;
    LstmVars utt_fwd, utt_bwd;
    GruVars dialog;
    AttentionVars attn;
    Var w_out, b_out;
};

/// Stage parameters as trainable leaves (gradients flow back).
SernVars stage(Graph& g, SernParams& params);
/// Stage parameter values as constants (inference).
SernVars stage_frozen(Graph& g, const SernParams& params);

/// Embedding lookups + bidirectional LSTM; returns the concatenated final
/// states (dimension 2*d_lstm). Context-free: depends only on the tokens.
Var encode_utterance(const SernVars& vars, std::span<const int> token_ids);

struct DialogOutput {
    std::vector<Var> probs;  // one probability vector per utterance
    AttentionTrace trace;
};

/// Whole-dialog forward pass. Streaming one-utterance-at-a-time inference
/// through DialogRunState reproduces these outputs bit for bit.
DialogOutput forward_dialog(Graph& g, const SernVars& vars, const EncodedDialog& dialog);

int argmax(std::span<const double> values);

struct StreamResult {
    std::vector<double> probs;
    int predicted = -1;
    AttentionTrace::Row attention;
};

/// Online inference state for one dialog session: the dialog GRU hidden
/// vector, a window-bounded buffer of past dialog states, and the position
/// counter. Single-writer; params are shared read-only.
class DialogRunState {
public:
    explicit DialogRunState(const SernParams& params);

    /// Consume the next utterance, using only utterances seen so far.
    StreamResult push(std::span<const int> token_ids);
    void reset();
    std::size_t position() const { return position_; }
    std::size_t buffer_size() const { return buffer_.size(); }

private:
    const SernParams* params_;
    Tensor h_dial_;
    std::deque<Tensor> buffer_;
    std::size_t position_ = 0;
};

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

/// Corpus-preparation settings recorded in checkpoints so evaluation can
/// rebuild the exact split and verify the vocabulary hash.
struct DataConfig {
    std::string holdout_session;
    double validation_fraction = 0.07;
    std::uint64_t split_seed = 7;
    int min_frequency = 1;
    int regime = 6;
};

struct Checkpoint {
    SernParams params;
    Vocabulary vocab;
    EmotionSet emotions;
    DataConfig data;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace sern
