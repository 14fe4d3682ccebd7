#include "sern/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

namespace sern {

std::string to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::sern: return "sern";
        case ModelKind::bilstm: return "bilstm";
        case ModelKind::bilstm_att: return "bilstm_att";
    }
    return "sern";
}

ModelKind model_kind_from_string(const std::string& s) {
    if (s == "sern") return ModelKind::sern;
    if (s == "bilstm") return ModelKind::bilstm;
    if (s == "bilstm_att") return ModelKind::bilstm_att;
    throw ContractError("unknown model kind: " + s);
}

std::size_t SernParams::state_dim() const {
    return config.kind == ModelKind::sern ? config.d_gru : 2 * config.d_lstm;
}

std::size_t SernParams::classifier_input_dim() const {
    if (config.kind == ModelKind::bilstm) return 2 * config.d_lstm;
    return config.concat_state ? 2 * state_dim() : state_dim();
}

SernParams SernParams::init(const ModelConfig& config, std::size_t vocab_size,
                            std::size_t n_classes, std::uint64_t seed) {
    if (vocab_size < 2 || n_classes < 2) {
        throw ContractError("model needs vocab_size >= 2 and n_classes >= 2");
    }
    if (config.d_emb < 1 || config.d_lstm < 1 || config.d_gru < 1 || config.d_attn < 1) {
        throw ContractError("model dims must all be >= 1");
    }

    SernParams p;
    p.config = config;
    p.vocab_size = vocab_size;
    p.n_classes = n_classes;

    std::mt19937 rng(static_cast<std::uint32_t>(seed));
    p.embedding = init_embeddings(vocab_size, config.d_emb, rng());
    p.utt_fwd = LstmParams::init(config.d_emb, config.d_lstm, rng);
    p.utt_bwd = LstmParams::init(config.d_emb, config.d_lstm, rng);
    if (config.kind == ModelKind::sern) {
        p.dialog = GruParams::init(2 * config.d_lstm, config.d_gru, rng);
    }
    if (config.kind != ModelKind::bilstm) {
        p.attn = AttentionParams::init(config.score, p.state_dim(), config.d_attn, rng);
    }
    const double k = 1.0 / std::sqrt(static_cast<double>(p.classifier_input_dim()));
    p.w_out = Tensor::uniform({n_classes, p.classifier_input_dim()}, -k, k, rng);
    p.b_out = Tensor::uniform({n_classes}, -k, k, rng);
    return p;
}

std::vector<Tensor*> SernParams::parameters() {
    std::vector<Tensor*> out{&embedding};
    for (Tensor* t : utt_fwd.parameters()) out.push_back(t);
    for (Tensor* t : utt_bwd.parameters()) out.push_back(t);
    if (config.kind == ModelKind::sern) {
        for (Tensor* t : dialog.parameters()) out.push_back(t);
    }
    if (config.kind != ModelKind::bilstm) {
        for (Tensor* t : attn.parameters()) out.push_back(t);
    }
    out.push_back(&w_out);
    out.push_back(&b_out);
    return out;
}

namespace {

GruVars stage_gru_frozen(Graph& g, const GruParams& p) {
    auto c = [&g](const Tensor& t) { return g.constant(t); };
    return GruVars{c(p.w_z), c(p.w_r), c(p.w_h), c(p.u_z), c(p.u_r),
                   c(p.u_h), c(p.b_z), c(p.b_r), c(p.b_h)};
}

LstmVars stage_lstm_frozen(Graph& g, const LstmParams& p) {
    auto c = [&g](const Tensor& t) { return g.constant(t); };
    return LstmVars{c(p.w_f), c(p.w_i), c(p.w_o), c(p.w_c), c(p.u_f), c(p.u_i),
                    c(p.u_o), c(p.u_c), c(p.b_f), c(p.b_i), c(p.b_o), c(p.b_c)};
}

AttentionVars stage_attn_frozen(Graph& g, const AttentionParams& p) {
    AttentionVars v;
    v.kind = p.kind;
    if (p.kind == ScoreKind::general) v.w_a = g.constant(p.w_a);
    if (p.kind == ScoreKind::concat) {
        v.w_a = g.constant(p.w_a);
        v.u_a = g.constant(p.u_a);
    }
    return v;
}

}  // namespace

SernVars stage(Graph& g, SernParams& p) {
    SernVars v;
    v.config = p.config;
    v.embedding = g.leaf(p.embedding);
    v.utt_fwd = stage(g, p.utt_fwd);
    v.utt_bwd = stage(g, p.utt_bwd);
    if (p.config.kind == ModelKind::sern) v.dialog = stage(g, p.dialog);
    if (p.config.kind != ModelKind::bilstm) v.attn = stage(g, p.attn);
    v.w_out = g.leaf(p.w_out);
    v.b_out = g.leaf(p.b_out);
    return v;
}

SernVars stage_frozen(Graph& g, const SernParams& p) {
    SernVars v;
    v.config = p.config;
    v.embedding = g.constant(p.embedding);
    v.utt_fwd = stage_lstm_frozen(g, p.utt_fwd);
    v.utt_bwd = stage_lstm_frozen(g, p.utt_bwd);
    if (p.config.kind == ModelKind::sern) v.dialog = stage_gru_frozen(g, p.dialog);
    if (p.config.kind != ModelKind::bilstm) v.attn = stage_attn_frozen(g, p.attn);
    v.w_out = g.constant(p.w_out);
    v.b_out = g.constant(p.b_out);
    return v;
}

Var encode_utterance(const SernVars& vars, std::span<const int> token_ids) {
    if (token_ids.empty()) throw ContractError("encode_utterance: empty utterance");
    std::vector<Var> embedded = lookup(vars.embedding, token_ids);
    return run_bilstm(vars.utt_fwd, vars.utt_bwd, embedded).final_concat;
}

namespace {

// Attention + classifier over the dialog-state sequence; shared by the batch
// and streaming paths so both produce identical arithmetic.
struct ClassifyOutput {
    Var probs;
    AttentionTrace::Row attention;
};

ClassifyOutput classify_from_states(const SernVars& vars, std::span<const Var> states) {
    if (states.empty()) throw ContractError("classify: no dialog states buffered");
    const std::size_t s = states.size();
    const std::size_t len = attended_range(s, vars.config.window);
    std::span<const Var> range = states.subspan(s - len, len);

    Var weights = causal_weights(vars.attn, states, vars.config.window);
    Var context = context_vector(weights, range);
    Var input = vars.config.concat_state ? concat(context, states[s - 1]) : context;
    Var probs = softmax(affine(input, vars.w_out, vars.b_out));

    const Tensor& w = weights.graph->value(weights);
    AttentionTrace::Row trace_row;
    trace_row.first_index = s - len;
    trace_row.weights = w.values;
    return {probs, std::move(trace_row)};
}

ClassifyOutput classify_context_free(const SernVars& vars, Var f_utt, std::size_t position) {
    Var probs = softmax(affine(f_utt, vars.w_out, vars.b_out));
    AttentionTrace::Row trace_row;
    trace_row.first_index = position;
    trace_row.weights = {1.0};
    return {probs, std::move(trace_row)};
}

}  // namespace

DialogOutput forward_dialog(Graph& g, const SernVars& vars, const EncodedDialog& dialog) {
    if (dialog.utterances.empty()) throw ContractError("forward_dialog: empty dialog");

    DialogOutput out;
    std::vector<Var> states;  // f_dial for sern, f_utt for the baselines
    Var h = (vars.config.kind == ModelKind::sern) ? zero_state(g, vars.config.d_gru) : Var{};

    for (std::size_t s = 0; s < dialog.utterances.size(); ++s) {
        Var f_utt = encode_utterance(vars, dialog.utterances[s].token_ids);

        ClassifyOutput step;
        switch (vars.config.kind) {
            case ModelKind::sern: {
                h = gru_step(vars.dialog, f_utt, h);
                states.push_back(h);
                step = classify_from_states(vars, states);
                break;
            }
            case ModelKind::bilstm_att: {
                states.push_back(f_utt);
                step = classify_from_states(vars, states);
                break;
            }
            case ModelKind::bilstm: {
                step = classify_context_free(vars, f_utt, s);
                break;
            }
        }
        out.probs.push_back(step.probs);
        out.trace.rows.push_back(std::move(step.attention));
    }
    return out;
}

int argmax(std::span<const double> values) {
    if (values.empty()) throw ContractError("argmax of empty vector");
    return static_cast<int>(std::max_element(values.begin(), values.end()) - values.begin());
}

// ---------------------------------------------------------------------------
// Streaming
// ---------------------------------------------------------------------------

DialogRunState::DialogRunState(const SernParams& params) : params_(&params) { reset(); }

void DialogRunState::reset() {
    h_dial_ = Tensor::zeros({params_->config.d_gru});
    buffer_.clear();
    position_ = 0;
}

StreamResult DialogRunState::push(std::span<const int> token_ids) {
    Graph g;
    SernVars vars = stage_frozen(g, *params_);
    Var f_utt = encode_utterance(vars, token_ids);

    ClassifyOutput step;
    if (params_->config.kind == ModelKind::bilstm) {
        step = classify_context_free(vars, f_utt, position_);
    } else {
        Var newest = f_utt;
        if (params_->config.kind == ModelKind::sern) {
            newest = gru_step(vars.dialog, f_utt, g.constant(h_dial_));
            h_dial_ = g.value(newest);
        }
        buffer_.push_back(g.value(newest));
        if (params_->config.window && buffer_.size() > *params_->config.window) {
            buffer_.pop_front();
        }

        std::vector<Var> states;
        states.reserve(buffer_.size());
        for (std::size_t i = 0; i + 1 < buffer_.size(); ++i) states.push_back(g.constant(buffer_[i]));
        states.push_back(newest);

        step = classify_from_states(vars, states);
        // classify_from_states numbers rows relative to the buffer; shift to
        // absolute dialog positions.
        step.attention.first_index += position_ + 1 - buffer_.size();
    }

    StreamResult result;
    result.probs = g.value(step.probs).values;
    result.predicted = argmax(result.probs);
    result.attention = std::move(step.attention);
    ++position_;
    return result;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

using nlohmann::json;

namespace {

json tensor_to_json(const Tensor& t) {
    return json{{"shape", t.shape}, {"values", t.values}};
}

Tensor tensor_from_json(const json& j) {
    return Tensor(j.at("shape").get<Shape>(), j.at("values").get<std::vector<double>>());
}

json gru_to_json(const GruParams& p) {
    return json{{"w_z", tensor_to_json(p.w_z)}, {"w_r", tensor_to_json(p.w_r)},
                {"w_h", tensor_to_json(p.w_h)}, {"u_z", tensor_to_json(p.u_z)},
                {"u_r", tensor_to_json(p.u_r)}, {"u_h", tensor_to_json(p.u_h)},
                {"b_z", tensor_to_json(p.b_z)}, {"b_r", tensor_to_json(p.b_r)},
                {"b_h", tensor_to_json(p.b_h)}};
}

GruParams gru_from_json(const json& j) {
    GruParams p;
    p.w_z = tensor_from_json(j.at("w_z"));
    p.w_r = tensor_from_json(j.at("w_r"));
    p.w_h = tensor_from_json(j.at("w_h"));
    p.u_z = tensor_from_json(j.at("u_z"));
    p.u_r = tensor_from_json(j.at("u_r"));
    p.u_h = tensor_from_json(j.at("u_h"));
    p.b_z = tensor_from_json(j.at("b_z"));
    p.b_r = tensor_from_json(j.at("b_r"));
    p.b_h = tensor_from_json(j.at("b_h"));
    return p;
}

json lstm_to_json(const LstmParams& p) {
    return json{{"w_f", tensor_to_json(p.w_f)}, {"w_i", tensor_to_json(p.w_i)},
                {"w_o", tensor_to_json(p.w_o)}, {"w_c", tensor_to_json(p.w_c)},
                {"u_f", tensor_to_json(p.u_f)}, {"u_i", tensor_to_json(p.u_i)},
                {"u_o", tensor_to_json(p.u_o)}, {"u_c", tensor_to_json(p.u_c)},
                {"b_f", tensor_to_json(p.b_f)}, {"b_i", tensor_to_json(p.b_i)},
                {"b_o", tensor_to_json(p.b_o)}, {"b_c", tensor_to_json(p.b_c)}};
}

LstmParams lstm_from_json(const json& j) {
    LstmParams p;
    p.w_f = tensor_from_json(j.at("w_f"));
    p.w_i = tensor_from_json(j.at("w_i"));
    p.w_o = tensor_from_json(j.at("w_o"));
    p.w_c = tensor_from_json(j.at("w_c"));
    p.u_f = tensor_from_json(j.at("u_f"));
    p.u_i = tensor_from_json(j.at("u_i"));
    p.u_o = tensor_from_json(j.at("u_o"));
    p.u_c = tensor_from_json(j.at("u_c"));
    p.b_f = tensor_from_json(j.at("b_f"));
    p.b_i = tensor_from_json(j.at("b_i"));
    p.b_o = tensor_from_json(j.at("b_o"));
    p.b_c = tensor_from_json(j.at("b_c"));
    return p;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    const SernParams& p = ckpt.params;
    json j;
    j["format"] = "sern-checkpoint";
    j["version"] = 1;

    json model;
    model["kind"] = to_string(p.config.kind);
    model["score"] = to_string(p.config.score);
    if (p.config.window) {
        model["window"] = *p.config.window;
    } else {
        model["window"] = nullptr;
    }
    model["concat_state"] = p.config.concat_state;
    model["dims"] = {{"emb", p.config.d_emb},
                     {"lstm", p.config.d_lstm},
                     {"gru", p.config.d_gru},
                     {"attn", p.config.d_attn}};
    model["n_classes"] = p.n_classes;
    j["model"] = std::move(model);

    j["emotions"] = {{"classes", ckpt.emotions.classes},
                     {"merges", ckpt.emotions.merges},
                     {"omitted", std::vector<std::string>(ckpt.emotions.omitted.begin(),
                                                          ckpt.emotions.omitted.end())}};

    j["vocab"] = {{"tokens", ckpt.vocab.tokens()},
                  {"min_frequency", ckpt.vocab.min_frequency()},
                  {"hash", hash_hex(ckpt.vocab.hash())}};

    j["data"] = {{"holdout_session", ckpt.data.holdout_session},
                 {"validation_fraction", ckpt.data.validation_fraction},
                 {"split_seed", ckpt.data.split_seed},
                 {"min_frequency", ckpt.data.min_frequency},
                 {"regime", ckpt.data.regime}};

    json params;
    params["embedding"] = tensor_to_json(p.embedding);
    params["utt_fwd"] = lstm_to_json(p.utt_fwd);
    params["utt_bwd"] = lstm_to_json(p.utt_bwd);
    if (p.config.kind == ModelKind::sern) params["dialog"] = gru_to_json(p.dialog);
    if (p.config.kind != ModelKind::bilstm) {
        json attn;
        attn["kind"] = to_string(p.attn.kind);
        if (p.attn.kind != ScoreKind::dot) attn["w_a"] = tensor_to_json(p.attn.w_a);
        if (p.attn.kind == ScoreKind::concat) attn["u_a"] = tensor_to_json(p.attn.u_a);
        params["attention"] = std::move(attn);
    }
    params["w_out"] = tensor_to_json(p.w_out);
    params["b_out"] = tensor_to_json(p.b_out);
    j["params"] = std::move(params);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint: " + path.string());
    out << j.dump() << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open checkpoint: " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw IoError("malformed checkpoint " + path.string() + ": " + e.what());
    }

    try {
        if (j.at("format").get<std::string>() != "sern-checkpoint" ||
            j.at("version").get<int>() != 1) {
            throw IoError("unsupported checkpoint format in " + path.string());
        }

        Checkpoint ckpt;
        const json& model = j.at("model");
        ModelConfig config;
        config.kind = model_kind_from_string(model.at("kind").get<std::string>());
        config.score = score_kind_from_string(model.at("score").get<std::string>());
        if (!model.at("window").is_null()) {
            config.window = model.at("window").get<std::size_t>();
        }
        config.concat_state = model.at("concat_state").get<bool>();
        config.d_emb = model.at("dims").at("emb").get<std::size_t>();
        config.d_lstm = model.at("dims").at("lstm").get<std::size_t>();
        config.d_gru = model.at("dims").at("gru").get<std::size_t>();
        config.d_attn = model.at("dims").at("attn").get<std::size_t>();

        SernParams& p = ckpt.params;
        p.config = config;
        p.n_classes = model.at("n_classes").get<std::size_t>();

        const json& params = j.at("params");
        p.embedding = tensor_from_json(params.at("embedding"));
        p.vocab_size = p.embedding.rows();
        p.utt_fwd = lstm_from_json(params.at("utt_fwd"));
        p.utt_bwd = lstm_from_json(params.at("utt_bwd"));
        if (config.kind == ModelKind::sern) p.dialog = gru_from_json(params.at("dialog"));
        if (config.kind != ModelKind::bilstm) {
            const json& attn = params.at("attention");
            p.attn.kind = score_kind_from_string(attn.at("kind").get<std::string>());
            if (p.attn.kind != ScoreKind::dot) p.attn.w_a = tensor_from_json(attn.at("w_a"));
            if (p.attn.kind == ScoreKind::concat) p.attn.u_a = tensor_from_json(attn.at("u_a"));
        }
        p.w_out = tensor_from_json(params.at("w_out"));
        p.b_out = tensor_from_json(params.at("b_out"));

        const json& emotions = j.at("emotions");
        ckpt.emotions.classes = emotions.at("classes").get<std::vector<std::string>>();
        ckpt.emotions.merges =
            emotions.at("merges").get<std::map<std::string, std::string>>();
        for (const auto& s : emotions.at("omitted").get<std::vector<std::string>>()) {
            ckpt.emotions.omitted.insert(s);
        }

        const json& vocab = j.at("vocab");
        ckpt.vocab = Vocabulary::from_tokens(vocab.at("tokens").get<std::vector<std::string>>(),
                                             vocab.at("min_frequency").get<int>());
        if (hash_hex(ckpt.vocab.hash()) != vocab.at("hash").get<std::string>()) {
            throw IoError("checkpoint vocabulary hash does not match its token list");
        }

        const json& data = j.at("data");
        ckpt.data.holdout_session = data.at("holdout_session").get<std::string>();
        ckpt.data.validation_fraction = data.at("validation_fraction").get<double>();
        ckpt.data.split_seed = data.at("split_seed").get<std::uint64_t>();
        ckpt.data.min_frequency = data.at("min_frequency").get<int>();
        ckpt.data.regime = data.at("regime").get<int>();
        return ckpt;
    } catch (const json::exception& e) {
        throw IoError("malformed checkpoint " + path.string() + ": " + e.what());
    }
}

}  // namespace sern
