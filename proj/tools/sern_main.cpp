// Command-line front end: corpus ingestion, training, evaluation, streaming
// inference and attention-weight dumps.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "sern/model.hpp"
#include "sern/training.hpp"

namespace fs = std::filesystem;
using namespace sern;

namespace {

constexpr int kExitError = 1;
constexpr int kExitUsage = 2;
constexpr int kExitDiverged = 3;

std::string resolve_corpus(std::string corpus_flag) {
    if (!corpus_flag.empty()) return corpus_flag;
    if (const char* dir = std::getenv("SERN_DATA_DIR")) {
        return (fs::path(dir) / "sample_corpus.jsonl").string();
    }
    throw ContractError("no --corpus given and SERN_DATA_DIR is not set");
}

std::string last_session(const std::vector<RawDialog>& dialogs) {
    std::string last;
    for (const RawDialog& d : dialogs) last = std::max(last, d.session);
    return last;
}

struct TrainFlags {
    std::string corpus;
    std::string checkpoint = "sern.ckpt";
    std::string log_path;
    std::string model = "sern";
    std::string score = "dot";
    int regime = 6;
    std::size_t window = 0;  // 0 = unwindowed
    bool concat_state = false;
    std::uint64_t seed = 7;
    double lr = 5e-3;
    std::size_t epochs = 50;
    std::size_t patience = 10;
    std::string holdout;  // empty = last session in the corpus
    double val_fraction = 0.07;
    int min_freq = 1;
    std::size_t d_emb = 100, d_lstm = 128, d_gru = 128, d_attn = 64;
    std::size_t pretrain_epochs = 0;
    std::size_t pretrain_window = 2;
    double pretrain_lr = 0.5;
    double target_train_acc = 0.0;  // 0 = disabled
};

int cmd_train(const TrainFlags& flags) {
    const std::string corpus_path = resolve_corpus(flags.corpus);
    std::vector<RawDialog> corpus = load_corpus(corpus_path);
    if (corpus.empty()) throw IoError("corpus is empty: " + corpus_path);

    const std::string holdout = flags.holdout.empty() ? last_session(corpus) : flags.holdout;
    CorpusSplit split = split_corpus(corpus, holdout, flags.val_fraction, flags.seed);

    Vocabulary vocab = Vocabulary::build(split.train, flags.min_freq);
    EmotionSet emotions = EmotionSet::regime(flags.regime);
    std::vector<EncodedDialog> train_set = encode_corpus(split.train, vocab, emotions);
    std::vector<EncodedDialog> val_set = encode_corpus(split.validation, vocab, emotions);
    if (train_set.empty() || val_set.empty()) {
        throw ContractError("train or validation split is empty after encoding");
    }

    ModelConfig config;
    config.kind = model_kind_from_string(flags.model);
    config.score = score_kind_from_string(flags.score);
    if (flags.window > 0) config.window = flags.window;
    config.concat_state = flags.concat_state;
    config.d_emb = flags.d_emb;
    config.d_lstm = flags.d_lstm;
    config.d_gru = flags.d_gru;
    config.d_attn = flags.d_attn;

    SernParams params = SernParams::init(config, vocab.size(), emotions.size(), flags.seed);

    if (flags.pretrain_epochs > 0) {
        SkipgramOptions sg;
        sg.window = flags.pretrain_window;
        sg.epochs = flags.pretrain_epochs;
        sg.lr = flags.pretrain_lr;
        sg.seed = flags.seed;
        SkipgramResult sg_log = skipgram_pretrain(train_set, params.embedding, sg);
        std::cout << "pretrain: " << sg_log.epoch_loss.size() << " epochs, skip-gram loss "
                  << sg_log.epoch_loss.front() << " -> " << sg_log.epoch_loss.back() << "\n";
    }

    TrainOptions options;
    options.epochs = flags.epochs;
    options.patience = flags.patience;
    options.adam.alpha = flags.lr;
    options.seed = flags.seed;
    if (flags.target_train_acc > 0.0) options.target_train_accuracy = flags.target_train_acc;

    TrainResult result = train(std::move(params), train_set, val_set, options);

    Checkpoint ckpt;
    ckpt.params = std::move(result.best);
    ckpt.vocab = vocab;
    ckpt.emotions = emotions;
    ckpt.data.holdout_session = holdout;
    ckpt.data.validation_fraction = flags.val_fraction;
    ckpt.data.split_seed = flags.seed;
    ckpt.data.min_frequency = flags.min_freq;
    ckpt.data.regime = flags.regime;
    save_checkpoint(flags.checkpoint, ckpt);

    const std::string log_path =
        flags.log_path.empty() ? flags.checkpoint + ".log" : flags.log_path;
    save_training_log(log_path, result.log);

    for (const EpochLog& e : result.log) {
        std::cout << "epoch " << e.epoch << " train_loss " << std::fixed << std::setprecision(4)
                  << e.train_loss << " val_acc " << e.val_accuracy << " val_f1 " << e.val_macro_f1
                  << "\n";
    }
    std::cout << "best epoch " << result.best_epoch << ", checkpoint written to "
              << flags.checkpoint << "\n";
    return 0;
}

struct EvalFlags {
    std::string corpus;
    std::string checkpoint;
    std::string split = "test";
};

int cmd_eval(const EvalFlags& flags) {
    Checkpoint ckpt = load_checkpoint(flags.checkpoint);
    const std::string corpus_path = resolve_corpus(flags.corpus);
    std::vector<RawDialog> corpus = load_corpus(corpus_path);

    CorpusSplit split = split_corpus(corpus, ckpt.data.holdout_session,
                                     ckpt.data.validation_fraction, ckpt.data.split_seed);
    Vocabulary rebuilt = Vocabulary::build(split.train, ckpt.data.min_frequency);
    if (rebuilt.hash() != ckpt.vocab.hash()) {
        throw ContractError("vocabulary hash mismatch: checkpoint was trained on a different "
                            "corpus or preprocessing (checkpoint " +
                            hash_hex(ckpt.vocab.hash()) + ", corpus " + hash_hex(rebuilt.hash()) +
                            ")");
    }

    const std::vector<RawDialog>* chosen = nullptr;
    if (flags.split == "train") chosen = &split.train;
    else if (flags.split == "validation") chosen = &split.validation;
    else if (flags.split == "test") chosen = &split.test;
    else throw ContractError("--split must be train, validation or test");

    std::vector<EncodedDialog> encoded = encode_corpus(*chosen, ckpt.vocab, ckpt.emotions);
    if (encoded.empty()) throw ContractError("split \"" + flags.split + "\" is empty");

    EvalResult eval = evaluate(ckpt.params, encoded);
    std::cout << "split " << flags.split << ": " << encoded.size() << " dialogs, "
              << eval.cm.total() << " utterances\n\n";
    std::cout << format_report(eval, ckpt.emotions);
    return 0;
}

int cmd_infer_stream(const std::string& checkpoint) {
    Checkpoint ckpt = load_checkpoint(checkpoint);
    DialogRunState state(ckpt.params);

    std::string line;
    while (std::getline(std::cin, line)) {
        std::vector<std::string> tokens = tokenize(line);
        if (tokens.empty()) {
            if (line.find_first_not_of(" \t\r") == std::string::npos) {
                state.reset();
            } else {
                std::cerr << "warning: line produced no tokens, skipped\n";
            }
            continue;
        }
        std::vector<int> ids;
        ids.reserve(tokens.size());
        for (const std::string& t : tokens) ids.push_back(ckpt.vocab.id(t));

        StreamResult r = state.push(ids);
        std::cout << ckpt.emotions.classes[static_cast<std::size_t>(r.predicted)] << "\tprobs=[";
        for (std::size_t i = 0; i < r.probs.size(); ++i) {
            if (i) std::cout << ',';
            std::cout << std::fixed << std::setprecision(6) << r.probs[i];
        }
        std::cout << "]\tattn=[";
        for (std::size_t i = 0; i < r.attention.weights.size(); ++i) {
            if (i) std::cout << ',';
            std::cout << std::fixed << std::setprecision(3) << r.attention.weights[i];
        }
        std::cout << "]" << std::endl;  // flush before the next line is read
    }
    return 0;
}

std::string csv_quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

struct DumpFlags {
    std::string corpus;
    std::string checkpoint;
    std::string dialog_id;
    std::size_t window = 0;  // 0 = use the checkpoint's window (or dialog length)
    std::string out;
};

int cmd_attn_dump(const DumpFlags& flags) {
    Checkpoint ckpt = load_checkpoint(flags.checkpoint);
    const std::string corpus_path = resolve_corpus(flags.corpus);
    std::vector<RawDialog> corpus = load_corpus(corpus_path);

    const RawDialog* found = nullptr;
    for (const RawDialog& d : corpus) {
        if (d.dialog_id == flags.dialog_id) found = &d;
    }
    if (!found) throw ContractError("dialog \"" + flags.dialog_id + "\" not found in corpus");

    std::optional<EncodedDialog> encoded = encode(*found, ckpt.vocab, ckpt.emotions);
    if (!encoded) throw ContractError("dialog has no utterances after encoding");

    SernParams params = ckpt.params;
    if (flags.window > 0) params.config.window = flags.window;

    Graph g;
    DialogOutput run = forward_dialog(g, stage_frozen(g, params), *encoded);

    const std::size_t columns =
        params.config.window ? *params.config.window : encoded->utterances.size();

    const std::string out_path =
        flags.out.empty() ? "attn_" + flags.dialog_id + ".csv" : flags.out;
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw IoError("cannot write " + out_path);

    out << "utterance";
    for (std::size_t c = columns; c-- > 0;) {
        if (c == 0) out << ",t";
        else out << ",t-" << c;
    }
    out << ",predicted,gold\n";

    for (std::size_t s = 0; s < encoded->utterances.size(); ++s) {
        const EncodedUtterance& u = encoded->utterances[s];
        std::string text = u.text;
        if (text.size() > 24) text = text.substr(0, 21) + "...";
        out << csv_quote(text);

        const std::vector<double>& weights = run.trace.rows[s].weights;
        for (std::size_t c = 0; c < columns; ++c) {
            out << ',';
            // weights right-align into the latest columns (blank where s < range)
            if (c + weights.size() >= columns) {
                const std::size_t w = c + weights.size() - columns;
                out << std::fixed << std::setprecision(2) << weights[w];
            }
        }
        const int predicted = argmax(g.value(run.probs[s]).values);
        out << ',' << ckpt.emotions.classes[static_cast<std::size_t>(predicted)] << ','
            << ckpt.emotions.classes[static_cast<std::size_t>(u.label)] << "\n";
    }
    std::cout << "wrote " << out_path << "\n";
    return 0;
}

struct IngestFlags {
    std::string input;
    std::string output = "corpus.jsonl";
};

int cmd_ingest(const IngestFlags& flags) {
    IngestResult result = ingest_directory(flags.input);
    for (const std::string& err : result.file_errors) std::cerr << "error: " << err << "\n";
    if (result.dialogs.empty()) throw IoError("no dialogs could be ingested from " + flags.input);

    save_corpus(flags.output, result.dialogs);

    // Utterance counts per emotion over the raw labels
    const std::vector<std::string> display_order = {"angry",      "sad",     "happy",
                                                    "frustrated", "excited", "neutral"};
    std::map<std::string, std::size_t> counts;
    std::size_t omitted = 0, total = 0;
    EmotionSet six = EmotionSet::regime(6);
    for (const RawDialog& d : result.dialogs) {
        for (const RawUtterance& u : d.utterances) {
            ++total;
            std::optional<int> id = six.label_id(u.label);
            if (id) counts[six.classes[static_cast<std::size_t>(*id)]]++;
            else ++omitted;
        }
    }

    std::cout << "ingested " << result.dialogs.size() << " dialogs, " << total
              << " utterances -> " << flags.output << "\n";
    std::cout << "class     ";
    for (const std::string& c : display_order) std::cout << std::setw(12) << c;
    std::cout << "\nutterances";
    for (const std::string& c : display_order) std::cout << std::setw(12) << counts[c];
    std::cout << "\nomitted   " << std::setw(12) << omitted << "\n";
    return result.file_errors.empty() ? 0 : kExitError;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hierarchical dialog emotion classifier with causal self-attention"};
    app.require_subcommand(1);

    IngestFlags ingest_flags;
    CLI::App* ingest = app.add_subcommand("ingest", "Convert raw transcripts to the corpus format");
    ingest->add_option("--input", ingest_flags.input, "Directory of raw transcripts")->required();
    ingest->add_option("--output", ingest_flags.output, "Corpus file to write");

    TrainFlags train_flags;
    CLI::App* train_cmd = app.add_subcommand("train", "Train a model and write a checkpoint");
    train_cmd->add_option("--corpus", train_flags.corpus, "Corpus file (JSONL)");
    train_cmd->add_option("--checkpoint", train_flags.checkpoint, "Checkpoint file to write");
    train_cmd->add_option("--log", train_flags.log_path, "Training log (default <checkpoint>.log)");
    train_cmd->add_option("--model", train_flags.model, "sern|bilstm|bilstm_att")
        ->check(CLI::IsMember({"sern", "bilstm", "bilstm_att"}));
    train_cmd->add_option("--score", train_flags.score, "dot|general|concat")
        ->check(CLI::IsMember({"dot", "general", "concat"}));
    train_cmd->add_option("--regime", train_flags.regime, "Emotion classes: 4, 5 or 6")
        ->check(CLI::IsMember({4, 5, 6}));
    train_cmd->add_option("--window", train_flags.window, "Attention window (latest N positions)");
    train_cmd->add_flag("--concat-state", train_flags.concat_state,
                        "Classifier input concat(context, state)");
    train_cmd->add_option("--seed", train_flags.seed, "Seed for split/init/shuffling");
    train_cmd->add_option("--lr", train_flags.lr, "Adam learning rate");
    train_cmd->add_option("--epochs", train_flags.epochs, "Max training epochs");
    train_cmd->add_option("--patience", train_flags.patience, "Early-stopping patience");
    train_cmd->add_option("--holdout", train_flags.holdout,
                          "Test session (default: last session in the corpus)");
    train_cmd->add_option("--val-fraction", train_flags.val_fraction, "Validation fraction");
    train_cmd->add_option("--min-freq", train_flags.min_freq, "Vocabulary frequency threshold");
    train_cmd->add_option("--d-emb", train_flags.d_emb, "Embedding size");
    train_cmd->add_option("--d-lstm", train_flags.d_lstm, "Utterance LSTM size per direction");
    train_cmd->add_option("--d-gru", train_flags.d_gru, "Dialog GRU size");
    train_cmd->add_option("--d-attn", train_flags.d_attn, "Concat-score inner size");
    train_cmd->add_option("--pretrain-epochs", train_flags.pretrain_epochs,
                          "Skip-gram warm-start epochs (0 = off)");
    train_cmd->add_option("--pretrain-window", train_flags.pretrain_window, "Skip-gram window");
    train_cmd->add_option("--pretrain-lr", train_flags.pretrain_lr, "Skip-gram learning rate");
    train_cmd->add_option("--target-train-acc", train_flags.target_train_acc,
                          "Stop once training accuracy reaches this value (0 = off)");

    EvalFlags eval_flags;
    CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a corpus split");
    eval_cmd->add_option("--checkpoint", eval_flags.checkpoint, "Checkpoint file")->required();
    eval_cmd->add_option("--corpus", eval_flags.corpus, "Corpus file (JSONL)");
    eval_cmd->add_option("--split", eval_flags.split, "train|validation|test");

    std::string stream_checkpoint;
    CLI::App* stream_cmd =
        app.add_subcommand("infer-stream", "Online inference, one utterance per line");
    stream_cmd->add_option("--checkpoint", stream_checkpoint, "Checkpoint file")->required();

    DumpFlags dump_flags;
    CLI::App* dump_cmd = app.add_subcommand("attn-dump", "Write attention weights as CSV");
    dump_cmd->add_option("--checkpoint", dump_flags.checkpoint, "Checkpoint file")->required();
    dump_cmd->add_option("--corpus", dump_flags.corpus, "Corpus file (JSONL)");
    dump_cmd->add_option("--dialog-id", dump_flags.dialog_id, "Dialog to dump")->required();
    dump_cmd->add_option("--window", dump_flags.window, "Override the attention window");
    dump_cmd->add_option("--out", dump_flags.out, "Output CSV (default attn_<dialog-id>.csv)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? 0 : kExitUsage;
    }

    try {
        if (*ingest) return cmd_ingest(ingest_flags);
        if (*train_cmd) return cmd_train(train_flags);
        if (*eval_cmd) return cmd_eval(eval_flags);
        if (*stream_cmd) return cmd_infer_stream(stream_checkpoint);
        if (*dump_cmd) return cmd_attn_dump(dump_flags);
    } catch (const DivergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDiverged;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
    return kExitUsage;
}
