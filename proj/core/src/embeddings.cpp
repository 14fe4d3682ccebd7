#include "sern/embeddings.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace sern {

Tensor init_embeddings(std::size_t vocab_size, std::size_t d_emb, std::uint64_t seed) {
    if (vocab_size < 2 || d_emb < 1) {
        throw ContractError("init_embeddings: vocab_size must be >= 2 and d_emb >= 1");
    }
    std::mt19937 rng(static_cast<std::uint32_t>(seed));
    Tensor table = Tensor::uniform({vocab_size, d_emb}, -0.05, 0.05, rng);
    for (std::size_t j = 0; j < d_emb; ++j) table.values[Vocabulary::kPad * d_emb + j] = 0.0;
    return table;
}

std::vector<Var> lookup(Var table, std::span<const int> token_ids) {
    Graph& g = *table.graph;
    const std::size_t vocab_size = g.value(table).rows();
    std::vector<Var> out;
    out.reserve(token_ids.size());
    for (int id : token_ids) {
        if (id < 0 || static_cast<std::size_t>(id) >= vocab_size) {
            throw ContractError("lookup: token id " + std::to_string(id) +
                                " out of range for vocab of " + std::to_string(vocab_size));
        }
        out.push_back(row(table, static_cast<std::size_t>(id)));
    }
    return out;
}

namespace {

struct Pair {
    int center;
    int context;
};

std::vector<Pair> collect_pairs(const std::vector<EncodedDialog>& corpus, std::size_t window) {
    std::vector<Pair> pairs;
    for (const EncodedDialog& d : corpus) {
        for (const EncodedUtterance& u : d.utterances) {
            const auto& ids = u.token_ids;
            const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(ids.size());
            const std::ptrdiff_t w = static_cast<std::ptrdiff_t>(window);
            for (std::ptrdiff_t i = 0; i < n; ++i) {
                for (std::ptrdiff_t j = std::max<std::ptrdiff_t>(0, i - w);
                     j <= std::min(n - 1, i + w); ++j) {
                    if (j == i) continue;
                    pairs.push_back({ids[static_cast<std::size_t>(i)],
                                     ids[static_cast<std::size_t>(j)]});
                }
            }
        }
    }
    return pairs;
}

}  // namespace

SkipgramModel skipgram_pretrain_full(const std::vector<EncodedDialog>& corpus, Tensor table,
                                     const SkipgramOptions& options, SkipgramResult* log) {
    if (options.window < 1) throw ContractError("skipgram window must be >= 1");

    const std::size_t vocab_size = table.rows();
    const std::size_t d_emb = table.cols();
    std::mt19937 rng(static_cast<std::uint32_t>(options.seed));
    const double k = 1.0 / std::sqrt(static_cast<double>(d_emb));
    Tensor output = Tensor::uniform({vocab_size, d_emb}, -k, k, rng);

    const std::vector<Pair> pairs = collect_pairs(corpus, options.window);

    for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
        if (pairs.empty()) break;
        Graph g;
        Var table_var = g.leaf(table);
        Var output_var = g.leaf(output);

        Var loss = g.constant_scalar(0.0);
        for (const Pair& p : pairs) {
            Var center = row(table_var, static_cast<std::size_t>(p.center));
            Var probs = softmax(matvec(output_var, center));
            loss = add(loss, neg(log_clamped(pick(probs, static_cast<std::size_t>(p.context)))));
        }
        // mean over pairs keeps the step size independent of corpus size
        loss = mul(loss, g.constant_scalar(1.0 / static_cast<double>(pairs.size())));
        g.backward(loss);
        if (log) log->epoch_loss.push_back(g.value(loss).values[0]);

        for (std::size_t i = 0; i < table.size(); ++i) {
            table.values[i] -= options.lr * table.grad[i];
        }
        for (std::size_t i = 0; i < output.size(); ++i) {
            output.values[i] -= options.lr * output.grad[i];
        }
        // PAD never occurs as center or context; keep its row pinned anyway.
        for (std::size_t j = 0; j < d_emb; ++j) table.values[Vocabulary::kPad * d_emb + j] = 0.0;
    }
    return SkipgramModel{std::move(table), std::move(output)};
}

SkipgramResult skipgram_pretrain(const std::vector<EncodedDialog>& corpus, Tensor& table,
                                 const SkipgramOptions& options) {
    SkipgramResult log;
    SkipgramModel trained = skipgram_pretrain_full(corpus, std::move(table), options, &log);
    table = std::move(trained.table);
    return log;
}

double skipgram_predict(const Tensor& table, const Tensor& output, int center, int context) {
    Graph g;
    Tensor t = table;
    Tensor o = output;
    Var probs = softmax(matvec(g.leaf(o), row(g.leaf(t), static_cast<std::size_t>(center))));
    return g.value(probs).values[static_cast<std::size_t>(context)];
}

// ---------------------------------------------------------------------------
// Save / load
// ---------------------------------------------------------------------------

void save_embeddings(const std::filesystem::path& path, const Tensor& table,
                     std::uint64_t vocab_hash) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write embeddings file: " + path.string());
    out << "sern-embeddings v1 vocab=" << hash_hex(vocab_hash) << " rows=" << table.rows()
        << " cols=" << table.cols() << '\n';
    out.precision(17);
    for (std::size_t r = 0; r < table.rows(); ++r) {
        for (std::size_t c = 0; c < table.cols(); ++c) {
            if (c > 0) out << ' ';
            out << table.at(r, c);
        }
        out << '\n';
    }
}

Tensor load_embeddings(const std::filesystem::path& path, std::uint64_t expected_vocab_hash) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open embeddings file: " + path.string());

    std::string magic, version, vocab_field, rows_field, cols_field;
    in >> magic >> version >> vocab_field >> rows_field >> cols_field;
    if (magic != "sern-embeddings" || version != "v1" || vocab_field.rfind("vocab=", 0) != 0 ||
        rows_field.rfind("rows=", 0) != 0 || cols_field.rfind("cols=", 0) != 0) {
        throw IoError("malformed embeddings header in " + path.string());
    }
    const std::string file_hash = vocab_field.substr(6);
    if (file_hash != hash_hex(expected_vocab_hash)) {
        throw IoError("embeddings file " + path.string() + " was built for vocabulary " +
                      file_hash + ", expected " + hash_hex(expected_vocab_hash));
    }
    const std::size_t rows = std::stoull(rows_field.substr(5));
    const std::size_t cols = std::stoull(cols_field.substr(5));

    std::vector<double> values(rows * cols);
    for (double& v : values) {
        if (!(in >> v)) throw IoError("truncated embeddings file: " + path.string());
    }
    return Tensor({rows, cols}, std::move(values));
}

}  // namespace sern
