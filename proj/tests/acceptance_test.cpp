// Acceptance suite: one line per criterion, nonzero exit on any failure.
//
// Criteria:
//   1. gradient fidelity of every differentiable operation + end-to-end
//   2. equation conformance of the recurrent cells vs scalar oracles
//   3. attention invariants (simplex, causality, window semantics)
//   4. online/offline equivalence of streaming inference
//   5. metric arithmetic on reference confusion matrices
//   6. learning capability on the bundled separable corpus
//   7. ablation machinery across emotion regimes and window sizes
//   8. byte-identical determinism of every CLI command

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <vector>

#include "sern/grad_check.hpp"
#include "sern/model.hpp"
#include "sern/training.hpp"
#include "test_support.hpp"

using namespace sern;
namespace fs = std::filesystem;

namespace {

struct Criterion {
    std::string detail;
    bool ok = true;
    int checks = 0;

    void expect(bool condition, const std::string& why) {
        ++checks;
        if (!condition && ok) {
            ok = false;
            detail = why;
        } else if (!condition) {
            detail += "; " + why;
        }
    }
};

int failures = 0;

void report(int number, const std::string& name, const Criterion& c, double seconds) {
    std::printf("[%s] %d. %s: %s (%d checks, %.1fs)\n", c.ok ? "PASS" : "FAIL", number,
                name.c_str(), c.ok ? c.detail.c_str() : c.detail.c_str(), c.checks, seconds);
    std::fflush(stdout);
    if (!c.ok) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2e", v);
    return buf;
}

// ---------------------------------------------------------------------------
// 1. Gradient fidelity
// ---------------------------------------------------------------------------

void criterion_gradients() {
    const auto start = std::chrono::steady_clock::now();
    Criterion c;
    std::mt19937 rng(1001);
    const double kTol = 1e-6;
    const double kStep = 1e-5;
    double worst = 0.0;
    std::string worst_op;

    auto run_cases = [&](const char* op, int count,
                         const std::function<double(std::mt19937&)>& one_case) {
        double op_worst = 0.0;
        for (int i = 0; i < count; ++i) op_worst = std::max(op_worst, one_case(rng));
        c.expect(op_worst < kTol, std::string(op) + " rel err " + fmt(op_worst));
        if (op_worst > worst) {
            worst = op_worst;
            worst_op = op;
        }
    };

    auto weighted = [](Var v, Var r) { return sum(mul(v, r)); };
    auto rand_dim = [](std::mt19937& r) { return 1 + r() % 4; };

    run_cases("sigmoid", 100, [&](std::mt19937& r) {
        Tensor x = Tensor::uniform({rand_dim(r)}, -3, 3, r);
        Tensor w = Tensor::uniform(x.shape, -1, 1, r);
        Tensor* params[] = {&x};
        return grad_check(
            [&](Graph& g) { return weighted(sigmoid(g.leaf(x)), g.constant(w)); }, params, kStep);
    });
    run_cases("tanh", 100, [&](std::mt19937& r) {
        Tensor x = Tensor::uniform({rand_dim(r)}, -3, 3, r);
        Tensor w = Tensor::uniform(x.shape, -1, 1, r);
        Tensor* params[] = {&x};
        return grad_check(
            [&](Graph& g) { return weighted(tanh_act(g.leaf(x)), g.constant(w)); }, params, kStep);
    });
    run_cases("softmax", 100, [&](std::mt19937& r) {
        Tensor x = Tensor::uniform({1 + r() % 6}, -3, 3, r);
        Tensor w = Tensor::uniform(x.shape, -1, 1, r);
        Tensor* params[] = {&x};
        return grad_check(
            [&](Graph& g) { return weighted(softmax(g.leaf(x)), g.constant(w)); }, params, kStep);
    });
    run_cases("affine", 100, [&](std::mt19937& r) {
        const std::size_t rows = rand_dim(r), cols = rand_dim(r);
        Tensor x = Tensor::uniform({cols}, -2, 2, r);
        Tensor w = Tensor::uniform({rows, cols}, -1, 1, r);
        Tensor b = Tensor::uniform({rows}, -1, 1, r);
        Tensor reduce = Tensor::uniform({rows}, -1, 1, r);
        Tensor* params[] = {&x, &w, &b};
        return grad_check(
            [&](Graph& g) {
                return weighted(affine(g.leaf(x), g.leaf(w), g.leaf(b)), g.constant(reduce));
            },
            params, kStep);
    });
    run_cases("gru_step", 100, [&](std::mt19937& r) {
        const std::size_t d_in = rand_dim(r), d_h = rand_dim(r);
        GruParams cell = GruParams::init(d_in, d_h, r);
        Tensor x = Tensor::uniform({d_in}, -1, 1, r);
        Tensor h = Tensor::uniform({d_h}, -1, 1, r);
        Tensor reduce = Tensor::uniform({d_h}, -1, 1, r);
        std::vector<Tensor*> params = cell.parameters();
        params.push_back(&x);
        params.push_back(&h);
        return grad_check(
            [&](Graph& g) {
                return weighted(gru_step(stage(g, cell), g.leaf(x), g.leaf(h)),
                                g.constant(reduce));
            },
            params, kStep);
    });
    run_cases("lstm_step", 100, [&](std::mt19937& r) {
        const std::size_t d_in = rand_dim(r), d_h = rand_dim(r);
        LstmParams cell = LstmParams::init(d_in, d_h, r);
        Tensor x = Tensor::uniform({d_in}, -1, 1, r);
        Tensor h = Tensor::uniform({d_h}, -1, 1, r);
        Tensor cc = Tensor::uniform({d_h}, -1, 1, r);
        Tensor reduce = Tensor::uniform({d_h}, -1, 1, r);
        std::vector<Tensor*> params = cell.parameters();
        params.push_back(&x);
        params.push_back(&h);
        params.push_back(&cc);
        return grad_check(
            [&](Graph& g) {
                LstmState s = lstm_step(stage(g, cell), g.leaf(x),
                                        LstmState{g.leaf(h), g.leaf(cc)});
                return weighted(s.h, g.constant(reduce));
            },
            params, kStep);
    });
    run_cases("bidirectional", 100, [&](std::mt19937& r) {
        const std::size_t d_in = rand_dim(r), d_h = 1 + r() % 3;
        LstmParams fwd = LstmParams::init(d_in, d_h, r);
        LstmParams bwd = LstmParams::init(d_in, d_h, r);
        std::vector<Tensor> inputs;
        const std::size_t t_count = 1 + r() % 4;
        for (std::size_t t = 0; t < t_count; ++t) {
            inputs.push_back(Tensor::uniform({d_in}, -1, 1, r));
        }
        Tensor reduce = Tensor::uniform({2 * d_h}, -1, 1, r);
        std::vector<Tensor*> params = fwd.parameters();
        for (Tensor* t : bwd.parameters()) params.push_back(t);
        for (Tensor& t : inputs) params.push_back(&t);
        return grad_check(
            [&](Graph& g) {
                std::vector<Var> xs;
                for (Tensor& t : inputs) xs.push_back(g.leaf(t));
                return weighted(run_bilstm(stage(g, fwd), stage(g, bwd), xs).final_concat,
                                g.constant(reduce));
            },
            params, kStep);
    });
    for (ScoreKind kind : {ScoreKind::dot, ScoreKind::general, ScoreKind::concat}) {
        run_cases(("score_" + to_string(kind)).c_str(), 100, [&](std::mt19937& r) {
            const std::size_t d = 1 + r() % 4;
            AttentionParams attn = AttentionParams::init(kind, d, 1 + r() % 4, r);
            Tensor a = Tensor::uniform({d}, -1, 1, r);
            Tensor b = Tensor::uniform({d}, -1, 1, r);
            std::vector<Tensor*> params = attn.parameters();
            params.push_back(&a);
            params.push_back(&b);
            return grad_check(
                [&](Graph& g) {
                    return attention_score(stage(g, attn), g.leaf(a), g.leaf(b));
                },
                params, kStep);
        });
    }
    run_cases("causal_weights", 100, [&](std::mt19937& r) {
        const std::size_t d = 1 + r() % 3;
        const std::size_t count = 1 + r() % 5;
        AttentionParams attn = AttentionParams::init(ScoreKind::general, d, 2, r);
        std::vector<Tensor> states;
        for (std::size_t s = 0; s < count; ++s) states.push_back(Tensor::uniform({d}, -1, 1, r));
        std::optional<std::size_t> window;
        if (r() % 2) window = 1 + r() % 4;
        Tensor reduce = Tensor::uniform({attended_range(count, window)}, -1, 1, r);
        std::vector<Tensor*> params = attn.parameters();
        for (Tensor& s : states) params.push_back(&s);
        return grad_check(
            [&](Graph& g) {
                std::vector<Var> vs;
                for (Tensor& s : states) vs.push_back(g.leaf(s));
                return weighted(causal_weights(stage(g, attn), vs, window), g.constant(reduce));
            },
            params, kStep);
    });
    run_cases("context_vector", 100, [&](std::mt19937& r) {
        const std::size_t d = rand_dim(r), count = 1 + r() % 5;
        std::vector<Tensor> states;
        for (std::size_t s = 0; s < count; ++s) states.push_back(Tensor::uniform({d}, -1, 1, r));
        Tensor weights = Tensor::uniform({count}, -1, 1, r);
        Tensor reduce = Tensor::uniform({d}, -1, 1, r);
        std::vector<Tensor*> params = {&weights};
        for (Tensor& s : states) params.push_back(&s);
        return grad_check(
            [&](Graph& g) {
                std::vector<Var> vs;
                for (Tensor& s : states) vs.push_back(g.leaf(s));
                return weighted(context_vector(g.leaf(weights), vs), g.constant(reduce));
            },
            params, kStep);
    });
    run_cases("classifier", 100, [&](std::mt19937& r) {
        const std::size_t d = rand_dim(r), classes = 2 + r() % 4;
        Tensor x = Tensor::uniform({d}, -1, 1, r);
        Tensor w = Tensor::uniform({classes, d}, -1, 1, r);
        Tensor b = Tensor::uniform({classes}, -1, 1, r);
        Tensor reduce = Tensor::uniform({classes}, -1, 1, r);
        Tensor* params[] = {&x, &w, &b};
        return grad_check(
            [&](Graph& g) {
                return weighted(softmax(affine(g.leaf(x), g.leaf(w), g.leaf(b))),
                                g.constant(reduce));
            },
            params, kStep);
    });
    run_cases("cross_entropy", 100, [&](std::mt19937& r) {
        const std::size_t classes = 2 + r() % 5;
        Tensor logits = Tensor::uniform({classes}, -2, 2, r);
        const int label = static_cast<int>(r() % classes);
        Tensor* params[] = {&logits};
        return grad_check(
            [&](Graph& g) { return cross_entropy(softmax(g.leaf(logits)), label); }, params,
            kStep);
    });

    // end-to-end SERN on a two-utterance dialog
    {
        ModelConfig config;
        config.d_emb = 4;
        config.d_lstm = 3;
        config.d_gru = 3;
        config.d_attn = 3;
        SernParams params = SernParams::init(config, 8, 4, 77);
        EncodedDialog d;
        d.dialog_id = "e2e";
        EncodedUtterance u1, u2;
        u1.token_ids = {2, 5, 7};
        u1.label = 1;
        u2.token_ids = {3, 2, 6};
        u2.label = 3;
        d.utterances = {u1, u2};
        std::vector<Tensor*> tensors = params.parameters();
        const double e2e = grad_check(
            [&](Graph& g) { return dialog_loss(g, stage(g, params), d); }, tensors, kStep);
        c.expect(e2e < 1e-4, "end-to-end rel err " + fmt(e2e));
        const double elapsed = seconds_since(start);
        c.expect(elapsed < 120.0, "runtime " + std::to_string(elapsed) + "s exceeds 2 minutes");
        c.detail = "max op rel err " + fmt(worst) + " (" + worst_op + "), end-to-end " + fmt(e2e);
    }
    report(1, "gradient fidelity", c, seconds_since(start));
}

// ---------------------------------------------------------------------------
// 2. Equation conformance
// ---------------------------------------------------------------------------

void criterion_equations() {
    const auto start = std::chrono::steady_clock::now();
    Criterion c;
    std::mt19937 rng(2002);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        auto u = [&] { return oracle::uniform(rng, -1.5, 1.5); };
        oracle::ScalarGru sg{u(), u(), u(), u(), u(), u(), u(), u(), u()};
        oracle::ScalarLstm sl{u(), u(), u(), u(), u(), u(), u(), u(), u(), u(), u(), u()};

        GruParams gp;
        gp.w_z = Tensor::matrix(1, 1, {sg.w_z});
        gp.u_z = Tensor::matrix(1, 1, {sg.u_z});
        gp.b_z = Tensor::vec({sg.b_z});
        gp.w_r = Tensor::matrix(1, 1, {sg.w_r});
        gp.u_r = Tensor::matrix(1, 1, {sg.u_r});
        gp.b_r = Tensor::vec({sg.b_r});
        gp.w_h = Tensor::matrix(1, 1, {sg.w_h});
        gp.u_h = Tensor::matrix(1, 1, {sg.u_h});
        gp.b_h = Tensor::vec({sg.b_h});

        LstmParams lp;
        lp.w_f = Tensor::matrix(1, 1, {sl.w_f});
        lp.u_f = Tensor::matrix(1, 1, {sl.u_f});
        lp.b_f = Tensor::vec({sl.b_f});
        lp.w_i = Tensor::matrix(1, 1, {sl.w_i});
        lp.u_i = Tensor::matrix(1, 1, {sl.u_i});
        lp.b_i = Tensor::vec({sl.b_i});
        lp.w_o = Tensor::matrix(1, 1, {sl.w_o});
        lp.u_o = Tensor::matrix(1, 1, {sl.u_o});
        lp.b_o = Tensor::vec({sl.b_o});
        lp.w_c = Tensor::matrix(1, 1, {sl.w_c});
        lp.u_c = Tensor::matrix(1, 1, {sl.u_c});
        lp.b_c = Tensor::vec({sl.b_c});

        Graph g;
        GruVars gv = stage(g, gp);
        LstmVars lv = stage(g, lp);

        double h_impl = oracle::uniform(rng, -0.9, 0.9);
        double h_oracle = h_impl;
        oracle::ScalarLstm::State ls{oracle::uniform(rng, -0.9, 0.9),
                                     oracle::uniform(rng, -0.9, 0.9)};
        Var gh = g.constant_vec({h_impl});
        LstmState lstate{g.constant_vec({ls.h}), g.constant_vec({ls.c})};

        for (int t = 0; t < 4; ++t) {
            const double x = oracle::uniform(rng, -1.5, 1.5);
            gh = gru_step(gv, g.constant_vec({x}), gh);
            h_oracle = sg.step(x, h_oracle);
            worst = std::max(worst, std::abs(g.value(gh).values[0] - h_oracle));

            lstate = lstm_step(lv, g.constant_vec({x}), lstate);
            ls = sl.step(x, ls);
            worst = std::max(worst, std::abs(g.value(lstate.h).values[0] - ls.h));
            worst = std::max(worst, std::abs(g.value(lstate.c).values[0] - ls.c));
        }
        c.expect(worst < 1e-10, "cell output differs from the scalar oracle by " + fmt(worst));
    }
    c.detail = "50 random 1-d parameterizations, 4 steps each, max |diff| " + fmt(worst);
    report(2, "equation conformance", c, seconds_since(start));
}

// ---------------------------------------------------------------------------
// Shared helpers for 3, 4, 7
// ---------------------------------------------------------------------------

EncodedDialog random_dialog(std::mt19937& rng, std::size_t vocab, std::size_t classes,
                            std::size_t n_utt) {
    EncodedDialog d;
    d.dialog_id = "rnd";
    for (std::size_t s = 0; s < n_utt; ++s) {
        EncodedUtterance u;
        const std::size_t len = 1 + rng() % 4;
        for (std::size_t t = 0; t < len; ++t) {
            u.token_ids.push_back(2 + static_cast<int>(rng() % (vocab - 2)));
        }
        u.label = static_cast<int>(rng() % classes);
        d.utterances.push_back(std::move(u));
    }
    return d;
}

ModelConfig small_model(std::optional<std::size_t> window = std::nullopt) {
    ModelConfig config;
    config.d_emb = 6;
    config.d_lstm = 4;
    config.d_gru = 4;
    config.d_attn = 4;
    config.window = window;
    return config;
}

// ---------------------------------------------------------------------------
// 3. Attention invariants
// ---------------------------------------------------------------------------

void criterion_attention() {
    const auto start = std::chrono::steady_clock::now();
    Criterion c;
    std::mt19937 rng(3003);

    for (int trial = 0; trial < 20; ++trial) {
        std::optional<std::size_t> window;
        if (rng() % 2) window = 2 + rng() % 5;
        SernParams params = SernParams::init(small_model(window), 14, 6, rng());
        EncodedDialog d = random_dialog(rng, 14, 6, 3 + rng() % 6);

        Graph g;
        DialogOutput out = forward_dialog(g, stage_frozen(g, params), d);

        // simplex and causal range on every row
        for (std::size_t s = 0; s < out.trace.rows.size(); ++s) {
            const auto& row = out.trace.rows[s];
            double total = 0.0;
            for (double w : row.weights) {
                c.expect(w >= 0.0, "negative attention weight");
                total += w;
            }
            c.expect(std::abs(total - 1.0) <= 1e-9, "row sum off simplex by " +
                                                        fmt(std::abs(total - 1.0)));
            c.expect(row.first_index + row.weights.size() == s + 1,
                     "attention row reaches beyond the current position");
            c.expect(row.weights.size() == attended_range(s + 1, window),
                     "row length is not min(s, window)");
        }
        c.expect(out.trace.rows[0].weights == std::vector<double>{1.0},
                 "first row is not [1.0]");

        // causality: rewriting the future leaves the past bit-identical
        if (d.utterances.size() >= 3) {
            const std::size_t cut = d.utterances.size() / 2;
            EncodedDialog edited = d;
            for (std::size_t s = cut; s < edited.utterances.size(); ++s) {
                edited.utterances[s] = random_dialog(rng, 14, 6, 1).utterances[0];
            }
            Graph g2;
            DialogOutput before = forward_dialog(g2, stage_frozen(g2, params), d);
            Graph g3;
            DialogOutput after = forward_dialog(g3, stage_frozen(g3, params), edited);
            for (std::size_t s = 0; s < cut; ++s) {
                c.expect(g2.value(before.probs[s]).values == g3.value(after.probs[s]).values,
                         "editing future utterances changed a past prediction");
            }
        }
    }

    // window >= length <=> bit-identical to unwindowed
    SernParams base = SernParams::init(small_model(), 14, 6, 404);
    EncodedDialog d = random_dialog(rng, 14, 6, 5);
    SernParams wide = base;
    wide.config.window = 5;
    SernParams narrow = base;
    narrow.config.window = 3;

    auto probs_of = [&](const SernParams& p) {
        Graph g;
        DialogOutput out = forward_dialog(g, stage_frozen(g, p), d);
        std::vector<std::vector<double>> probs;
        for (Var v : out.probs) probs.push_back(g.value(v).values);
        return probs;
    };
    auto rows_of = [&](const SernParams& p) {
        Graph g;
        return forward_dialog(g, stage_frozen(g, p), d).trace;
    };
    c.expect(probs_of(base) == probs_of(wide),
             "window >= length is not bit-identical to unwindowed");
    c.expect(rows_of(narrow).rows[4].weights.size() == 3,
             "window < length did not bound the attention range");

    c.detail = "20 random dialogs: simplex, causality, window semantics, row 1 = [1.0]";
    report(3, "attention invariants", c, seconds_since(start));
}

// ---------------------------------------------------------------------------
// 4. Online/offline equivalence
// ---------------------------------------------------------------------------

void criterion_streaming() {
    const auto start = std::chrono::steady_clock::now();
    Criterion c;
    std::mt19937 rng(4004);
    for (int trial = 0; trial < 20; ++trial) {
        std::optional<std::size_t> window;
        if (rng() % 2) window = 2 + rng() % 4;
        const ModelKind kind = trial % 3 == 0   ? ModelKind::bilstm_att
                               : trial % 3 == 1 ? ModelKind::bilstm
                                                : ModelKind::sern;
        ModelConfig config = small_model(window);
        config.kind = kind;
        SernParams params = SernParams::init(config, 14, 6, rng());
        EncodedDialog d = random_dialog(rng, 14, 6, 2 + rng() % 7);

        Graph g;
        DialogOutput batch = forward_dialog(g, stage_frozen(g, params), d);
        DialogRunState state(params);
        for (std::size_t s = 0; s < d.utterances.size(); ++s) {
            StreamResult r = state.push(d.utterances[s].token_ids);
            c.expect(r.probs == g.value(batch.probs[s]).values,
                     "streaming probabilities differ from batch at position " +
                         std::to_string(s));
            c.expect(r.attention.weights == batch.trace.rows[s].weights,
                     "streaming attention row differs from batch");
            c.expect(r.attention.first_index == batch.trace.rows[s].first_index,
                     "streaming attention range differs from batch");
        }
    }
    c.detail = "20 random dialogs across all three model kinds, bit-identical";
    report(4, "online/offline equivalence", c, seconds_since(start));
}

// ---------------------------------------------------------------------------
// 5. Metric arithmetic on the reference tables
// ---------------------------------------------------------------------------

void criterion_metrics() {
    const auto start = std::chrono::steady_clock::now();
    Criterion c;

    auto check_table = [&](const char* name, const std::vector<std::vector<std::size_t>>& rows,
                           const std::vector<double>& recalls,
                           const std::vector<double>& precisions) {
        ConfusionMatrix cm(rows.size());
        cm.counts = rows;
        MetricsReport r = metrics(cm);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            c.expect(std::abs(r.recall[i] - recalls[i]) <= 1e-3,
                     std::string(name) + " recall[" + std::to_string(i) + "] = " +
                         std::to_string(r.recall[i]) + " vs " + std::to_string(recalls[i]));
            c.expect(std::abs(r.precision[i] - precisions[i]) <= 1e-3,
                     std::string(name) + " precision[" + std::to_string(i) + "] = " +
                         std::to_string(r.precision[i]) + " vs " +
                         std::to_string(precisions[i]));
        }
    };

    check_table("six-class",
                {{110, 2, 29, 0, 22, 7},
                 {9, 156, 8, 74, 27, 25},
                 {71, 6, 193, 1, 87, 23},
                 {14, 19, 0, 80, 29, 1},
                 {35, 34, 83, 11, 197, 24},
                 {9, 12, 42, 7, 11, 164}},
                {0.647, 0.522, 0.507, 0.559, 0.513, 0.669},
                {0.444, 0.681, 0.544, 0.462, 0.528, 0.672});

    check_table("five-class",
                {{122, 0, 0, 35, 13},
                 {7, 102, 121, 36, 33},
                 {10, 18, 71, 27, 17},
                 {34, 8, 21, 278, 43},
                 {15, 5, 11, 30, 184}},
                {0.718, 0.341, 0.497, 0.724, 0.751},
                {0.649, 0.767, 0.317, 0.685, 0.635});

    check_table("four-class",
                {{116, 1, 37, 16}, {19, 337, 42, 44}, {37, 40, 277, 30}, {16, 20, 29, 180}},
                {0.682, 0.762, 0.721, 0.735},
                {0.617, 0.847, 0.720, 0.667});

    const double f1 = f1_score(0.544, 0.517);
    c.expect(std::abs(f1 - 0.530) <= 1e-3,
             "F1(0.544, 0.517) = " + std::to_string(f1) + " vs 0.530");

    c.detail = "six/five/four-class tables reproduced within 1e-3; F1(0.544, 0.517) = 0.530";
    report(5, "metric arithmetic", c, seconds_since(start));
}

// ---------------------------------------------------------------------------
// 6. Learning capability on the bundled corpus
// ---------------------------------------------------------------------------

struct PreparedCorpus {
    std::vector<EncodedDialog> train, validation, all;
    Vocabulary vocab;
    EmotionSet emotions;
};

PreparedCorpus prepare_sample(int regime) {
    std::vector<RawDialog> corpus = load_corpus(SERN_SAMPLE_CORPUS);
    CorpusSplit split = split_corpus(corpus, "S04", 0.07, 7);
    PreparedCorpus out{.train = {},
                       .validation = {},
                       .all = {},
                       .vocab = Vocabulary::build(split.train, 1),
                       .emotions = EmotionSet::regime(regime)};
    out.train = encode_corpus(split.train, out.vocab, out.emotions);
    out.validation = encode_corpus(split.validation, out.vocab, out.emotions);
    out.all = encode_corpus(corpus, out.vocab, out.emotions);
    return out;
}

void criterion_learning() {
    const auto start = std::chrono::steady_clock::now();
    Criterion c;
    PreparedCorpus data = prepare_sample(6);

    ModelConfig config;
    config.d_emb = 16;
    config.d_lstm = 12;
    config.d_gru = 12;
    config.d_attn = 8;

    TrainOptions options;
    options.epochs = 200;
    options.patience = 200;
    options.seed = 7;
    options.target_train_accuracy = 1.0;

    TrainResult sern_run =
        train(SernParams::init(config, data.vocab.size(), 6, 7), data.train, data.validation,
              options);
    const double sern_acc = evaluate(sern_run.best, data.train).report.accuracy;
    c.expect(sern_acc == 1.0, "SERN train accuracy " + std::to_string(sern_acc) +
                                  " after " + std::to_string(sern_run.log.size()) + " epochs");
    c.expect(sern_run.log.size() <= 200, "SERN needed more than 200 epochs");

    ModelConfig baseline_config = config;
    baseline_config.kind = ModelKind::bilstm;
    TrainResult bilstm_run =
        train(SernParams::init(baseline_config, data.vocab.size(), 6, 7), data.train,
              data.validation, options);

    // planted-cue utterances = the final utterance of every dialog
    std::size_t correct = 0, total = 0;
    for (const EncodedDialog& d : data.all) {
        Graph g;
        DialogOutput out = forward_dialog(g, stage_frozen(g, bilstm_run.best), d);
        const std::size_t last = d.utterances.size() - 1;
        if (argmax(g.value(out.probs[last]).values) == d.utterances[last].label) ++correct;
        ++total;
    }
    const double baseline_acc = static_cast<double>(correct) / static_cast<double>(total);
    const double bound = 1.0 / 6.0 + 0.10;
    c.expect(baseline_acc <= bound, "context-free baseline got " + std::to_string(baseline_acc) +
                                        " on planted finals, above chance + 10%");

    const double elapsed = seconds_since(start);
    c.expect(elapsed < 300.0, "runtime exceeds 5 minutes");
    c.detail = "SERN 100% train accuracy in " + std::to_string(sern_run.log.size()) +
               " epochs; context-free baseline " + std::to_string(correct) + "/" +
               std::to_string(total) + " on planted finals (bound " + std::to_string(bound) + ")";
    report(6, "learning capability", c, elapsed);
}

// ---------------------------------------------------------------------------
// 7. Ablation machinery
// ---------------------------------------------------------------------------

void criterion_ablations() {
    const auto start = std::chrono::steady_clock::now();
    Criterion c;
    const std::optional<std::size_t> windows[] = {5, 10, 20, 40, std::nullopt};
    int combinations = 0;

    for (int regime : {4, 5, 6}) {
        PreparedCorpus data = prepare_sample(regime);
        for (const auto& window : windows) {
            ModelConfig config;
            config.d_emb = 8;
            config.d_lstm = 6;
            config.d_gru = 6;
            config.d_attn = 4;
            config.window = window;
            try {
                TrainOptions options;
                options.epochs = 2;
                options.patience = 5;
                options.seed = 7;
                TrainResult run = train(
                    SernParams::init(config, data.vocab.size(), data.emotions.size(), 7),
                    data.train, data.validation, options);
                EvalResult eval = evaluate(run.best, data.all);
                c.expect(eval.cm.total() > 0, "evaluation produced no predictions");
                c.expect(eval.report.accuracy >= 0.0 && eval.report.accuracy <= 1.0,
                         "accuracy outside [0, 1]");
                ++combinations;
            } catch (const std::exception& e) {
                c.expect(false, "regime " + std::to_string(regime) + " window " +
                                    (window ? std::to_string(*window) : "none") +
                                    " failed: " + e.what());
            }
        }
    }
    c.expect(combinations == 15, "expected 15 regime x window combinations");
    c.detail = "regimes {4,5,6} x windows {5,10,20,40,none} trained and evaluated";
    report(7, "ablation machinery", c, seconds_since(start));
}

// ---------------------------------------------------------------------------
// 8. CLI determinism
// ---------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run(const std::string& cmd) { return std::system(cmd.c_str()); }

void criterion_determinism() {
    const auto start = std::chrono::steady_clock::now();
    Criterion c;
    const fs::path scratch = fs::current_path() / "acceptance_scratch";
    fs::remove_all(scratch);
    fs::create_directories(scratch);

    const std::string cli = SERN_CLI_PATH;
    const std::string corpus = SERN_SAMPLE_CORPUS;
    const std::string raw = SERN_SAMPLE_RAW;
    const std::string sink = " >/dev/null 2>&1";

    auto path = [&](const char* name) { return (scratch / name).string(); };

    // ingest twice
    c.expect(run(cli + " ingest --input " + raw + " --output " + path("c1.jsonl") + sink) == 0,
             "ingest failed");
    c.expect(run(cli + " ingest --input " + raw + " --output " + path("c2.jsonl") + sink) == 0,
             "ingest failed");
    c.expect(slurp(path("c1.jsonl")) == slurp(path("c2.jsonl")), "ingest output differs");
    c.expect(slurp(path("c1.jsonl")) == slurp(corpus),
             "ingest output differs from the bundled corpus");

    // train twice with one seed, once with another
    const std::string train_flags = " train --corpus " + corpus +
                                    " --epochs 3 --patience 5 --d-emb 8 --d-lstm 6 --d-gru 6 "
                                    "--d-attn 4 --window 10";
    c.expect(run(cli + train_flags + " --seed 7 --checkpoint " + path("a.ckpt") + sink) == 0,
             "train failed");
    c.expect(run(cli + train_flags + " --seed 7 --checkpoint " + path("b.ckpt") + sink) == 0,
             "train failed");
    c.expect(run(cli + train_flags + " --seed 8 --checkpoint " + path("c.ckpt") + sink) == 0,
             "train failed");
    c.expect(slurp(path("a.ckpt")) == slurp(path("b.ckpt")), "checkpoints differ under one seed");
    c.expect(slurp(path("a.ckpt") + ".log") == slurp(path("b.ckpt") + ".log"),
             "training logs differ under one seed");
    c.expect(slurp(path("a.ckpt")) != slurp(path("c.ckpt")),
             "different seeds produced identical checkpoints");

    // eval twice
    c.expect(run(cli + " eval --checkpoint " + path("a.ckpt") + " --corpus " + corpus +
                 " --split test > " + path("e1.txt") + " 2>/dev/null") == 0,
             "eval failed");
    c.expect(run(cli + " eval --checkpoint " + path("a.ckpt") + " --corpus " + corpus +
                 " --split test > " + path("e2.txt") + " 2>/dev/null") == 0,
             "eval failed");
    c.expect(slurp(path("e1.txt")) == slurp(path("e2.txt")), "eval reports differ");
    c.expect(!slurp(path("e1.txt")).empty(), "eval report is empty");

    // attention dumps twice
    const std::string dump_flags = " attn-dump --checkpoint " + path("a.ckpt") + " --corpus " +
                                   corpus + " --dialog-id S01_d01 --window 10 ";
    c.expect(run(cli + dump_flags + "--out " + path("d1.csv") + sink) == 0, "attn-dump failed");
    c.expect(run(cli + dump_flags + "--out " + path("d2.csv") + sink) == 0, "attn-dump failed");
    c.expect(slurp(path("d1.csv")) == slurp(path("d2.csv")), "attention dumps differ");

    // streaming twice over the same dialog
    const std::string lines =
        "printf 'Hello there.\\nWhat a wonderful surprise party that was!\\nThank you.\\n'";
    c.expect(run(lines + " | " + cli + " infer-stream --checkpoint " + path("a.ckpt") + " > " +
                 path("s1.txt") + " 2>/dev/null") == 0,
             "infer-stream failed");
    c.expect(run(lines + " | " + cli + " infer-stream --checkpoint " + path("a.ckpt") + " > " +
                 path("s2.txt") + " 2>/dev/null") == 0,
             "infer-stream failed");
    c.expect(slurp(path("s1.txt")) == slurp(path("s2.txt")), "stream outputs differ");

    c.detail = "ingest/train/eval/attn-dump/infer-stream all byte-identical under fixed seeds";
    report(8, "determinism", c, seconds_since(start));
}

}  // namespace

int main() {
    criterion_gradients();
    criterion_equations();
    criterion_attention();
    criterion_streaming();
    criterion_metrics();
    criterion_learning();
    criterion_ablations();
    criterion_determinism();

    if (failures == 0) {
        std::printf("all 8 acceptance criteria passed\n");
    } else {
        std::printf("%d acceptance criteria FAILED\n", failures);
    }
    return failures;
}
