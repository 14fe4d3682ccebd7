#include "sern/training.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

namespace sern {

Var cross_entropy(Var pred, int label) {
    Graph& g = *pred.graph;
    const Tensor& p = g.value(pred);
    if (!p.is_vector()) {
        throw ShapeError("cross_entropy: prediction must be a vector, got " + shape_str(p.shape));
    }
    if (label < 0 || static_cast<std::size_t>(label) >= p.size()) {
        throw ContractError("cross_entropy: label " + std::to_string(label) +
                            " out of range for " + std::to_string(p.size()) + " classes");
    }
    return neg(log_clamped(pick(pred, static_cast<std::size_t>(label))));
}

Var dialog_loss(Graph& g, const SernVars& vars, const EncodedDialog& dialog) {
    DialogOutput out = forward_dialog(g, vars, dialog);
    Var loss = g.constant_scalar(0.0);
    for (std::size_t s = 0; s < out.probs.size(); ++s) {
        loss = add(loss, cross_entropy(out.probs[s], dialog.utterances[s].label));
    }
    return loss;
}

Adam::Adam(std::vector<Tensor*> params, AdamOptions options)
    : params_(std::move(params)), options_(options) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (Tensor* p : params_) {
        m_.emplace_back(p->size(), 0.0);
        v_.emplace_back(p->size(), 0.0);
    }
}

void Adam::step() {
    ++step_count_;
    const double t = static_cast<double>(step_count_);
    const double bias1 = 1.0 - std::pow(options_.beta1, t);
    const double bias2 = 1.0 - std::pow(options_.beta2, t);

    for (std::size_t k = 0; k < params_.size(); ++k) {
        Tensor& p = *params_[k];
        if (p.grad.size() != p.values.size()) {
            throw ShapeError("adam_step: gradient missing or mis-sized for parameter " +
                             std::to_string(k));
        }
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double g = p.grad[i];
            m_[k][i] = options_.beta1 * m_[k][i] + (1.0 - options_.beta1) * g;
            v_[k][i] = options_.beta2 * v_[k][i] + (1.0 - options_.beta2) * g * g;
            const double m_hat = m_[k][i] / bias1;
            const double v_hat = v_[k][i] / bias2;
            p.values[i] -= options_.alpha * m_hat / (std::sqrt(v_hat) + options_.epsilon);
        }
    }
}

std::size_t ConfusionMatrix::total() const {
    std::size_t n = 0;
    for (const auto& row : counts) {
        for (std::size_t c : row) n += c;
    }
    return n;
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
    if (other.size() != size()) throw ShapeError("confusion matrix size mismatch in merge");
    for (std::size_t i = 0; i < size(); ++i) {
        for (std::size_t j = 0; j < size(); ++j) counts[i][j] += other.counts[i][j];
    }
}

ConfusionMatrix confusion(std::span<const int> predictions, std::span<const int> labels,
                          std::size_t n_classes) {
    if (predictions.size() != labels.size()) {
        throw ContractError("confusion: " + std::to_string(predictions.size()) +
                            " predictions vs " + std::to_string(labels.size()) + " labels");
    }
    ConfusionMatrix cm(n_classes);
    for (std::size_t i = 0; i < predictions.size(); ++i) cm.add(labels[i], predictions[i]);
    return cm;
}

double f1_score(double precision, double recall) {
    const double denom = precision + recall;
    return denom > 0.0 ? 2.0 * precision * recall / denom : 0.0;
}

MetricsReport metrics(const ConfusionMatrix& cm) {
    const std::size_t n = cm.size();
    const std::size_t total = cm.total();
    if (total == 0) throw ContractError("metrics: empty confusion matrix");

    MetricsReport r;
    r.precision.assign(n, 0.0);
    r.recall.assign(n, 0.0);

    std::size_t trace = 0;
    for (std::size_t i = 0; i < n; ++i) {
        trace += cm.counts[i][i];
        std::size_t row_sum = 0, col_sum = 0;
        for (std::size_t j = 0; j < n; ++j) {
            row_sum += cm.counts[i][j];
            col_sum += cm.counts[j][i];
        }
        r.recall[i] = row_sum ? static_cast<double>(cm.counts[i][i]) / row_sum : 0.0;
        r.precision[i] = col_sum ? static_cast<double>(cm.counts[i][i]) / col_sum : 0.0;
        r.macro_precision += r.precision[i];
        r.macro_recall += r.recall[i];
    }
    r.accuracy = static_cast<double>(trace) / total;
    r.macro_precision /= n;
    r.macro_recall /= n;
    r.macro_f1 = f1_score(r.macro_precision, r.macro_recall);
    return r;
}

EvalResult evaluate(const SernParams& params, const std::vector<EncodedDialog>& dialogs) {
    EvalResult result;
    result.cm = ConfusionMatrix(params.n_classes);
    for (const EncodedDialog& d : dialogs) {
        Graph g;
        SernVars vars = stage_frozen(g, params);
        DialogOutput out = forward_dialog(g, vars, d);
        for (std::size_t s = 0; s < out.probs.size(); ++s) {
            result.cm.add(d.utterances[s].label, argmax(g.value(out.probs[s]).values));
        }
    }
    result.report = metrics(result.cm);
    return result;
}

namespace {

double train_accuracy(const SernParams& params, const std::vector<EncodedDialog>& dialogs) {
    return evaluate(params, dialogs).report.accuracy;
}

}  // namespace

TrainResult train(SernParams params, const std::vector<EncodedDialog>& train_set,
                  const std::vector<EncodedDialog>& validation_set, const TrainOptions& options) {
    if (train_set.empty() || validation_set.empty()) {
        throw ContractError("train: train and validation splits must be non-empty");
    }

    TrainResult result;
    result.best = params;

    Adam optimizer(params.parameters(), options.adam);
    std::mt19937 shuffle_rng(static_cast<std::uint32_t>(options.seed));

    std::vector<std::size_t> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    double best_f1 = -1.0;
    std::size_t epochs_since_best = 0;

    for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
        for (std::size_t i = order.size() - 1; i > 0; --i) {
            std::size_t j = shuffle_rng() % (i + 1);
            std::swap(order[i], order[j]);
        }

        double loss_sum = 0.0;
        std::size_t utterance_count = 0;
        for (std::size_t idx : order) {
            const EncodedDialog& dialog = train_set[idx];
            Graph g;
            SernVars vars = stage(g, params);
            Var loss = dialog_loss(g, vars, dialog);
            const double loss_value = g.value(loss).values[0];
            if (!std::isfinite(loss_value)) {
                throw DivergenceError("training diverged: non-finite loss at step " +
                                      std::to_string(optimizer.steps() + 1) + " (epoch " +
                                      std::to_string(epoch) + ", dialog " + dialog.dialog_id +
                                      ")");
            }
            loss_sum += loss_value;
            utterance_count += dialog.utterances.size();
            g.backward(loss);
            optimizer.step();
        }

        EvalResult val = evaluate(params, validation_set);
        EpochLog entry;
        entry.epoch = epoch;
        entry.train_loss = loss_sum / static_cast<double>(utterance_count);
        entry.val_accuracy = val.report.accuracy;
        entry.val_macro_f1 = val.report.macro_f1;
        result.log.push_back(entry);

        if (val.report.macro_f1 > best_f1) {
            best_f1 = val.report.macro_f1;
            result.best = params;
            result.best_epoch = epoch;
            epochs_since_best = 0;
        } else {
            ++epochs_since_best;
        }

        if (options.target_train_accuracy &&
            train_accuracy(params, train_set) >= *options.target_train_accuracy) {
            result.best = params;
            result.best_epoch = epoch;
            break;
        }
        if (epochs_since_best >= options.patience) break;
    }
    return result;
}

void save_training_log(const std::filesystem::path& path, const std::vector<EpochLog>& log) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write training log: " + path.string());
    for (const EpochLog& e : log) {
        nlohmann::json j{{"epoch", e.epoch},
                         {"train_loss", e.train_loss},
                         {"val_accuracy", e.val_accuracy},
                         {"val_macro_f1", e.val_macro_f1}};
        out << j.dump() << '\n';
    }
}

std::string format_report(const EvalResult& eval, const EmotionSet& emotions) {
    const ConfusionMatrix& cm = eval.cm;
    const MetricsReport& r = eval.report;
    std::ostringstream os;
    os << std::fixed << std::setprecision(3);
    os << "accuracy        " << r.accuracy << '\n';
    os << "macro precision " << r.macro_precision << '\n';
    os << "macro recall    " << r.macro_recall << '\n';
    os << "macro f1        " << r.macro_f1 << '\n';
    os << '\n';

    std::size_t width = 9;
    for (const std::string& c : emotions.classes) width = std::max(width, c.size() + 2);

    os << std::setw(static_cast<int>(width)) << "";
    for (const std::string& c : emotions.classes) os << std::setw(static_cast<int>(width)) << c;
    os << std::setw(static_cast<int>(width)) << "recall" << '\n';

    for (std::size_t i = 0; i < cm.size(); ++i) {
        os << std::setw(static_cast<int>(width)) << emotions.classes[i];
        for (std::size_t j = 0; j < cm.size(); ++j) {
            os << std::setw(static_cast<int>(width)) << cm.counts[i][j];
        }
        os << std::setw(static_cast<int>(width)) << r.recall[i] << '\n';
    }

    os << std::setw(static_cast<int>(width)) << "precision";
    for (std::size_t j = 0; j < cm.size(); ++j) {
        os << std::setw(static_cast<int>(width)) << r.precision[j];
    }
    os << '\n';
    return os.str();
}

}  // namespace sern
