#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "sern/model.hpp"

namespace sern {

/// -ln(pred[label]), with pred clamped at 1e-12 before the log.
Var cross_entropy(Var pred, int label);

/// Sum of per-utterance cross-entropies over one dialog.
Var dialog_loss(Graph& g, const SernVars& vars, const EncodedDialog& dialog);

struct AdamOptions {
    double alpha = 5e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Adam with bias correction. Moment buffers mirror the parameter shapes.
class Adam {
public:
    Adam(std::vector<Tensor*> params, AdamOptions options);

    /// Apply one update from the gradients currently held in each param.
    void step();
    std::size_t steps() const { return step_count_; }

private:
    std::vector<Tensor*> params_;
    std::vector<std::vector<double>> m_, v_;
    AdamOptions options_;
    std::size_t step_count_ = 0;
};

struct ConfusionMatrix {
    std::vector<std::vector<std::size_t>> counts;  // rows = truth, cols = predicted

    explicit ConfusionMatrix(std::size_t n_classes = 0)
        : counts(n_classes, std::vector<std::size_t>(n_classes, 0)) {}
    std::size_t size() const { return counts.size(); }
    std::size_t total() const;
    void add(int truth, int predicted) { counts.at(truth).at(predicted)++; }
    void merge(const ConfusionMatrix& other);
};

ConfusionMatrix confusion(std::span<const int> predictions, std::span<const int> labels,
                          std::size_t n_classes);

struct MetricsReport {
    double accuracy = 0.0;
    std::vector<double> precision;  // per class; 0 when the column is empty
    std::vector<double> recall;
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    double macro_f1 = 0.0;
};

MetricsReport metrics(const ConfusionMatrix& cm);

/// 2PR/(P+R), 0 when P+R is 0.
double f1_score(double precision, double recall);

struct EvalResult {
    ConfusionMatrix cm;
    MetricsReport report;
};

/// Batch inference over every dialog; predictions by argmax.
EvalResult evaluate(const SernParams& params, const std::vector<EncodedDialog>& dialogs);

struct EpochLog {
    std::size_t epoch = 0;       // 1-based
    double train_loss = 0.0;     // mean cross-entropy per utterance
    double val_accuracy = 0.0;
    double val_macro_f1 = 0.0;
};

struct TrainOptions {
    std::size_t epochs = 50;
    std::size_t patience = 10;
    AdamOptions adam;
    std::uint64_t seed = 7;  // epoch shuffling
    /// Stop once training-set accuracy reaches this value (checked per epoch).
    std::optional<double> target_train_accuracy;
};

struct TrainResult {
    SernParams best;  // best validation macro-F1
    std::vector<EpochLog> log;
    std::size_t best_epoch = 0;  // 1-based; 0 when no epochs ran
};

/// Dialog-level SGD: one Adam step per dialog, dialogs shuffled per epoch
/// under the seed. Aborts with DivergenceError if the loss goes non-finite.
TrainResult train(SernParams params, const std::vector<EncodedDialog>& train_set,
                  const std::vector<EncodedDialog>& validation_set, const TrainOptions& options);

void save_training_log(const std::filesystem::path& path, const std::vector<EpochLog>& log);

/// Metrics report with the confusion matrix laid out rows=truth,
/// cols=predicted, a recall column and a precision row.
std::string format_report(const EvalResult& eval, const EmotionSet& emotions);

}  // namespace sern
