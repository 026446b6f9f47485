#pragma once

#include "txn/data.hpp"
#include "txn/gbt.hpp"
#include "txn/nn/model.hpp"
#include "txn/token_embed.hpp"

#include <optional>
#include <string>
#include <vector>

namespace txn {

enum class LossKind {
    cross_entropy,
    triplet, // cross-entropy plus a triplet term on the embeddings
    mse
};

struct TrainConfig {
    std::size_t window_len = 2000;
    int epochs = 500;
    int batch_size = 10;
    std::uint64_t seed = 0;
    nn::ModelConfig model;
    LossKind loss = LossKind::cross_entropy;
    std::size_t inference_samples = 30; // k windows at validation (classification)
    std::size_t regression_samples = 1; // windows per day for regression inference
    int moving_average_width = 7;       // trailing
    int eval_cadence = 5;               // validate every this many epochs
    double lr0 = 0.01;
    double lr_decay = 0.95;
    int lr_step = 5;
    double triplet_margin = 1.0;
};

struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0;
    double val_metric = 0.0; // last evaluated value carried forward between cadences
    double lr = 0.0;
    double seconds = 0.0;
};

struct RunHistory {
    std::vector<EpochStats> epochs;
    double best_val_metric = 0.0;
    int best_epoch = -1;
    bool aborted = false;
    std::string abort_reason;
};

struct TrainResult {
    nn::SequenceModel model; // best-validation parameters
    RunHistory history;
};

TrainResult train(const Dataset& train_ds, const Dataset& val_ds, const TrainConfig& cfg);

struct ClassInference {
    std::vector<double> probabilities;
    std::vector<double> embedding; // mean embedding over the k windows
};

ClassInference infer_day_class(nn::SequenceModel& model, const DayRecord& day, std::size_t n,
                               std::size_t k, Rng& rng);

struct RatePredictions {
    std::vector<std::int64_t> day_index;
    std::vector<double> raw;
    std::vector<double> smoothed;
};

// One (or k averaged) windows per day, then a trailing moving average of the
// given width, truncated at the series start.
RatePredictions infer_day_rate(nn::SequenceModel& model, const Dataset& ds, std::size_t n,
                               int width, std::uint64_t seed, std::size_t k = 1);

std::vector<double> moving_average_trailing(const std::vector<double>& raw, int width);

double accuracy(const std::vector<int>& preds, const std::vector<int>& labels);
double r2(const std::vector<double>& preds, const std::vector<double>& labels);

void write_history_csv(const RunHistory& h, const std::string& path);

// ---- feature-engineering baselines ---------------------------------------

struct BaselineResult {
    gbt::TreeEnsemble model;
    double val_metric = 0.0; // accuracy or R^2
    std::vector<std::vector<double>> val_vectors; // per-val-day inputs (for t-SNE)
};

// Boosted trees on handcrafted day features (50 rounds, depth 3 defaults).
BaselineResult run_feature_baseline(const Dataset& train_ds, const Dataset& val_ds,
                                    const gbt::BoostParams& params);

struct W2vBaselineResult {
    gbt::TreeEnsemble model;
    double val_metric = 0.0;
    double chosen_a = 0.0;
    embed::EmbeddingTable mcc_table, type_table;
    std::vector<std::vector<double>> val_vectors; // SIF day embeddings (val days)
};

// Skip-gram on the training split (mcc + txn_type streams), SIF day embeddings
// with first-component removal fit on train, boosted trees on top (75 rounds,
// depth 4 defaults). The SIF `a` is picked from a grid by validation metric.
W2vBaselineResult run_w2v_baseline(const Dataset& train_ds, const Dataset& val_ds,
                                   const gbt::BoostParams& params, int mcc_dim = 77,
                                   int type_dim = 25, std::uint64_t seed = 1);

} // namespace txn
