#include "txn/trainer.hpp"

#include "txn/feats.hpp"
#include "txn/sampler.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace txn {

namespace {

double evaluate_classification(nn::SequenceModel& model, const Dataset& val_ds,
                               const TrainConfig& cfg, std::uint64_t eval_stream) {
    std::vector<int> preds, labels;
    for (const auto& day : val_ds.days) {
        Rng rng = Rng::substream(cfg.seed, {eval_stream, static_cast<std::uint64_t>(day.day_index)});
        ClassInference inf = infer_day_class(model, day, cfg.window_len, cfg.inference_samples, rng);
        preds.push_back(static_cast<int>(
            std::max_element(inf.probabilities.begin(), inf.probabilities.end()) -
            inf.probabilities.begin()));
        labels.push_back(day.class_label);
    }
    return accuracy(preds, labels);
}

double evaluate_regression(nn::SequenceModel& model, const Dataset& val_ds, const TrainConfig& cfg,
                           std::uint64_t eval_stream) {
    RatePredictions p = infer_day_rate(model, val_ds, cfg.window_len, cfg.moving_average_width,
                                       Rng::mix(cfg.seed ^ eval_stream), cfg.regression_samples);
    std::vector<double> labels;
    for (const auto& day : val_ds.days) labels.push_back(day.rate_label);
    return r2(p.smoothed, labels);
}

} // namespace

TrainResult train(const Dataset& train_ds, const Dataset& val_ds, const TrainConfig& cfg) {
    if (train_ds.task != val_ds.task) throw std::invalid_argument("train/val task mismatch");
    bool classification = train_ds.task == TaskKind::classification;
    if (classification && cfg.loss == LossKind::mse)
        throw std::invalid_argument("mse loss on a classification dataset");
    if (!classification && cfg.loss != LossKind::mse)
        throw std::invalid_argument("regression dataset needs mse loss");

    nn::SequenceModel model(cfg.model, cfg.seed);
    auto params = model.parameters();
    nn::Adam opt;

    TrainResult result{nn::SequenceModel(cfg.model, cfg.seed), {}};
    std::vector<std::vector<double>> best_params;
    double best_metric = -std::numeric_limits<double>::infinity();

    auto snapshot = [&]() {
        best_params.clear();
        for (nn::Tensor* p : params) best_params.push_back(p->v);
    };
    snapshot(); // epoch-0 model is the fallback checkpoint

    nn::Graph graph;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        auto t0 = std::chrono::steady_clock::now();
        double lr = nn::step_decay_lr(cfg.lr0, epoch, cfg.lr_decay, cfg.lr_step);

        auto windows = sample_epoch(train_ds, cfg.window_len, cfg.seed, static_cast<std::uint64_t>(epoch));
        std::vector<std::size_t> order(windows.size());
        std::iota(order.begin(), order.end(), 0);
        Rng shuffle_rng = Rng::substream(cfg.seed, {static_cast<std::uint64_t>(epoch), 0x5u});
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.uniform_int(i)]);

        double epoch_loss = 0.0;
        std::size_t n_batches = 0;
        bool aborted = false;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            graph.reset();
            for (nn::Tensor* p : params) p->zero_grad();

            std::vector<nn::Tensor*> losses;
            std::vector<nn::Tensor*> embeddings;
            std::vector<int> batch_labels;
            for (std::size_t bi = start; bi < end; ++bi) {
                const Window& w = windows[order[bi]];
                const DayRecord& day = train_ds.days[order[bi]];
                auto fw = model.forward(graph, w);
                embeddings.push_back(fw.embedding);
                batch_labels.push_back(day.class_label);
                if (classification)
                    losses.push_back(nn::softmax_cross_entropy(graph, fw.output, day.class_label));
                else
                    losses.push_back(nn::mse_loss(graph, fw.output, day.rate_label));
            }
            if (cfg.loss == LossKind::triplet) {
                // all valid in-batch triplets, averaged
                std::vector<nn::Tensor*> triplets;
                for (std::size_t a = 0; a < embeddings.size(); ++a)
                    for (std::size_t p = 0; p < embeddings.size(); ++p)
                        for (std::size_t n = 0; n < embeddings.size(); ++n) {
                            if (a == p || batch_labels[a] != batch_labels[p] ||
                                batch_labels[a] == batch_labels[n])
                                continue;
                            triplets.push_back(nn::triplet_loss(graph, embeddings[a], embeddings[p],
                                                                embeddings[n], cfg.triplet_margin));
                        }
                if (!triplets.empty()) losses.push_back(nn::mean_scalars(graph, triplets));
            }
            nn::Tensor* loss = nn::mean_scalars(graph, losses);
            if (!std::isfinite(loss->v[0])) {
                result.history.aborted = true;
                result.history.abort_reason = "non-finite training loss at epoch " + std::to_string(epoch);
                aborted = true;
                break;
            }
            graph.backward(loss);
            try {
                opt.step(params, lr);
            } catch (const nn::NumericError& e) {
                result.history.aborted = true;
                result.history.abort_reason = std::string(e.what()) + " at epoch " + std::to_string(epoch);
                aborted = true;
                break;
            }
            model.clip_recurrent_weights(cfg.window_len);
            epoch_loss += loss->v[0];
            ++n_batches;
        }
        if (aborted) break;

        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = n_batches ? epoch_loss / static_cast<double>(n_batches) : 0.0;
        stats.lr = lr;

        bool do_eval = (epoch + 1) % cfg.eval_cadence == 0 || epoch + 1 == cfg.epochs;
        if (do_eval && !val_ds.days.empty()) {
            std::uint64_t eval_stream = 0xE7A1ULL + static_cast<std::uint64_t>(epoch);
            double metric = classification ? evaluate_classification(model, val_ds, cfg, eval_stream)
                                           : evaluate_regression(model, val_ds, cfg, eval_stream);
            stats.val_metric = metric;
            if (metric > best_metric) {
                best_metric = metric;
                result.history.best_val_metric = metric;
                result.history.best_epoch = epoch;
                snapshot();
            }
        } else {
            stats.val_metric = result.history.epochs.empty() ? 0.0
                                                             : result.history.epochs.back().val_metric;
        }
        stats.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.history.epochs.push_back(stats);
    }

    auto best = result.model.parameters();
    for (std::size_t i = 0; i < best.size(); ++i) best[i]->v = best_params[i];
    return result;
}

ClassInference infer_day_class(nn::SequenceModel& model, const DayRecord& day, std::size_t n,
                               std::size_t k, Rng& rng) {
    auto windows = sample_inference(day, n, k, rng);
    std::vector<double> mean_emb;
    for (const auto& w : windows) {
        auto emb = model.day_embedding(w);
        if (mean_emb.empty())
            mean_emb = emb;
        else
            for (std::size_t i = 0; i < emb.size(); ++i) mean_emb[i] += emb[i];
    }
    for (auto& v : mean_emb) v /= static_cast<double>(k);
    ClassInference out;
    out.probabilities = nn::softmax(model.head_on_embedding(mean_emb));
    out.embedding = std::move(mean_emb);
    return out;
}

std::vector<double> moving_average_trailing(const std::vector<double>& raw, int width) {
    if (width < 1) throw std::invalid_argument("moving average width must be >= 1");
    std::vector<double> out(raw.size());
    double sum = 0.0;
    for (std::size_t t = 0; t < raw.size(); ++t) {
        sum += raw[t];
        if (t >= static_cast<std::size_t>(width)) sum -= raw[t - static_cast<std::size_t>(width)];
        std::size_t cnt = std::min(t + 1, static_cast<std::size_t>(width));
        out[t] = sum / static_cast<double>(cnt);
    }
    return out;
}

RatePredictions infer_day_rate(nn::SequenceModel& model, const Dataset& ds, std::size_t n, int width,
                               std::uint64_t seed, std::size_t k) {
    RatePredictions out;
    for (const auto& day : ds.days) {
        Rng rng = Rng::substream(seed, {0x12A7EULL, static_cast<std::uint64_t>(day.day_index)});
        auto windows = sample_inference(day, n, k, rng);
        std::vector<double> mean_emb;
        for (const auto& w : windows) {
            auto emb = model.day_embedding(w);
            if (mean_emb.empty())
                mean_emb = emb;
            else
                for (std::size_t i = 0; i < emb.size(); ++i) mean_emb[i] += emb[i];
        }
        for (auto& v : mean_emb) v /= static_cast<double>(k);
        out.day_index.push_back(day.day_index);
        out.raw.push_back(model.head_on_embedding(mean_emb)[0]);
    }
    out.smoothed = moving_average_trailing(out.raw, width);
    return out;
}

double accuracy(const std::vector<int>& preds, const std::vector<int>& labels) {
    if (preds.size() != labels.size() || preds.empty())
        throw std::invalid_argument("accuracy: length mismatch or empty");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < preds.size(); ++i)
        if (preds[i] == labels[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(preds.size());
}

double r2(const std::vector<double>& preds, const std::vector<double>& labels) {
    if (preds.size() != labels.size() || preds.size() < 2)
        throw std::invalid_argument("r2: need >= 2 matched points");
    double mean = std::accumulate(labels.begin(), labels.end(), 0.0) / static_cast<double>(labels.size());
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        ss_res += (labels[i] - preds[i]) * (labels[i] - preds[i]);
        ss_tot += (labels[i] - mean) * (labels[i] - mean);
    }
    if (ss_tot == 0.0) throw std::invalid_argument("r2: labels have zero variance");
    return 1.0 - ss_res / ss_tot;
}

void write_history_csv(const RunHistory& h, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "epoch,train_loss,val_metric,lr,seconds\n";
    for (const auto& e : h.epochs)
        out << e.epoch << ',' << format_double(e.train_loss) << ',' << format_double(e.val_metric)
            << ',' << format_double(e.lr) << ',' << format_double(e.seconds) << '\n';
}

BaselineResult run_feature_baseline(const Dataset& train_ds, const Dataset& val_ds,
                                    const gbt::BoostParams& params) {
    auto Xtr = feature_matrix(train_ds);
    auto Xva = feature_matrix(val_ds);
    BaselineResult res;
    if (train_ds.task == TaskKind::classification) {
        std::vector<int> ytr, yva, preds;
        for (const auto& d : train_ds.days) ytr.push_back(d.class_label);
        for (const auto& d : val_ds.days) yva.push_back(d.class_label);
        res.model = gbt::fit_multiclass(Xtr, ytr, 7, params);
        for (const auto& x : Xva) preds.push_back(res.model.predict_class(x));
        res.val_metric = accuracy(preds, yva);
    } else {
        std::vector<double> ytr, yva, preds;
        for (const auto& d : train_ds.days) ytr.push_back(d.rate_label);
        for (const auto& d : val_ds.days) yva.push_back(d.rate_label);
        res.model = gbt::fit_regression(Xtr, ytr, params);
        for (const auto& x : Xva) preds.push_back(res.model.predict(x)[0]);
        res.val_metric = r2(preds, yva);
    }
    res.val_vectors = std::move(Xva);
    return res;
}

namespace {

std::vector<std::vector<int>> field_corpus(const Dataset& ds, int field) {
    std::vector<std::vector<int>> corpus;
    corpus.reserve(ds.days.size());
    for (const auto& day : ds.days) {
        std::vector<int> seq;
        seq.reserve(day.transactions.size());
        for (const auto& t : day.transactions)
            seq.push_back(field == 0 ? t.mcc : t.txn_type);
        corpus.push_back(std::move(seq));
    }
    return corpus;
}

std::vector<std::vector<double>> sif_matrix(const Dataset& ds, const embed::EmbeddingTable& mcc_t,
                                            const embed::EmbeddingTable& type_t,
                                            const embed::TokenFrequency& mcc_f,
                                            const embed::TokenFrequency& type_f, double a) {
    embed::SifConfig cfg{a};
    std::vector<std::vector<double>> out;
    out.reserve(ds.days.size());
    for (const auto& day : ds.days) {
        std::vector<int> mccs, types;
        for (const auto& t : day.transactions) {
            mccs.push_back(t.mcc);
            types.push_back(t.txn_type);
        }
        auto e1 = embed::sif_day_embedding(mccs, mcc_t, mcc_f, cfg);
        auto e2 = embed::sif_day_embedding(types, type_t, type_f, cfg);
        e1.insert(e1.end(), e2.begin(), e2.end());
        out.push_back(std::move(e1));
    }
    return out;
}

// remove the train matrix's first singular direction from both splits
void remove_component_fit_train(std::vector<std::vector<double>>& train_rows,
                                std::vector<std::vector<double>>& val_rows) {
    auto res = embed::remove_first_component(train_rows);
    train_rows = std::move(res.rows);
    for (auto& row : val_rows) {
        double proj = 0.0;
        for (std::size_t i = 0; i < row.size(); ++i) proj += row[i] * res.direction[i];
        for (std::size_t i = 0; i < row.size(); ++i) row[i] -= proj * res.direction[i];
    }
}

} // namespace

W2vBaselineResult run_w2v_baseline(const Dataset& train_ds, const Dataset& val_ds,
                                   const gbt::BoostParams& params, int mcc_dim, int type_dim,
                                   std::uint64_t seed) {
    auto mcc_corpus = field_corpus(train_ds, 0);
    auto type_corpus = field_corpus(train_ds, 1);
    embed::SkipgramConfig sg;
    sg.seed = seed;
    sg.dim = mcc_dim;
    auto mcc_res = embed::train_skipgram(mcc_corpus, train_ds.vocab.mcc, sg, "mcc");
    sg.dim = type_dim;
    sg.seed = seed + 1;
    auto type_res = embed::train_skipgram(type_corpus, train_ds.vocab.txn_type, sg, "txn_type");
    auto mcc_f = embed::token_frequency(mcc_corpus, train_ds.vocab.mcc);
    auto type_f = embed::token_frequency(type_corpus, train_ds.vocab.txn_type);

    W2vBaselineResult best;
    best.val_metric = -std::numeric_limits<double>::infinity();
    for (double a : {1e-4, 1e-3, 1e-2, 1e-1}) {
        auto Xtr = sif_matrix(train_ds, mcc_res.table, type_res.table, mcc_f, type_f, a);
        auto Xva = sif_matrix(val_ds, mcc_res.table, type_res.table, mcc_f, type_f, a);
        remove_component_fit_train(Xtr, Xva);
        double metric;
        gbt::TreeEnsemble model;
        if (train_ds.task == TaskKind::classification) {
            std::vector<int> ytr, yva, preds;
            for (const auto& d : train_ds.days) ytr.push_back(d.class_label);
            for (const auto& d : val_ds.days) yva.push_back(d.class_label);
            model = gbt::fit_multiclass(Xtr, ytr, 7, params);
            for (const auto& x : Xva) preds.push_back(model.predict_class(x));
            metric = accuracy(preds, yva);
        } else {
            std::vector<double> ytr, yva, preds;
            for (const auto& d : train_ds.days) ytr.push_back(d.rate_label);
            for (const auto& d : val_ds.days) yva.push_back(d.rate_label);
            model = gbt::fit_regression(Xtr, ytr, params);
            for (const auto& x : Xva) preds.push_back(model.predict(x)[0]);
            metric = r2(preds, yva);
        }
        if (metric > best.val_metric) {
            best.val_metric = metric;
            best.chosen_a = a;
            best.model = std::move(model);
            best.val_vectors = std::move(Xva);
        }
    }
    best.mcc_table = std::move(mcc_res.table);
    best.type_table = std::move(type_res.table);
    return best;
}

} // namespace txn
