// Command-line front end: dataset generation, feature export, training,
// evaluation, embedding extraction, t-SNE, and the embedding-stability
// protocol. One line-oriented config file (`section.key = value`) per run,
// with --set overrides; every command writes a manifest sufficient to re-run
// it bit-identically.

#include "txn/analysis.hpp"
#include "txn/data.hpp"
#include "txn/feats.hpp"
#include "txn/gbt.hpp"
#include "txn/synthgen.hpp"
#include "txn/trainer.hpp"
#include "txn/tsne.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <thread>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class Config {
public:
    static Config parse_text(const std::string& text) {
        Config c;
        c.text_ = text;
        std::istringstream in(text);
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            auto hash = line.find('#');
            if (hash != std::string::npos) line = line.substr(0, hash);
            auto trim = [](std::string s) {
                auto b = s.find_first_not_of(" \t\r");
                auto e = s.find_last_not_of(" \t\r");
                return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
            };
            line = trim(line);
            if (line.empty()) continue;
            auto eq = line.find('=');
            if (eq == std::string::npos)
                throw ConfigError("config line " + std::to_string(line_no) + ": missing '='");
            std::string key = trim(line.substr(0, eq));
            std::string value = trim(line.substr(eq + 1));
            if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
            c.values_[key] = value;
        }
        return c;
    }

    static Config parse_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file: " + path);
        std::ostringstream ss;
        ss << in.rdbuf();
        return parse_text(ss.str());
    }

    void apply_override(const std::string& kv) {
        auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("--set needs key=value, got: " + kv);
        values_[kv.substr(0, eq)] = kv.substr(eq + 1);
        text_ += "\n" + kv.substr(0, eq) + " = " + kv.substr(eq + 1);
    }

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    std::string str(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) throw ConfigError("missing required config key: " + key);
        return it->second;
    }
    std::string str(const std::string& key, const std::string& def) const {
        auto it = values_.find(key);
        return it == values_.end() ? def : it->second;
    }
    std::int64_t integer(const std::string& key) const { return to_int(key, str(key)); }
    std::int64_t integer(const std::string& key, std::int64_t def) const {
        return has(key) ? to_int(key, str(key)) : def;
    }
    double real(const std::string& key) const { return to_real(key, str(key)); }
    double real(const std::string& key, double def) const {
        return has(key) ? to_real(key, str(key)) : def;
    }

    std::uint64_t seed(const std::string& key) const {
        if (has(key)) return static_cast<std::uint64_t>(integer(key));
        if (const char* env = std::getenv("TXN_NOWCAST_SEED"))
            return static_cast<std::uint64_t>(std::strtoull(env, nullptr, 10));
        throw ConfigError("missing required config key: " + key +
                          " (and TXN_NOWCAST_SEED is unset)");
    }

    const std::string& text() const { return text_; }
    const std::map<std::string, std::string>& values() const { return values_; }

private:
    static std::int64_t to_int(const std::string& key, const std::string& v) {
        try {
            std::size_t pos;
            std::int64_t r = std::stoll(v, &pos);
            if (pos != v.size()) throw std::invalid_argument(v);
            return r;
        } catch (const std::exception&) {
            throw ConfigError("config key " + key + ": not an integer: '" + v + "'");
        }
    }
    static double to_real(const std::string& key, const std::string& v) {
        try {
            std::size_t pos;
            double r = std::stod(v, &pos);
            if (pos != v.size()) throw std::invalid_argument(v);
            return r;
        } catch (const std::exception&) {
            throw ConfigError("config key " + key + ": not a number: '" + v + "'");
        }
    }

    std::map<std::string, std::string> values_;
    std::string text_;
};

std::string iso_now() {
    auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

class ManifestWriter {
public:
    ManifestWriter(std::string command, const Config& cfg, std::uint64_t seed)
        : command_(std::move(command)), config_text_(cfg.text()), seed_(seed),
          started_(iso_now()) {}

    void add_artifact(const std::string& path) { artifacts_.push_back(path); }
    void set_metric(const std::string& name, double value) { metrics_[name] = value; }

    void write(const std::string& path) {
        json m = {{"format", "txn-manifest-v1"},
                  {"command", command_},
                  {"config_text", config_text_},
                  {"seed", seed_},
                  {"artifacts", artifacts_},
                  {"metrics", metrics_},
                  {"version", "txn-nowcast 1.0"},
                  {"started", started_},
                  {"finished", iso_now()}};
        std::ofstream out(path);
        if (!out) throw DataError("cannot write manifest: " + path);
        out << m.dump(2) << '\n';
    }

private:
    std::string command_, config_text_;
    std::uint64_t seed_;
    std::string started_;
    std::vector<std::string> artifacts_;
    json metrics_ = json::object();
};

std::uint64_t fnv1a_str(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// ---- dataset helpers -----------------------------------------------------

txn::Dataset load_with_optional_vocab(const Config& cfg, const std::string& section) {
    std::string path = cfg.str(section + ".dataset");
    try {
        if (cfg.has(section + ".vocab")) {
            auto vocab = txn::load_vocabularies(cfg.str(section + ".vocab"));
            return txn::load_dataset(path, &vocab);
        }
        return txn::load_dataset(path);
    } catch (const std::exception& e) {
        throw DataError(e.what());
    }
}

std::pair<txn::Dataset, txn::Dataset> split_from_config(const txn::Dataset& ds, const Config& cfg,
                                                        const std::string& section) {
    double frac = cfg.real(section + ".train_frac", 0.8);
    try {
        return txn::chronological_split(ds, frac);
    } catch (const std::exception& e) {
        throw DataError(e.what());
    }
}

txn::GenConfig gen_config(const Config& cfg) {
    txn::GenConfig g;
    std::string task = cfg.str("generate.task");
    if (task == "dayofweek")
        g.task = txn::TaskKind::classification;
    else if (task == "defaultrate")
        g.task = txn::TaskKind::regression;
    else
        throw ConfigError("generate.task must be dayofweek or defaultrate, got: " + task);
    g.seed = cfg.seed("generate.seed");
    g.n_days = static_cast<int>(cfg.integer("generate.n_days"));
    g.txns_min = static_cast<int>(cfg.integer("generate.txns_min"));
    g.txns_max = static_cast<int>(cfg.integer("generate.txns_max"));
    g.vocab.mcc = static_cast<int>(cfg.integer("generate.vocab_mcc", 40));
    g.vocab.txn_type = static_cast<int>(cfg.integer("generate.vocab_txn_type", 8));
    g.vocab.currency = static_cast<int>(cfg.integer("generate.vocab_currency", 0));
    g.vocab.country = static_cast<int>(cfg.integer("generate.vocab_country", 0));
    g.marginal_strength = cfg.real("generate.marginal_strength", 0.0);
    g.motif_strength = cfg.real("generate.motif_strength", 0.0);
    g.noise_std = cfg.real("generate.noise_std", 0.3);
    g.ar_coeff = cfg.real("generate.ar_coeff", 0.9);
    return g;
}

txn::TrainConfig train_config(const Config& cfg, const txn::Dataset& ds, const std::string& model) {
    txn::TrainConfig t;
    t.window_len = static_cast<std::size_t>(cfg.integer("train.n", 2000));
    t.epochs = static_cast<int>(cfg.integer("train.epochs", 50));
    t.batch_size = static_cast<int>(cfg.integer("train.batch", 10));
    t.seed = cfg.seed("train.seed");
    t.inference_samples = static_cast<std::size_t>(cfg.integer("train.k", 30));
    t.regression_samples = static_cast<std::size_t>(cfg.integer("train.k_regression", 1));
    t.moving_average_width = static_cast<int>(cfg.integer("train.ma_width", 7));
    t.eval_cadence = static_cast<int>(cfg.integer("train.eval_cadence", 5));
    t.triplet_margin = cfg.real("train.triplet_margin", 1.0);

    txn::nn::ModelConfig& m = t.model;
    m.arch = txn::nn::arch_from_name(model);
    m.vocab_sizes = {ds.vocab.mcc, ds.vocab.txn_type};
    // paper defaults: 77/25 for CNN and LSTM; 36/18/16/16 for IndRNN
    if (m.arch == txn::nn::Arch::indrnn) {
        m.emb_dims = {static_cast<int>(cfg.integer("model.emb_mcc", 36)),
                      static_cast<int>(cfg.integer("model.emb_txn_type", 18))};
        if (ds.vocab.has_currency()) {
            m.vocab_sizes.push_back(ds.vocab.currency);
            m.emb_dims.push_back(static_cast<int>(cfg.integer("model.emb_currency", 16)));
        }
        if (ds.vocab.has_country()) {
            m.vocab_sizes.push_back(ds.vocab.country);
            m.emb_dims.push_back(static_cast<int>(cfg.integer("model.emb_country", 16)));
        }
    } else {
        m.emb_dims = {static_cast<int>(cfg.integer("model.emb_mcc", 77)),
                      static_cast<int>(cfg.integer("model.emb_txn_type", 25))};
    }
    m.conv_blocks = static_cast<int>(cfg.integer("model.conv_blocks", 3));
    m.conv_channels = static_cast<int>(cfg.integer("model.conv_channels", 64));
    m.conv_kernel = static_cast<int>(cfg.integer("model.conv_kernel", 5));
    m.pool_width = static_cast<int>(cfg.integer("model.pool_width", 2));
    m.hidden = static_cast<int>(cfg.integer("model.hidden", 100));
    m.rnn_layers = static_cast<int>(cfg.integer("model.rnn_layers", 2));
    m.n_outputs = ds.task == txn::TaskKind::classification ? 7 : 1;

    if (ds.task == txn::TaskKind::regression) {
        t.loss = txn::LossKind::mse;
        t.lr0 = cfg.real("train.lr0", m.arch == txn::nn::Arch::indrnn ? 0.001 : 0.01);
    } else {
        std::string loss = cfg.str("train.loss", "ce");
        if (loss == "ce")
            t.loss = txn::LossKind::cross_entropy;
        else if (loss == "triplet")
            t.loss = txn::LossKind::triplet;
        else
            throw ConfigError("train.loss must be ce or triplet, got: " + loss);
        double def_lr = m.arch == txn::nn::Arch::lstm ? 0.0001
                        : m.arch == txn::nn::Arch::indrnn ? 0.001
                                                          : 0.01;
        t.lr0 = cfg.real("train.lr0", def_lr);
    }
    return t;
}

txn::gbt::BoostParams boost_params(const Config& cfg, bool w2v) {
    txn::gbt::BoostParams p;
    p.n_rounds = static_cast<int>(cfg.integer("train.rounds", w2v ? 75 : 50));
    p.max_depth = static_cast<int>(cfg.integer("train.depth", w2v ? 4 : 3));
    p.min_child_weight = cfg.real("train.min_child_weight", 1.0);
    p.shrinkage = cfg.real("train.shrinkage", 0.1);
    p.l2_lambda = cfg.real("train.l2_lambda", 1.0);
    return p;
}

// ---- commands ------------------------------------------------------------

int cmd_generate(const Config& cfg) {
    txn::GenConfig g = gen_config(cfg);
    std::string out = cfg.str("generate.out");
    txn::GeneratedData data = txn::generate(g);

    ManifestWriter manifest("generate", cfg, g.seed);
    txn::write_dataset(data.dataset, out);
    manifest.add_artifact(out);
    if (!data.truth.empty()) {
        std::string truth_path = cfg.str("generate.truth_out", out + ".truth.csv");
        txn::write_truth(data.truth, truth_path);
        manifest.add_artifact(truth_path);
    }
    if (cfg.has("generate.vocab_out")) {
        auto vocab = txn::identity_vocabularies(g.vocab);
        txn::write_vocabularies(vocab, cfg.str("generate.vocab_out"));
        manifest.add_artifact(cfg.str("generate.vocab_out"));
    }
    manifest.write(out + ".manifest.json");
    std::cout << "generated " << data.dataset.days.size() << " days, "
              << data.dataset.total_transactions() << " transactions -> " << out << "\n";
    return kExitOk;
}

int cmd_featurize(const Config& cfg) {
    txn::Dataset ds = load_with_optional_vocab(cfg, "featurize");
    std::string out = cfg.str("featurize.out");
    txn::write_feature_matrix(ds, out);
    ManifestWriter manifest("featurize", cfg, 0);
    manifest.add_artifact(out);
    manifest.write(out + ".manifest.json");
    std::cout << "featurized " << ds.days.size() << " days -> " << out << "\n";
    return kExitOk;
}

void write_embeddings_csv(const std::vector<std::vector<double>>& emb,
                          const std::vector<std::int64_t>& day_index,
                          const std::vector<std::string>& labels, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write embeddings: " + path);
    out << "day_index,label";
    for (std::size_t i = 0; emb.size() && i < emb[0].size(); ++i) out << ",e" << i;
    out << '\n';
    for (std::size_t i = 0; i < emb.size(); ++i) {
        out << day_index[i] << ',' << labels[i];
        for (double v : emb[i]) out << ',' << txn::format_double(v);
        out << '\n';
    }
}

int train_neural(const Config& cfg, const std::string& model_name) {
    txn::Dataset ds = load_with_optional_vocab(cfg, "train");
    auto [train_ds, val_ds] = split_from_config(ds, cfg, "train");
    txn::TrainConfig tc = train_config(cfg, ds, model_name);
    std::string prefix = cfg.str("train.out_prefix");

    txn::TrainResult result = txn::train(train_ds, val_ds, tc);
    if (result.history.aborted) {
        std::cerr << "training aborted: " << result.history.abort_reason << "\n";
        // last good checkpoint is still written below before exiting 4
    }

    ManifestWriter manifest("train", cfg, tc.seed);
    json extra = {{"best_epoch", result.history.best_epoch},
                  {"best_val_metric", result.history.best_val_metric},
                  {"task", ds.task == txn::TaskKind::classification ? "classification" : "regression"},
                  {"window_len", tc.window_len},
                  {"inference_samples", tc.inference_samples},
                  {"moving_average_width", tc.moving_average_width}};
    result.model.save(prefix + ".ckpt", extra.dump());
    manifest.add_artifact(prefix + ".ckpt");
    txn::write_history_csv(result.history, prefix + ".history.csv");
    manifest.add_artifact(prefix + ".history.csv");
    manifest.set_metric(ds.task == txn::TaskKind::classification ? "val_accuracy" : "val_r2",
                        result.history.best_val_metric);
    manifest.write(prefix + ".manifest.json");
    std::cout << "model " << model_name << " best val metric "
              << result.history.best_val_metric << " (epoch " << result.history.best_epoch
              << ") -> " << prefix << ".ckpt\n";
    return result.history.aborted ? kExitNumeric : kExitOk;
}

int train_boosted(const Config& cfg, const std::string& model_name) {
    txn::Dataset ds = load_with_optional_vocab(cfg, "train");
    auto [train_ds, val_ds] = split_from_config(ds, cfg, "train");
    bool w2v = model_name == "w2v";
    txn::gbt::BoostParams params = boost_params(cfg, w2v);
    std::string prefix = cfg.str("train.out_prefix");

    ManifestWriter manifest("train", cfg, cfg.seed("train.seed"));
    double metric;
    if (w2v) {
        auto res = txn::run_w2v_baseline(train_ds, val_ds, params,
                                         static_cast<int>(cfg.integer("model.emb_mcc", 77)),
                                         static_cast<int>(cfg.integer("model.emb_txn_type", 25)),
                                         cfg.seed("train.seed"));
        metric = res.val_metric;
        txn::gbt::save_ensemble(res.model, params, prefix + ".gbt");
        txn::embed::save_table(res.mcc_table, cfg.seed("train.seed"), prefix + ".mcc.emb");
        txn::embed::save_table(res.type_table, cfg.seed("train.seed"), prefix + ".txn_type.emb");
        manifest.add_artifact(prefix + ".mcc.emb");
        manifest.add_artifact(prefix + ".txn_type.emb");
        manifest.set_metric("chosen_sif_a", res.chosen_a);
    } else {
        auto res = txn::run_feature_baseline(train_ds, val_ds, params);
        metric = res.val_metric;
        txn::gbt::save_ensemble(res.model, params, prefix + ".gbt");
    }
    manifest.add_artifact(prefix + ".gbt");
    manifest.set_metric(ds.task == txn::TaskKind::classification ? "val_accuracy" : "val_r2", metric);
    manifest.write(prefix + ".manifest.json");
    std::cout << "model " << model_name << " val metric " << metric << " -> " << prefix << ".gbt\n";
    return kExitOk;
}

int cmd_train(const Config& cfg) {
    std::string model = cfg.str("train.model");
    if (model == "baseline" || model == "w2v") return train_boosted(cfg, model);
    if (model == "cnn" || model == "indrnn" || model == "lstm") return train_neural(cfg, model);
    throw ConfigError("train.model must be baseline|w2v|cnn|indrnn|lstm, got: " + model);
}

int cmd_evaluate(const Config& cfg) {
    txn::Dataset ds = load_with_optional_vocab(cfg, "evaluate");
    txn::Dataset eval_ds = ds;
    if (cfg.real("evaluate.train_frac", 0.8) > 0.0 && cfg.str("evaluate.split", "val") == "val")
        eval_ds = split_from_config(ds, cfg, "evaluate").second;

    std::string ckpt = cfg.str("evaluate.checkpoint");
    std::string out = cfg.str("evaluate.out");
    json report;
    report["config_digest"] = fnv1a_str(cfg.text());

    std::string extra_json;
    txn::nn::SequenceModel model = [&]() {
        try {
            return txn::nn::SequenceModel::load(ckpt, &extra_json);
        } catch (const std::exception& e) {
            throw DataError(e.what());
        }
    }();
    json extra = extra_json.empty() ? json::object() : json::parse(extra_json);
    bool ckpt_classification = model.config().n_outputs > 1;
    if (ckpt_classification != (ds.task == txn::TaskKind::classification))
        throw DataError("checkpoint task does not match dataset task");
    if (model.config().vocab_sizes[0] != ds.vocab.mcc)
        throw DataError("checkpoint vocabulary does not match dataset");

    std::size_t n = static_cast<std::size_t>(cfg.integer("evaluate.n", extra.value("window_len", 2000)));
    std::uint64_t seed = cfg.seed("evaluate.seed");
    if (ckpt_classification) {
        std::size_t k = static_cast<std::size_t>(cfg.integer("evaluate.k", 30));
        std::vector<int> preds, labels;
        for (const auto& day : eval_ds.days) {
            txn::Rng rng = txn::Rng::substream(seed, {static_cast<std::uint64_t>(day.day_index)});
            auto inf = txn::infer_day_class(model, day, n, k, rng);
            preds.push_back(static_cast<int>(
                std::max_element(inf.probabilities.begin(), inf.probabilities.end()) -
                inf.probabilities.begin()));
            labels.push_back(day.class_label);
        }
        report["metric"] = "accuracy";
        report["value"] = txn::accuracy(preds, labels);
    } else {
        int width = static_cast<int>(cfg.integer("evaluate.ma_width", extra.value("moving_average_width", 7)));
        auto p = txn::infer_day_rate(model, eval_ds, n, width, seed);
        std::vector<double> labels;
        for (const auto& day : eval_ds.days) labels.push_back(day.rate_label);
        report["metric"] = "r2";
        report["value"] = txn::r2(p.smoothed, labels);
        if (cfg.has("evaluate.predictions_out")) {
            std::ofstream pout(cfg.str("evaluate.predictions_out"));
            pout << "day_index,raw,smoothed\n";
            for (std::size_t i = 0; i < p.raw.size(); ++i)
                pout << p.day_index[i] << ',' << txn::format_double(p.raw[i]) << ','
                     << txn::format_double(p.smoothed[i]) << '\n';
        }
    }
    std::ofstream outf(out);
    if (!outf) throw DataError("cannot write report: " + out);
    outf << report.dump(2) << '\n';
    ManifestWriter manifest("evaluate", cfg, seed);
    manifest.add_artifact(out);
    manifest.set_metric(report["metric"].get<std::string>(), report["value"].get<double>());
    manifest.write(out + ".manifest.json");
    std::cout << report["metric"].get<std::string>() << " = " << report["value"] << "\n";
    return kExitOk;
}

int cmd_embed(const Config& cfg) {
    txn::Dataset ds = load_with_optional_vocab(cfg, "embed");
    txn::Dataset eval_ds = cfg.str("embed.split", "val") == "val"
                               ? split_from_config(ds, cfg, "embed").second
                               : ds;
    std::string extra_json;
    txn::nn::SequenceModel model = txn::nn::SequenceModel::load(cfg.str("embed.checkpoint"), &extra_json);
    json extra = extra_json.empty() ? json::object() : json::parse(extra_json);
    std::size_t n = static_cast<std::size_t>(cfg.integer("embed.n", extra.value("window_len", 2000)));
    std::size_t k = static_cast<std::size_t>(cfg.integer("embed.k", 30));
    std::uint64_t seed = cfg.seed("embed.seed");

    auto emb = txn::analysis::day_embeddings(model, eval_ds, n, k, seed);
    std::vector<std::int64_t> idx;
    std::vector<std::string> labels;
    for (const auto& day : eval_ds.days) {
        idx.push_back(day.day_index);
        labels.push_back(eval_ds.task == txn::TaskKind::classification
                             ? std::to_string(day.class_label)
                             : txn::format_double(day.rate_label));
    }
    std::string out = cfg.str("embed.out");
    write_embeddings_csv(emb, idx, labels, out);
    ManifestWriter manifest("embed", cfg, seed);
    manifest.add_artifact(out);
    manifest.write(out + ".manifest.json");
    std::cout << "embedded " << emb.size() << " days -> " << out << "\n";
    return kExitOk;
}

struct EmbeddingsFile {
    std::vector<std::vector<double>> rows;
    std::vector<std::int64_t> day_index;
    std::vector<int> labels;
};

EmbeddingsFile read_embeddings_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open embeddings file: " + path);
    std::string line;
    std::getline(in, line);
    EmbeddingsFile f;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string cell;
        std::getline(ss, cell, ',');
        f.day_index.push_back(std::stoll(cell));
        std::getline(ss, cell, ',');
        if (cell.find('.') == std::string::npos) {
            f.labels.push_back(std::stoi(cell) % 7);
        } else {
            // regression label in [0.01, 0.20] -> 7 color bins
            double v = std::stod(cell);
            int bin = static_cast<int>((v - 0.01) / 0.19 * 7.0);
            f.labels.push_back(std::clamp(bin, 0, 6));
        }
        std::vector<double> row;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        f.rows.push_back(std::move(row));
    }
    return f;
}

int cmd_tsne(const Config& cfg) {
    EmbeddingsFile f = read_embeddings_csv(cfg.str("tsne.embeddings"));
    txn::analysis::TsneConfig tc;
    tc.perplexity = cfg.real("tsne.perplexity", 30.0);
    tc.iterations = static_cast<int>(cfg.integer("tsne.iterations", 1000));
    tc.learning_rate = cfg.real("tsne.learning_rate", 200.0);
    tc.seed = cfg.seed("tsne.seed");
    auto res = txn::analysis::tsne(f.rows, tc);
    std::string out = cfg.str("tsne.out");
    txn::analysis::write_tsne_csv(res, f.day_index, f.labels, out);
    ManifestWriter manifest("tsne", cfg, tc.seed);
    manifest.add_artifact(out);
    if (cfg.has("tsne.svg_out")) {
        txn::analysis::write_tsne_svg(res, f.labels, cfg.str("tsne.svg_out"));
        manifest.add_artifact(cfg.str("tsne.svg_out"));
    }
    manifest.write(out + ".manifest.json");
    std::cout << "t-SNE final KL " << res.final_kl << " -> " << out << "\n";
    return kExitOk;
}

int cmd_stability(const Config& cfg) {
    txn::Dataset ds = load_with_optional_vocab(cfg, "stability");
    auto [train_ds, val_ds] = split_from_config(ds, cfg, "stability");
    std::string model = cfg.str("train.model", "cnn");
    txn::TrainConfig tc = train_config(cfg, ds, model);
    int runs = static_cast<int>(cfg.integer("stability.runs", 10));
    int k = static_cast<int>(cfg.integer("stability.k", 7));
    int jobs = static_cast<int>(cfg.integer("stability.jobs", 0));

    auto res = txn::analysis::stability_protocol(train_ds, val_ds, tc, runs, k, jobs);
    std::string out = cfg.str("stability.out");
    txn::analysis::write_ami_matrix(res, out);
    ManifestWriter manifest("stability", cfg, tc.seed);
    manifest.add_artifact(out);
    manifest.set_metric("mean_ami", res.mean_ami);
    manifest.write(out + ".manifest.json");
    for (const auto& fail : res.failures) std::cerr << "warning: " << fail << "\n";
    std::cout << "mean AMI over " << res.completed_runs * (res.completed_runs - 1) / 2
              << " pairs: " << res.mean_ami << " -> " << out << "\n";
    return kExitOk;
}

int cmd_report(const Config& cfg) {
    std::string path = cfg.str("report.manifest");
    std::ifstream in(path);
    if (!in) throw DataError("cannot open manifest: " + path);
    json m = json::parse(in);
    std::cout << "command:  " << m.value("command", "?") << "\n";
    std::cout << "seed:     " << m.value("seed", 0ULL) << "\n";
    std::cout << "started:  " << m.value("started", "?") << "\n";
    std::cout << "finished: " << m.value("finished", "?") << "\n";
    std::cout << "artifacts:\n";
    for (const auto& a : m["artifacts"]) std::cout << "  " << a.get<std::string>() << "\n";
    if (m.contains("metrics"))
        for (auto& [key, value] : m["metrics"].items())
            std::cout << "metric " << key << " = " << value << "\n";
    return kExitOk;
}

// `--grid train.n=500..5000:500` expansion
std::vector<Config> expand_grid(const Config& base, const std::string& grid) {
    auto eq = grid.find('=');
    auto dots = grid.find("..");
    auto colon = grid.find(':', dots == std::string::npos ? 0 : dots);
    if (eq == std::string::npos || dots == std::string::npos || colon == std::string::npos)
        throw ConfigError("--grid needs key=lo..hi:step, got: " + grid);
    std::string key = grid.substr(0, eq);
    long lo = std::stol(grid.substr(eq + 1, dots - eq - 1));
    long hi = std::stol(grid.substr(dots + 2, colon - dots - 2));
    long step = std::stol(grid.substr(colon + 1));
    if (step <= 0 || hi < lo) throw ConfigError("--grid range is empty");
    std::vector<Config> out;
    for (long v = lo; v <= hi; v += step) {
        Config c = base;
        c.apply_override(key + "=" + std::to_string(v));
        if (c.has("train.out_prefix"))
            c.apply_override("train.out_prefix=" + base.str("train.out_prefix") + "_" +
                             std::to_string(v));
        out.push_back(std::move(c));
    }
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"transaction-stream nowcasting toolkit"};
    app.require_subcommand(1);

    std::string config_path, manifest_path, grid;
    std::vector<std::string> overrides;
    int jobs = 1;

    std::vector<std::string> names = {"generate", "featurize", "train",     "evaluate",
                                      "embed",    "tsne",      "stability", "report"};
    std::map<std::string, CLI::App*> subs;
    for (const auto& name : names) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "run config file (section.key = value)");
        sub->add_option("--from-manifest", manifest_path, "re-run from a manifest's config snapshot");
        sub->add_option("--set", overrides, "override config entries (key=value)");
        if (name == "train") {
            sub->add_option("--grid", grid, "iterate a key over lo..hi:step");
            sub->add_option("--jobs", jobs, "parallel grid workers");
        }
        subs[name] = sub;
    }

    CLI11_PARSE(app, argc, argv);
    std::string command = app.get_subcommands()[0]->get_name();

    try {
        Config cfg = [&]() {
            if (!manifest_path.empty()) {
                std::ifstream in(manifest_path);
                if (!in) throw ConfigError("cannot open manifest: " + manifest_path);
                json m = json::parse(in);
                return Config::parse_text(m.at("config_text").get<std::string>());
            }
            if (config_path.empty() && command != "report")
                throw ConfigError("--config (or --from-manifest) is required");
            return config_path.empty() ? Config::parse_text("") : Config::parse_file(config_path);
        }();
        for (const auto& kv : overrides) cfg.apply_override(kv);

        if (command == "generate") return cmd_generate(cfg);
        if (command == "featurize") return cmd_featurize(cfg);
        if (command == "train") {
            if (grid.empty()) return cmd_train(cfg);
            auto configs = expand_grid(cfg, grid);
            int rc = kExitOk;
            // simple sequential execution; --jobs > 1 runs chunks concurrently
            std::vector<std::thread> pool;
            std::vector<int> rcs(configs.size(), 0);
            for (std::size_t i = 0; i < configs.size(); i += static_cast<std::size_t>(std::max(jobs, 1))) {
                std::size_t end = std::min(configs.size(), i + static_cast<std::size_t>(std::max(jobs, 1)));
                for (std::size_t j = i; j < end; ++j)
                    pool.emplace_back([&configs, &rcs, j]() {
                        try {
                            rcs[j] = cmd_train(configs[j]);
                        } catch (...) {
                            rcs[j] = kExitConfig;
                        }
                    });
                for (auto& t : pool) t.join();
                pool.clear();
            }
            for (int r : rcs) rc = std::max(rc, r);
            return rc;
        }
        if (command == "evaluate") return cmd_evaluate(cfg);
        if (command == "embed") return cmd_embed(cfg);
        if (command == "tsne") return cmd_tsne(cfg);
        if (command == "stability") return cmd_stability(cfg);
        if (command == "report") return cmd_report(cfg);
        throw ConfigError("unknown command: " + command);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const txn::nn::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
}
