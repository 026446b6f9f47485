#include "txn/nn/model.hpp"

#include "txn/rng.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace txn::nn {

std::string arch_name(Arch a) {
    switch (a) {
        case Arch::cnn: return "cnn";
        case Arch::indrnn: return "indrnn";
        case Arch::lstm: return "lstm";
    }
    return "?";
}

Arch arch_from_name(const std::string& s) {
    if (s == "cnn") return Arch::cnn;
    if (s == "indrnn") return Arch::indrnn;
    if (s == "lstm") return Arch::lstm;
    throw std::invalid_argument("unknown architecture: " + s);
}

int ModelConfig::input_dim() const {
    int d = 2; // numeric channels: signed log amount, time/24
    for (int e : emb_dims) d += e;
    return d;
}

int ModelConfig::embedding_dim() const {
    return arch == Arch::cnn ? conv_channels : hidden;
}

Tensor* SequenceModel::add_param(const std::string& name, std::vector<int> shape) {
    params_.emplace_back(std::move(shape));
    names_.push_back(name);
    return &params_.back();
}

SequenceModel::SequenceModel(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
    if (cfg_.vocab_sizes.size() != cfg_.emb_dims.size())
        throw std::invalid_argument("vocab_sizes / emb_dims length mismatch");
    Rng rng = Rng::substream(seed, {0x1417ULL});
    auto init_uniform = [&rng](Tensor* t, double scale) {
        for (auto& v : t->v) v = (rng.uniform() * 2.0 - 1.0) * scale;
    };

    for (std::size_t f = 0; f < cfg_.vocab_sizes.size(); ++f) {
        Tensor* t = add_param("emb_" + std::to_string(f), {cfg_.vocab_sizes[f], cfg_.emb_dims[f]});
        init_uniform(t, 0.5 / cfg_.emb_dims[f]);
        emb_tables_.push_back(t);
    }

    int d = cfg_.input_dim();
    if (cfg_.arch == Arch::cnn) {
        int cin = d;
        for (int b = 0; b < cfg_.conv_blocks; ++b) {
            Tensor* w = add_param("conv" + std::to_string(b) + "_w",
                                  {cfg_.conv_channels, cfg_.conv_kernel, cin});
            init_uniform(w, std::sqrt(6.0 / (cin * cfg_.conv_kernel + cfg_.conv_channels)));
            conv_w_.push_back(w);
            conv_b_.push_back(add_param("conv" + std::to_string(b) + "_b", {cfg_.conv_channels}));
            cin = cfg_.conv_channels;
        }
    } else if (cfg_.arch == Arch::indrnn) {
        int in = d;
        for (int l = 0; l < cfg_.rnn_layers; ++l) {
            Tensor* w = add_param("indrnn" + std::to_string(l) + "_w", {cfg_.hidden, in});
            init_uniform(w, std::sqrt(6.0 / (in + cfg_.hidden)));
            rnn_w_.push_back(w);
            Tensor* u = add_param("indrnn" + std::to_string(l) + "_u", {cfg_.hidden});
            init_uniform(u, 0.5);
            rnn_u_.push_back(u);
            rnn_b_.push_back(add_param("indrnn" + std::to_string(l) + "_b", {cfg_.hidden}));
            in = cfg_.hidden;
        }
    } else {
        lstm_w_ = add_param("lstm_w", {4 * cfg_.hidden, d + cfg_.hidden});
        init_uniform(lstm_w_, std::sqrt(6.0 / (d + cfg_.hidden + cfg_.hidden)));
        lstm_b_ = add_param("lstm_b", {4 * cfg_.hidden});
        // forget-gate bias starts at 1
        for (int i = cfg_.hidden; i < 2 * cfg_.hidden; ++i) lstm_b_->v[static_cast<std::size_t>(i)] = 1.0;
    }

    int h = cfg_.embedding_dim();
    head_w_ = add_param("head_w", {cfg_.n_outputs, h});
    init_uniform(head_w_, std::sqrt(6.0 / (h + cfg_.n_outputs)));
    head_b_ = add_param("head_b", {cfg_.n_outputs});
}

std::vector<Tensor*> SequenceModel::parameters() {
    std::vector<Tensor*> out;
    for (auto& p : params_) out.push_back(&p);
    return out;
}

Tensor* SequenceModel::token_matrix(Graph& g, const Window& w) {
    std::size_t n = w.txns.size();
    std::size_t n_fields = emb_tables_.size();
    std::vector<Tensor*> parts;
    parts.reserve(n_fields + 1);
    std::vector<int> idx(n);
    for (std::size_t f = 0; f < n_fields; ++f) {
        for (std::size_t i = 0; i < n; ++i) {
            const Transaction& t = w.txns[i];
            int tok = f == 0   ? t.mcc
                      : f == 1 ? t.txn_type
                      : f == 2 ? t.currency.value_or(0)
                               : t.country.value_or(0);
            if (tok < 0 || tok >= cfg_.vocab_sizes[f])
                throw std::out_of_range("token index out of embedding range");
            idx[i] = tok;
        }
        parts.push_back(gather_rows(g, emb_tables_[f], idx));
    }
    std::vector<double> numeric(n * 2);
    for (std::size_t i = 0; i < n; ++i) {
        const Transaction& t = w.txns[i];
        double sign = t.amount < 0.0 ? -1.0 : (t.amount > 0.0 ? 1.0 : 0.0);
        numeric[i * 2] = sign * std::log1p(std::abs(t.amount));
        numeric[i * 2 + 1] = t.time_hours / 24.0;
    }
    parts.push_back(constant(g, {static_cast<int>(n), 2}, numeric));
    return concat_cols(g, parts);
}

SequenceModel::Forward SequenceModel::forward(Graph& g, const Window& w) {
    Tensor* x = token_matrix(g, w);
    Tensor* emb = nullptr;
    if (cfg_.arch == Arch::cnn) {
        Tensor* h = x;
        for (int b = 0; b < cfg_.conv_blocks; ++b) {
            h = conv1d_same(g, h, conv_w_[static_cast<std::size_t>(b)],
                            conv_b_[static_cast<std::size_t>(b)], cfg_.conv_kernel);
            h = relu(g, h);
            h = maxpool1d(g, h, cfg_.pool_width);
        }
        emb = mean_rows(g, h);
    } else if (cfg_.arch == Arch::indrnn) {
        int n = x->rows();
        std::vector<Tensor*> state(static_cast<std::size_t>(cfg_.rnn_layers), nullptr);
        for (int t = 0; t < n; ++t) {
            Tensor* in = row_vec(g, x, t);
            for (int l = 0; l < cfg_.rnn_layers; ++l) {
                Tensor* pre = linear(g, rnn_w_[static_cast<std::size_t>(l)], in,
                                     rnn_b_[static_cast<std::size_t>(l)]);
                if (state[static_cast<std::size_t>(l)])
                    pre = add(g, pre,
                              mul(g, rnn_u_[static_cast<std::size_t>(l)], state[static_cast<std::size_t>(l)]));
                Tensor* h = relu(g, pre);
                state[static_cast<std::size_t>(l)] = h;
                in = h;
            }
        }
        emb = state.back();
    } else {
        int n = x->rows();
        int hd = cfg_.hidden;
        Tensor* h = nullptr;
        Tensor* c = nullptr;
        for (int t = 0; t < n; ++t) {
            Tensor* xt = row_vec(g, x, t);
            Tensor* joint;
            if (h) {
                joint = concat_vec(g, xt, h);
            } else {
                std::vector<double> zeros(static_cast<std::size_t>(hd), 0.0);
                joint = concat_vec(g, xt, constant(g, {hd}, zeros));
            }
            Tensor* gates = linear(g, lstm_w_, joint, lstm_b_);
            Tensor* i_g = sigmoid(g, slice_vec(g, gates, 0, hd));
            Tensor* f_g = sigmoid(g, slice_vec(g, gates, hd, hd));
            Tensor* o_g = sigmoid(g, slice_vec(g, gates, 2 * hd, hd));
            Tensor* cand = tanh_op(g, slice_vec(g, gates, 3 * hd, hd));
            Tensor* ic = mul(g, i_g, cand);
            c = c ? add(g, mul(g, f_g, c), ic) : ic;
            h = mul(g, o_g, tanh_op(g, c));
        }
        emb = h;
    }
    Tensor* out = linear(g, head_w_, emb, head_b_);
    return {emb, out};
}

std::vector<double> SequenceModel::day_embedding(const Window& w) {
    Graph g;
    Forward f = forward(g, w);
    return f.embedding->v;
}

std::vector<double> SequenceModel::head_on_embedding(const std::vector<double>& emb) const {
    int m = head_w_->rows(), n = head_w_->cols();
    if (static_cast<int>(emb.size()) != n) throw std::invalid_argument("embedding dim mismatch");
    std::vector<double> out(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) {
        double s = head_b_->v[static_cast<std::size_t>(i)];
        const double* wrow = head_w_->v.data() + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) s += wrow[j] * emb[static_cast<std::size_t>(j)];
        out[static_cast<std::size_t>(i)] = s;
    }
    return out;
}

void SequenceModel::clip_recurrent_weights(std::size_t seq_len) {
    if (cfg_.arch != Arch::indrnn || seq_len == 0) return;
    double bound = std::pow(2.0, 1.0 / static_cast<double>(seq_len));
    for (Tensor* u : rnn_u_)
        for (auto& v : u->v) v = std::clamp(v, -bound, bound);
}

namespace {

std::uint64_t fnv1a(const unsigned char* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (std::size_t i = 0; i < n; ++i) {
        h ^= data[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

nlohmann::json config_to_json(const ModelConfig& c) {
    return {{"arch", arch_name(c.arch)},
            {"vocab_sizes", c.vocab_sizes},
            {"emb_dims", c.emb_dims},
            {"n_outputs", c.n_outputs},
            {"conv_blocks", c.conv_blocks},
            {"conv_channels", c.conv_channels},
            {"conv_kernel", c.conv_kernel},
            {"pool_width", c.pool_width},
            {"hidden", c.hidden},
            {"rnn_layers", c.rnn_layers}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.arch = arch_from_name(j["arch"]);
    c.vocab_sizes = j["vocab_sizes"].get<std::vector<int>>();
    c.emb_dims = j["emb_dims"].get<std::vector<int>>();
    c.n_outputs = j["n_outputs"];
    c.conv_blocks = j["conv_blocks"];
    c.conv_channels = j["conv_channels"];
    c.conv_kernel = j["conv_kernel"];
    c.pool_width = j["pool_width"];
    c.hidden = j["hidden"];
    c.rnn_layers = j["rnn_layers"];
    return c;
}

} // namespace

void SequenceModel::save(const std::string& path, const std::string& extra_json) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    std::uint64_t checksum = 0xcbf29ce484222325ULL;
    nlohmann::json blobs = nlohmann::json::array();
    for (std::size_t i = 0; i < params_.size(); ++i) {
        blobs.push_back({{"name", names_[i]}, {"shape", params_[i].shape}});
        checksum = fnv1a(reinterpret_cast<const unsigned char*>(params_[i].v.data()),
                         params_[i].v.size() * sizeof(double), checksum);
    }
    nlohmann::json manifest = {{"format", "txn-ckpt-v1"},
                               {"config", config_to_json(cfg_)},
                               {"blobs", blobs},
                               {"checksum", checksum},
                               {"extra", extra_json}};
    out << manifest.dump() << '\n';
    for (const auto& p : params_)
        out.write(reinterpret_cast<const char*>(p.v.data()),
                  static_cast<std::streamsize>(p.v.size() * sizeof(double)));
}

SequenceModel SequenceModel::load(const std::string& path, std::string* extra_json) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::string header;
    std::getline(in, header);
    auto manifest = nlohmann::json::parse(header);
    if (manifest.value("format", "") != "txn-ckpt-v1")
        throw std::runtime_error("not a txn-ckpt-v1 file: " + path);
    SequenceModel model(config_from_json(manifest["config"]), 0);
    const auto& blobs = manifest["blobs"];
    if (blobs.size() != model.params_.size())
        throw std::runtime_error("checkpoint parameter count mismatch: " + path);
    std::uint64_t checksum = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < model.params_.size(); ++i) {
        if (blobs[i]["name"] != model.names_[i] ||
            blobs[i]["shape"].get<std::vector<int>>() != model.params_[i].shape)
            throw std::runtime_error("checkpoint layout mismatch at " + model.names_[i]);
        in.read(reinterpret_cast<char*>(model.params_[i].v.data()),
                static_cast<std::streamsize>(model.params_[i].v.size() * sizeof(double)));
        checksum = fnv1a(reinterpret_cast<const unsigned char*>(model.params_[i].v.data()),
                         model.params_[i].v.size() * sizeof(double), checksum);
    }
    if (!in) throw std::runtime_error("truncated checkpoint: " + path);
    if (checksum != manifest["checksum"].get<std::uint64_t>())
        throw std::runtime_error("checkpoint checksum mismatch: " + path);
    if (extra_json) *extra_json = manifest.value("extra", "");
    return model;
}

void Adam::step(const std::vector<Tensor*>& params, double lr) {
    if (m_.empty()) {
        m_.resize(params.size());
        v_.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            m_[i].assign(params[i]->size(), 0.0);
            v_[i].assign(params[i]->size(), 0.0);
        }
    }
    if (m_.size() != params.size()) throw std::invalid_argument("Adam: parameter set changed");
    for (const Tensor* p : params)
        for (double g : p->g)
            if (!std::isfinite(g)) throw NumericError("non-finite gradient, step aborted");

    ++t_;
    double bc1 = 1.0 - std::pow(beta1_, t_);
    double bc2 = 1.0 - std::pow(beta2_, t_);
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor* p = params[i];
        for (std::size_t j = 0; j < p->size(); ++j) {
            double g = p->g[j];
            m_[i][j] = beta1_ * m_[i][j] + (1.0 - beta1_) * g;
            v_[i][j] = beta2_ * v_[i][j] + (1.0 - beta2_) * g * g;
            double mhat = m_[i][j] / bc1;
            double vhat = v_[i][j] / bc2;
            p->v[j] -= lr * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

double step_decay_lr(double lr0, int epoch, double decay, int step_size) {
    return lr0 * std::pow(decay, epoch / step_size);
}

} // namespace txn::nn
