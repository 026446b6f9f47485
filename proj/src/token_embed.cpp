#include "txn/token_embed.hpp"

#include "txn/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace txn::embed {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void check_corpus(const std::vector<std::vector<int>>& corpus, int vocab_size) {
    if (corpus.empty()) throw std::invalid_argument("empty corpus");
    for (const auto& seq : corpus)
        for (int t : seq)
            if (t < 0 || t >= vocab_size) throw std::invalid_argument("token out of vocabulary range");
}

} // namespace

TokenFrequency token_frequency(const std::vector<std::vector<int>>& corpus, int vocab_size) {
    check_corpus(corpus, vocab_size);
    TokenFrequency f;
    f.p.assign(static_cast<std::size_t>(vocab_size), 0.0);
    std::size_t total = 0;
    for (const auto& seq : corpus) {
        for (int t : seq) f.p[static_cast<std::size_t>(t)] += 1.0;
        total += seq.size();
    }
    if (total == 0) throw std::invalid_argument("corpus has no tokens");
    for (auto& v : f.p) v /= static_cast<double>(total);
    return f;
}

SkipgramResult train_skipgram(const std::vector<std::vector<int>>& corpus, int vocab_size,
                              const SkipgramConfig& cfg, const std::string& field) {
    check_corpus(corpus, vocab_size);
    if (cfg.dim < 1) throw std::invalid_argument("dim must be >= 1");

    // vocabulary actually seen; size-1 vocabularies leave nothing to contrast
    TokenFrequency freq = token_frequency(corpus, vocab_size);
    int distinct = 0;
    for (double p : freq.p)
        if (p > 0.0) ++distinct;
    if (distinct < 2 && cfg.epochs > 0)
        throw std::invalid_argument("skip-gram needs at least 2 distinct tokens for negatives");

    std::size_t d = static_cast<std::size_t>(cfg.dim);
    SkipgramResult res;
    res.table.field = field;
    res.table.vocab_size = vocab_size;
    res.table.dim = cfg.dim;
    res.table.matrix.assign(static_cast<std::size_t>(vocab_size) * d, 0.0);
    std::vector<double> out_vecs(static_cast<std::size_t>(vocab_size) * d, 0.0);

    Rng rng = Rng::substream(cfg.seed, {0x5946ULL});
    for (auto& v : res.table.matrix) v = (rng.uniform() - 0.5) / static_cast<double>(cfg.dim);
    if (cfg.epochs == 0) return res;

    // negative sampling ~ p(w)^0.75
    std::vector<double> cum(freq.p.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < freq.p.size(); ++i) {
        acc += std::pow(freq.p[i], 0.75);
        cum[i] = acc;
    }
    auto draw_negative = [&]() {
        double u = rng.uniform() * acc;
        return static_cast<int>(std::lower_bound(cum.begin(), cum.end(), u) - cum.begin());
    };

    std::size_t total_tokens = 0;
    for (const auto& seq : corpus) total_tokens += seq.size();
    std::size_t budget = total_tokens * static_cast<std::size_t>(cfg.epochs);
    std::size_t processed = 0;

    std::vector<double> grad_in(d);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double epoch_loss = 0.0;
        std::size_t epoch_pairs = 0;
        for (const auto& seq : corpus) {
            int len = static_cast<int>(seq.size());
            for (int i = 0; i < len; ++i, ++processed) {
                double lr = cfg.lr * std::max(1.0 - static_cast<double>(processed) / static_cast<double>(budget), 1e-4);
                double* vin = res.table.row(seq[static_cast<std::size_t>(i)]);
                int lo = std::max(0, i - cfg.window), hi = std::min(len - 1, i + cfg.window);
                for (int j = lo; j <= hi; ++j) {
                    if (j == i) continue;
                    std::fill(grad_in.begin(), grad_in.end(), 0.0);
                    for (int neg = 0; neg <= cfg.negatives; ++neg) {
                        int target;
                        double label;
                        if (neg == 0) {
                            target = seq[static_cast<std::size_t>(j)];
                            label = 1.0;
                        } else {
                            target = draw_negative();
                            if (target == seq[static_cast<std::size_t>(j)]) continue;
                            label = 0.0;
                        }
                        double* vout = out_vecs.data() + static_cast<std::size_t>(target) * d;
                        double s = 0.0;
                        for (std::size_t c = 0; c < d; ++c) s += vin[c] * vout[c];
                        double pred = sigmoid(s);
                        epoch_loss += label > 0.5 ? -std::log(std::max(pred, 1e-12))
                                                  : -std::log(std::max(1.0 - pred, 1e-12));
                        double g = (pred - label) * lr;
                        for (std::size_t c = 0; c < d; ++c) {
                            grad_in[c] += g * vout[c];
                            vout[c] -= g * vin[c];
                        }
                    }
                    for (std::size_t c = 0; c < d; ++c) vin[c] -= grad_in[c];
                    ++epoch_pairs;
                }
            }
        }
        double avg = epoch_pairs ? epoch_loss / static_cast<double>(epoch_pairs) : 0.0;
        if (epoch == 0) res.first_epoch_loss = avg;
        res.last_epoch_loss = avg;
    }
    return res;
}

double sif_weight(double a, double pw) { return a / (a + pw); }

std::vector<double> sif_day_embedding(const std::vector<int>& day_tokens, const EmbeddingTable& table,
                                      const TokenFrequency& freq, const SifConfig& cfg) {
    if (day_tokens.empty()) throw std::invalid_argument("sif_day_embedding: empty day");
    if (!(cfg.a > 0.0)) throw std::invalid_argument("sif a must be > 0");
    std::vector<double> out(static_cast<std::size_t>(table.dim), 0.0);
    for (int tok : day_tokens) {
        if (tok < 0 || tok >= table.vocab_size) throw std::invalid_argument("token out of range");
        double pw = static_cast<std::size_t>(tok) < freq.p.size() ? freq.p[static_cast<std::size_t>(tok)] : 0.0;
        double w = sif_weight(cfg.a, pw);
        const double* v = table.row(tok);
        for (std::size_t c = 0; c < out.size(); ++c) out[c] += w * v[c];
    }
    for (auto& v : out) v /= static_cast<double>(day_tokens.size());
    return out;
}

RemoveComponentResult remove_first_component(const std::vector<std::vector<double>>& X) {
    if (X.size() < 2) throw std::invalid_argument("need at least 2 rows");
    std::size_t d = X[0].size();
    for (const auto& row : X)
        if (row.size() != d) throw std::invalid_argument("ragged matrix");

    // Gram matrix C = X^T X
    std::vector<double> C(d * d, 0.0);
    for (const auto& row : X)
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) C[i * d + j] += row[i] * row[j];

    RemoveComponentResult res;
    res.direction.assign(d, 1.0 / std::sqrt(static_cast<double>(d)));
    std::vector<double> next(d);
    const int max_iters = 1000;
    const double tol = 1e-9;
    bool converged = false;
    int it = 0;
    double lambda1 = 0.0;
    for (; it < max_iters; ++it) {
        for (std::size_t i = 0; i < d; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < d; ++j) s += C[i * d + j] * res.direction[j];
            next[i] = s;
        }
        double norm = 0.0;
        for (double v : next) norm += v * v;
        norm = std::sqrt(norm);
        if (norm == 0.0) { // zero matrix: nothing to remove
            res.rows = X;
            res.iterations = it;
            return res;
        }
        double diff = 0.0, dot = 0.0;
        for (std::size_t i = 0; i < d; ++i) dot += next[i] * res.direction[i];
        double sign = dot < 0.0 ? -1.0 : 1.0;
        for (std::size_t i = 0; i < d; ++i) {
            next[i] = sign * next[i] / norm;
            diff = std::max(diff, std::abs(next[i] - res.direction[i]));
        }
        res.direction = next;
        lambda1 = norm;
        if (diff <= tol) {
            converged = true;
            ++it;
            break;
        }
    }
    res.iterations = it;
    res.converged = converged;

    // crude spectral-gap probe: a few deflated iterations estimate lambda2
    {
        std::vector<double> v(d);
        for (std::size_t i = 0; i < d; ++i) v[i] = (i % 2 ? -1.0 : 1.0) / std::sqrt(static_cast<double>(d));
        double lambda2 = 0.0;
        for (int probe = 0; probe < 50; ++probe) {
            double proj = 0.0;
            for (std::size_t i = 0; i < d; ++i) proj += v[i] * res.direction[i];
            for (std::size_t i = 0; i < d; ++i) v[i] -= proj * res.direction[i];
            for (std::size_t i = 0; i < d; ++i) {
                double s = 0.0;
                for (std::size_t j = 0; j < d; ++j) s += C[i * d + j] * v[j];
                next[i] = s;
            }
            double norm = 0.0;
            for (double x : next) norm += x * x;
            norm = std::sqrt(norm);
            if (norm == 0.0) break;
            for (std::size_t i = 0; i < d; ++i) v[i] = next[i] / norm;
            lambda2 = norm;
        }
        if (lambda1 > 0.0 && lambda2 >= lambda1 * (1.0 - 1e-9)) res.degenerate_spectrum = true;
    }
    if (!converged && !res.degenerate_spectrum)
        throw std::runtime_error("power iteration did not converge after " + std::to_string(it) +
                                 " iterations");

    res.rows = X;
    for (auto& row : res.rows) {
        double proj = 0.0;
        for (std::size_t i = 0; i < d; ++i) proj += row[i] * res.direction[i];
        for (std::size_t i = 0; i < d; ++i) row[i] -= proj * res.direction[i];
    }
    return res;
}

void save_table(const EmbeddingTable& t, std::uint64_t seed, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    nlohmann::json manifest = {{"format", "txn-emb-v1"},
                               {"field", t.field},
                               {"vocab_size", t.vocab_size},
                               {"dim", t.dim},
                               {"seed", seed}};
    out << manifest.dump() << '\n';
    out.write(reinterpret_cast<const char*>(t.matrix.data()),
              static_cast<std::streamsize>(t.matrix.size() * sizeof(double)));
}

EmbeddingTable load_table(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::string header;
    std::getline(in, header);
    auto manifest = nlohmann::json::parse(header);
    if (manifest.value("format", "") != "txn-emb-v1")
        throw std::runtime_error("not a txn-emb-v1 file: " + path);
    EmbeddingTable t;
    t.field = manifest["field"];
    t.vocab_size = manifest["vocab_size"];
    t.dim = manifest["dim"];
    t.matrix.resize(static_cast<std::size_t>(t.vocab_size) * static_cast<std::size_t>(t.dim));
    in.read(reinterpret_cast<char*>(t.matrix.data()),
            static_cast<std::streamsize>(t.matrix.size() * sizeof(double)));
    if (!in) throw std::runtime_error("truncated embedding file: " + path);
    return t;
}

} // namespace txn::embed
