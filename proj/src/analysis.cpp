#include "txn/analysis.hpp"

#include "txn/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <limits>
#include <stdexcept>
#include <thread>

namespace txn::analysis {

Partition Partition::from_labels(std::vector<int> labels) {
    Partition p;
    p.labels = std::move(labels);
    for (int l : p.labels) {
        if (l < 0) throw std::invalid_argument("negative cluster id");
        p.n_clusters = std::max(p.n_clusters, l + 1);
    }
    if (p.n_clusters == 0) p.n_clusters = 1;
    return p;
}

namespace {

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

KmeansResult kmeans_once(const std::vector<std::vector<double>>& X, int k, Rng& rng) {
    std::size_t n = X.size();
    // k-means++ seeding
    std::vector<std::vector<double>> centers;
    centers.reserve(static_cast<std::size_t>(k));
    std::vector<double> mindist(n, std::numeric_limits<double>::infinity());
    centers.push_back(X[rng.uniform_int(n)]);
    for (int c = 1; c < k; ++c) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            mindist[i] = std::min(mindist[i], sq_dist(X[i], centers.back()));
            total += mindist[i];
        }
        std::size_t pick = 0;
        if (total > 0.0) {
            double u = rng.uniform() * total;
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                acc += mindist[i];
                if (u <= acc) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = rng.uniform_int(n);
        }
        centers.push_back(X[pick]);
    }

    KmeansResult res;
    std::vector<int> assign(n, -1);
    for (int iter = 0; iter < 300; ++iter) {
        bool changed = false;
        double inertia = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            int best = 0;
            double bd = sq_dist(X[i], centers[0]);
            for (int c = 1; c < k; ++c) {
                double d = sq_dist(X[i], centers[static_cast<std::size_t>(c)]);
                if (d < bd) {
                    bd = d;
                    best = c;
                }
            }
            if (assign[i] != best) {
                assign[i] = best;
                changed = true;
            }
            inertia += bd;
        }
        res.inertia_trace.push_back(inertia);
        res.inertia = inertia;
        if (!changed && iter > 0) break;

        std::vector<std::vector<double>> sums(static_cast<std::size_t>(k),
                                              std::vector<double>(X[0].size(), 0.0));
        std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
        for (std::size_t i = 0; i < n; ++i) {
            auto& s = sums[static_cast<std::size_t>(assign[i])];
            for (std::size_t j = 0; j < s.size(); ++j) s[j] += X[i][j];
            ++counts[static_cast<std::size_t>(assign[i])];
        }
        for (int c = 0; c < k; ++c) {
            if (counts[static_cast<std::size_t>(c)] == 0) {
                // re-seed from the point farthest from its center
                std::size_t far = 0;
                double fd = -1.0;
                for (std::size_t i = 0; i < n; ++i) {
                    double d = sq_dist(X[i], centers[static_cast<std::size_t>(assign[i])]);
                    if (d > fd) {
                        fd = d;
                        far = i;
                    }
                }
                centers[static_cast<std::size_t>(c)] = X[far];
            } else {
                for (std::size_t j = 0; j < X[0].size(); ++j)
                    centers[static_cast<std::size_t>(c)][j] =
                        sums[static_cast<std::size_t>(c)][j] /
                        static_cast<double>(counts[static_cast<std::size_t>(c)]);
            }
        }
    }
    res.partition.labels = std::move(assign);
    res.partition.n_clusters = k;
    res.centers = std::move(centers);
    return res;
}

} // namespace

KmeansResult kmeans(const std::vector<std::vector<double>>& X, int k, int restarts,
                    std::uint64_t seed) {
    if (X.empty() || k < 1 || static_cast<std::size_t>(k) > X.size())
        throw std::invalid_argument("kmeans: need n >= k >= 1");
    if (restarts < 1) restarts = 1;
    KmeansResult best;
    best.inertia = std::numeric_limits<double>::infinity();
    for (int r = 0; r < restarts; ++r) {
        Rng rng = Rng::substream(seed, {static_cast<std::uint64_t>(r)});
        KmeansResult res = kmeans_once(X, k, rng);
        if (res.inertia < best.inertia) best = std::move(res);
    }
    return best;
}

namespace {

std::vector<std::size_t> cluster_counts(const Partition& u) {
    std::vector<std::size_t> c(static_cast<std::size_t>(u.n_clusters), 0);
    for (int l : u.labels) ++c[static_cast<std::size_t>(l)];
    return c;
}

} // namespace

double entropy(const Partition& u) {
    if (u.labels.empty()) throw std::invalid_argument("entropy of empty partition");
    double n = static_cast<double>(u.labels.size());
    double h = 0.0;
    for (std::size_t c : cluster_counts(u)) {
        if (c == 0) continue;
        double p = static_cast<double>(c) / n;
        h -= p * std::log(p);
    }
    return h;
}

double mutual_information(const Partition& u, const Partition& v) {
    if (u.labels.size() != v.labels.size() || u.labels.empty())
        throw std::invalid_argument("mutual_information: size mismatch");
    double n = static_cast<double>(u.labels.size());
    std::vector<std::vector<std::size_t>> table(
        static_cast<std::size_t>(u.n_clusters),
        std::vector<std::size_t>(static_cast<std::size_t>(v.n_clusters), 0));
    for (std::size_t i = 0; i < u.labels.size(); ++i)
        ++table[static_cast<std::size_t>(u.labels[i])][static_cast<std::size_t>(v.labels[i])];
    auto cu = cluster_counts(u);
    auto cv = cluster_counts(v);
    double mi = 0.0;
    for (std::size_t i = 0; i < table.size(); ++i)
        for (std::size_t j = 0; j < table[i].size(); ++j) {
            if (table[i][j] == 0) continue;
            double pij = static_cast<double>(table[i][j]) / n;
            double pi = static_cast<double>(cu[i]) / n;
            double pj = static_cast<double>(cv[j]) / n;
            mi += pij * std::log(pij / (pi * pj));
        }
    return std::max(mi, 0.0);
}

double expected_mi(const Partition& u, const Partition& v) {
    if (u.labels.size() != v.labels.size() || u.labels.empty())
        throw std::invalid_argument("expected_mi: size mismatch");
    auto a = cluster_counts(u);
    auto b = cluster_counts(v);
    double N = static_cast<double>(u.labels.size());
    std::size_t n = u.labels.size();

    // closed-form expectation under the fixed-marginals permutation model
    double emi = 0.0;
    for (std::size_t ai : a) {
        if (ai == 0) continue;
        for (std::size_t bj : b) {
            if (bj == 0) continue;
            std::size_t lo = ai + bj > n ? ai + bj - n : 1;
            if (lo == 0) lo = 1;
            std::size_t hi = std::min(ai, bj);
            for (std::size_t nij = lo; nij <= hi; ++nij) {
                double term = (static_cast<double>(nij) / N) *
                              std::log(N * static_cast<double>(nij) /
                                       (static_cast<double>(ai) * static_cast<double>(bj)));
                double logp = std::lgamma(static_cast<double>(ai) + 1) +
                              std::lgamma(static_cast<double>(bj) + 1) +
                              std::lgamma(N - static_cast<double>(ai) + 1) +
                              std::lgamma(N - static_cast<double>(bj) + 1) -
                              std::lgamma(N + 1) - std::lgamma(static_cast<double>(nij) + 1) -
                              std::lgamma(static_cast<double>(ai - nij) + 1) -
                              std::lgamma(static_cast<double>(bj - nij) + 1) -
                              std::lgamma(N - static_cast<double>(ai) - static_cast<double>(bj) +
                                          static_cast<double>(nij) + 1);
                emi += term * std::exp(logp);
            }
        }
    }
    return emi;
}

double ami(const Partition& u, const Partition& v) {
    double mi = mutual_information(u, v);
    double emi = expected_mi(u, v);
    double hmax = std::max(entropy(u), entropy(v));
    double denom = hmax - emi;
    if (std::abs(denom) < 1e-15) {
        // both partitions single-cluster (or equivalent): identity gives 1
        return u.labels == v.labels ? 1.0 : 0.0;
    }
    return (mi - emi) / denom;
}

std::vector<std::vector<double>> day_embeddings(nn::SequenceModel& model, const Dataset& ds,
                                                std::size_t window_len, std::size_t k,
                                                std::uint64_t seed) {
    std::vector<std::vector<double>> out;
    out.reserve(ds.days.size());
    for (const auto& day : ds.days) {
        Rng rng = Rng::substream(seed, {0xE3BDULL, static_cast<std::uint64_t>(day.day_index)});
        out.push_back(infer_day_class(model, day, window_len, k, rng).embedding);
    }
    return out;
}

StabilityResult stability_protocol(const Dataset& train_ds, const Dataset& val_ds,
                                   const TrainConfig& cfg, int runs, int k, int jobs) {
    if (runs < 2) throw std::invalid_argument("stability protocol needs runs >= 2");
    if (jobs <= 0) jobs = static_cast<int>(std::thread::hardware_concurrency());
    if (jobs < 1) jobs = 1;

    StabilityResult res;
    res.partitions.resize(static_cast<std::size_t>(runs));
    std::vector<int> ok(static_cast<std::size_t>(runs), 0);
    std::vector<std::string> errors(static_cast<std::size_t>(runs));

    auto run_one = [&](int r) {
        try {
            TrainConfig run_cfg = cfg;
            run_cfg.seed = Rng::mix(cfg.seed + static_cast<std::uint64_t>(r) * 0x9e37ULL + 1);
            TrainResult tr = train(train_ds, val_ds, run_cfg);
            if (tr.history.aborted) throw std::runtime_error(tr.history.abort_reason);
            auto emb = day_embeddings(tr.model, val_ds, run_cfg.window_len,
                                      run_cfg.inference_samples, run_cfg.seed);
            auto km = kmeans(emb, k, 5, run_cfg.seed ^ 0xC1u);
            res.partitions[static_cast<std::size_t>(r)] = km.partition;
            ok[static_cast<std::size_t>(r)] = 1;
        } catch (const std::exception& e) {
            errors[static_cast<std::size_t>(r)] = e.what();
        }
    };

    for (int start = 0; start < runs; start += jobs) {
        std::vector<std::thread> pool;
        for (int r = start; r < std::min(runs, start + jobs); ++r) pool.emplace_back(run_one, r);
        for (auto& t : pool) t.join();
    }

    res.pair_matrix.assign(static_cast<std::size_t>(runs),
                           std::vector<double>(static_cast<std::size_t>(runs), 0.0));
    double sum = 0.0;
    int pairs = 0;
    for (int i = 0; i < runs; ++i) {
        if (!ok[static_cast<std::size_t>(i)]) {
            res.failures.push_back("run " + std::to_string(i) + ": " + errors[static_cast<std::size_t>(i)]);
            continue;
        }
        ++res.completed_runs;
        res.pair_matrix[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] = 1.0;
        for (int j = i + 1; j < runs; ++j) {
            if (!ok[static_cast<std::size_t>(j)]) continue;
            double a = ami(res.partitions[static_cast<std::size_t>(i)],
                           res.partitions[static_cast<std::size_t>(j)]);
            res.pair_matrix[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = a;
            res.pair_matrix[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] = a;
            sum += a;
            ++pairs;
        }
    }
    res.mean_ami = pairs ? sum / static_cast<double>(pairs) : 0.0;
    return res;
}

void write_ami_matrix(const StabilityResult& r, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "mean_ami," << format_double(r.mean_ami) << '\n';
    for (const auto& row : r.pair_matrix) {
        for (std::size_t j = 0; j < row.size(); ++j)
            out << (j ? "," : "") << format_double(row[j]);
        out << '\n';
    }
}

} // namespace txn::analysis
