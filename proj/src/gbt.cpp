#include "txn/gbt.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

namespace txn::gbt {

double Tree::predict(std::span<const double> x) const {
    int i = 0;
    while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
        const TreeNode& nd = nodes[static_cast<std::size_t>(i)];
        i = x[static_cast<std::size_t>(nd.feature)] < nd.threshold ? nd.left : nd.right;
    }
    return nodes[static_cast<std::size_t>(i)].value;
}

std::vector<double> TreeEnsemble::score(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != n_features)
        throw std::invalid_argument("feature vector length mismatch");
    std::vector<double> s(base_score.begin(), base_score.end());
    for (std::size_t t = 0; t < trees.size(); ++t)
        s[t % static_cast<std::size_t>(n_classes)] += shrinkage * trees[t].predict(x);
    return s;
}

std::vector<double> TreeEnsemble::predict(std::span<const double> x) const {
    auto s = score(x);
    if (n_classes == 1) return s;
    double mx = *std::max_element(s.begin(), s.end());
    double sum = 0.0;
    for (auto& v : s) {
        v = std::exp(v - mx);
        sum += v;
    }
    for (auto& v : s) v /= sum;
    return s;
}

int TreeEnsemble::predict_class(std::span<const double> x) const {
    auto s = score(x);
    return static_cast<int>(std::max_element(s.begin(), s.end()) - s.begin());
}

namespace {

struct SplitChoice {
    double gain = 0.0;
    int feature = -1;
    double threshold = 0.0;
};

double leaf_objective(double g, double h, double lambda) { return g * g / (h + lambda); }

// Exact greedy split over all features; returns feature -1 when no split
// improves the objective under the min_child_weight constraint.
SplitChoice best_split(const std::vector<std::vector<double>>& X, const std::vector<double>& g,
                       const std::vector<double>& h, const std::vector<int>& idx,
                       const BoostParams& p) {
    double gtot = 0.0, htot = 0.0;
    for (int i : idx) {
        gtot += g[static_cast<std::size_t>(i)];
        htot += h[static_cast<std::size_t>(i)];
    }
    double parent = leaf_objective(gtot, htot, p.l2_lambda);

    SplitChoice best;
    int n_features = static_cast<int>(X[0].size());
    std::vector<int> order(idx);
    for (int f = 0; f < n_features; ++f) {
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            return X[static_cast<std::size_t>(a)][static_cast<std::size_t>(f)] <
                   X[static_cast<std::size_t>(b)][static_cast<std::size_t>(f)];
        });
        double gl = 0.0, hl = 0.0;
        for (std::size_t k = 0; k + 1 < order.size(); ++k) {
            int i = order[k];
            gl += g[static_cast<std::size_t>(i)];
            hl += h[static_cast<std::size_t>(i)];
            double xv = X[static_cast<std::size_t>(i)][static_cast<std::size_t>(f)];
            double xn = X[static_cast<std::size_t>(order[k + 1])][static_cast<std::size_t>(f)];
            if (xv == xn) continue; // threshold must separate distinct values
            if (hl < p.min_child_weight || htot - hl < p.min_child_weight) continue;
            double gain = leaf_objective(gl, hl, p.l2_lambda) +
                          leaf_objective(gtot - gl, htot - hl, p.l2_lambda) - parent;
            // strict > keeps the lowest feature index, then lowest threshold
            if (gain > best.gain) {
                best.gain = gain;
                best.feature = f;
                best.threshold = 0.5 * (xv + xn);
            }
        }
    }
    return best;
}

int build_node(Tree& tree, const std::vector<std::vector<double>>& X, const std::vector<double>& g,
               const std::vector<double>& h, std::vector<int> idx, int depth, const BoostParams& p) {
    double gtot = 0.0, htot = 0.0;
    for (int i : idx) {
        gtot += g[static_cast<std::size_t>(i)];
        htot += h[static_cast<std::size_t>(i)];
    }
    int node_id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back({});
    if (depth < p.max_depth) {
        SplitChoice s = best_split(X, g, h, idx, p);
        if (s.feature >= 0) {
            std::vector<int> li, ri;
            for (int i : idx) {
                if (X[static_cast<std::size_t>(i)][static_cast<std::size_t>(s.feature)] < s.threshold)
                    li.push_back(i);
                else
                    ri.push_back(i);
            }
            tree.nodes[static_cast<std::size_t>(node_id)].feature = s.feature;
            tree.nodes[static_cast<std::size_t>(node_id)].threshold = s.threshold;
            int l = build_node(tree, X, g, h, std::move(li), depth + 1, p);
            int r = build_node(tree, X, g, h, std::move(ri), depth + 1, p);
            tree.nodes[static_cast<std::size_t>(node_id)].left = l;
            tree.nodes[static_cast<std::size_t>(node_id)].right = r;
            return node_id;
        }
    }
    tree.nodes[static_cast<std::size_t>(node_id)].value = -gtot / (htot + p.l2_lambda);
    return node_id;
}

Tree fit_tree(const std::vector<std::vector<double>>& X, const std::vector<double>& g,
              const std::vector<double>& h, const BoostParams& p) {
    Tree tree;
    std::vector<int> idx(X.size());
    std::iota(idx.begin(), idx.end(), 0);
    build_node(tree, X, g, h, std::move(idx), 0, p);
    return tree;
}

void check_inputs(const std::vector<std::vector<double>>& X, std::size_t n_targets) {
    if (X.size() != n_targets || X.size() < 2)
        throw std::invalid_argument("need |X| = |y| >= 2");
    for (const auto& row : X)
        for (double v : row)
            if (!std::isfinite(v)) throw std::invalid_argument("non-finite feature value");
}

} // namespace

TreeEnsemble fit_regression(const std::vector<std::vector<double>>& X, const std::vector<double>& y,
                            const BoostParams& p, FitTrace* trace) {
    check_inputs(X, y.size());
    std::size_t n = X.size();
    TreeEnsemble e;
    e.n_features = static_cast<int>(X[0].size());
    e.n_classes = 1;
    e.shrinkage = p.shrinkage;
    e.base_score = {std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n)};

    std::vector<double> pred(n, e.base_score[0]);
    std::vector<double> g(n), h(n, 1.0);
    for (int round = 0; round < p.n_rounds; ++round) {
        for (std::size_t i = 0; i < n; ++i) g[i] = pred[i] - y[i];
        Tree t = fit_tree(X, g, h, p);
        double loss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            pred[i] += p.shrinkage * t.predict(X[i]);
            loss += (pred[i] - y[i]) * (pred[i] - y[i]);
        }
        e.trees.push_back(std::move(t));
        if (trace) trace->loss_per_round.push_back(loss / static_cast<double>(n));
    }
    return e;
}

TreeEnsemble fit_regression(const std::vector<std::vector<double>>& X, const std::vector<double>& y,
                            const BoostParams& p) {
    return fit_regression(X, y, p, nullptr);
}

TreeEnsemble fit_multiclass(const std::vector<std::vector<double>>& X, const std::vector<int>& y,
                            int k, const BoostParams& p, FitTrace* trace) {
    check_inputs(X, y.size());
    if (k < 2) throw std::invalid_argument("need k >= 2 classes");
    std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
    for (int c : y) {
        if (c < 0 || c >= k) throw std::invalid_argument("class id out of range");
        ++counts[static_cast<std::size_t>(c)];
    }
    for (std::size_t c = 0; c < counts.size(); ++c)
        if (counts[c] == 0)
            throw std::invalid_argument("class " + std::to_string(c) + " absent from training data");

    std::size_t n = X.size();
    TreeEnsemble e;
    e.n_features = static_cast<int>(X[0].size());
    e.n_classes = k;
    e.shrinkage = p.shrinkage;
    e.base_score.assign(static_cast<std::size_t>(k), 0.0);

    std::vector<std::vector<double>> scores(n, std::vector<double>(static_cast<std::size_t>(k), 0.0));
    std::vector<std::vector<double>> probs(n, std::vector<double>(static_cast<std::size_t>(k)));
    std::vector<double> g(n), h(n);
    for (int round = 0; round < p.n_rounds; ++round) {
        for (std::size_t i = 0; i < n; ++i) {
            double mx = *std::max_element(scores[i].begin(), scores[i].end());
            double sum = 0.0;
            for (int c = 0; c < k; ++c) {
                probs[i][static_cast<std::size_t>(c)] = std::exp(scores[i][static_cast<std::size_t>(c)] - mx);
                sum += probs[i][static_cast<std::size_t>(c)];
            }
            for (int c = 0; c < k; ++c) probs[i][static_cast<std::size_t>(c)] /= sum;
        }
        for (int c = 0; c < k; ++c) {
            for (std::size_t i = 0; i < n; ++i) {
                double pr = probs[i][static_cast<std::size_t>(c)];
                g[i] = pr - (y[i] == c ? 1.0 : 0.0);
                h[i] = pr * (1.0 - pr);
            }
            Tree t = fit_tree(X, g, h, p);
            for (std::size_t i = 0; i < n; ++i)
                scores[i][static_cast<std::size_t>(c)] += p.shrinkage * t.predict(X[i]);
            e.trees.push_back(std::move(t));
        }
        if (trace) {
            double loss = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                double mx = *std::max_element(scores[i].begin(), scores[i].end());
                double sum = 0.0;
                for (int c = 0; c < k; ++c) sum += std::exp(scores[i][static_cast<std::size_t>(c)] - mx);
                loss += -(scores[i][static_cast<std::size_t>(y[i])] - mx - std::log(sum));
            }
            trace->loss_per_round.push_back(loss / static_cast<double>(n));
        }
    }
    return e;
}

TreeEnsemble fit_multiclass(const std::vector<std::vector<double>>& X, const std::vector<int>& y,
                            int k, const BoostParams& p) {
    return fit_multiclass(X, y, k, p, nullptr);
}

namespace {

template <typename T>
void put(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T get(std::ifstream& in) {
    T v;
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
}

} // namespace

void save_ensemble(const TreeEnsemble& e, const BoostParams& p, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    nlohmann::json manifest = {
        {"format", "txn-gbt-v1"},
        {"n_features", e.n_features},
        {"n_classes", e.n_classes},
        {"shrinkage", e.shrinkage},
        {"n_trees", e.trees.size()},
        {"base_score", e.base_score},
        {"params",
         {{"n_rounds", p.n_rounds},
          {"max_depth", p.max_depth},
          {"min_child_weight", p.min_child_weight},
          {"shrinkage", p.shrinkage},
          {"l2_lambda", p.l2_lambda}}},
    };
    std::string header = manifest.dump();
    out << header << '\n';
    for (const auto& t : e.trees) {
        put<std::uint64_t>(out, t.nodes.size());
        for (const auto& nd : t.nodes) {
            put<std::int32_t>(out, nd.feature);
            std::uint64_t bits;
            std::memcpy(&bits, &nd.threshold, 8);
            put<std::uint64_t>(out, bits);
            put<std::int32_t>(out, nd.left);
            put<std::int32_t>(out, nd.right);
            std::memcpy(&bits, &nd.value, 8);
            put<std::uint64_t>(out, bits);
        }
    }
}

TreeEnsemble load_ensemble(const std::string& path, BoostParams* params_out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::string header;
    std::getline(in, header);
    auto manifest = nlohmann::json::parse(header);
    if (manifest.value("format", "") != "txn-gbt-v1")
        throw std::runtime_error("not a txn-gbt-v1 file: " + path);
    TreeEnsemble e;
    e.n_features = manifest["n_features"];
    e.n_classes = manifest["n_classes"];
    e.shrinkage = manifest["shrinkage"];
    e.base_score = manifest["base_score"].get<std::vector<double>>();
    if (params_out) {
        const auto& pj = manifest["params"];
        params_out->n_rounds = pj["n_rounds"];
        params_out->max_depth = pj["max_depth"];
        params_out->min_child_weight = pj["min_child_weight"];
        params_out->shrinkage = pj["shrinkage"];
        params_out->l2_lambda = pj["l2_lambda"];
    }
    std::size_t n_trees = manifest["n_trees"];
    e.trees.resize(n_trees);
    for (auto& t : e.trees) {
        std::uint64_t n_nodes = get<std::uint64_t>(in);
        t.nodes.resize(n_nodes);
        for (auto& nd : t.nodes) {
            nd.feature = get<std::int32_t>(in);
            std::uint64_t bits = get<std::uint64_t>(in);
            std::memcpy(&nd.threshold, &bits, 8);
            nd.left = get<std::int32_t>(in);
            nd.right = get<std::int32_t>(in);
            bits = get<std::uint64_t>(in);
            std::memcpy(&nd.value, &bits, 8);
        }
        if (!in) throw std::runtime_error("truncated ensemble file: " + path);
    }
    return e;
}

} // namespace txn::gbt
