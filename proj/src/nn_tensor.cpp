#include "txn/nn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>

namespace txn::nn {

Tensor::Tensor(std::vector<int> s) : shape(std::move(s)) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    v.assign(n, 0.0);
    g.assign(n, 0.0);
}

Tensor* Graph::make(std::vector<int> shape) {
    arena_.emplace_back(std::move(shape));
    return &arena_.back();
}

void Graph::backward(Tensor* loss) {
    if (loss->size() != 1) throw std::invalid_argument("backward needs a scalar loss");
    loss->g[0] = 1.0;
    for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) (*it)();
}

void Graph::reset() {
    arena_.clear();
    tape_.clear();
}

Tensor* constant(Graph& g, std::vector<int> shape, const std::vector<double>& values) {
    Tensor* out = g.make(std::move(shape));
    if (out->size() != values.size()) throw std::invalid_argument("constant: size mismatch");
    out->v = values;
    return out;
}

Tensor* gather_rows(Graph& g, Tensor* table, const std::vector<int>& idx) {
    int d = table->cols();
    Tensor* out = g.make({static_cast<int>(idx.size()), d});
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const double* src = table->v.data() + static_cast<std::size_t>(idx[i]) * static_cast<std::size_t>(d);
        std::copy(src, src + d, out->v.data() + i * static_cast<std::size_t>(d));
    }
    g.record([table, out, idx, d]() {
        for (std::size_t i = 0; i < idx.size(); ++i) {
            double* dst = table->g.data() + static_cast<std::size_t>(idx[i]) * static_cast<std::size_t>(d);
            const double* src = out->g.data() + i * static_cast<std::size_t>(d);
            for (int c = 0; c < d; ++c) dst[c] += src[c];
        }
    });
    return out;
}

Tensor* concat_cols(Graph& g, const std::vector<Tensor*>& parts) {
    int n = parts[0]->rows();
    int total = 0;
    for (Tensor* p : parts) {
        if (p->rows() != n) throw std::invalid_argument("concat_cols: row mismatch");
        total += p->cols();
    }
    Tensor* out = g.make({n, total});
    int off = 0;
    for (Tensor* p : parts) {
        int c = p->cols();
        for (int r = 0; r < n; ++r)
            std::copy(p->v.data() + static_cast<std::size_t>(r) * c,
                      p->v.data() + static_cast<std::size_t>(r + 1) * c,
                      out->v.data() + static_cast<std::size_t>(r) * total + off);
        off += c;
    }
    g.record([parts, out, n, total]() {
        int off2 = 0;
        for (Tensor* p : parts) {
            int c = p->cols();
            for (int r = 0; r < n; ++r) {
                const double* src = out->g.data() + static_cast<std::size_t>(r) * total + off2;
                double* dst = p->g.data() + static_cast<std::size_t>(r) * c;
                for (int i = 0; i < c; ++i) dst[i] += src[i];
            }
            off2 += c;
        }
    });
    return out;
}

Tensor* concat_vec(Graph& g, Tensor* a, Tensor* b) {
    int na = static_cast<int>(a->size()), nb = static_cast<int>(b->size());
    Tensor* out = g.make({na + nb});
    std::copy(a->v.begin(), a->v.end(), out->v.begin());
    std::copy(b->v.begin(), b->v.end(), out->v.begin() + na);
    g.record([a, b, out, na, nb]() {
        for (int i = 0; i < na; ++i) a->g[static_cast<std::size_t>(i)] += out->g[static_cast<std::size_t>(i)];
        for (int i = 0; i < nb; ++i)
            b->g[static_cast<std::size_t>(i)] += out->g[static_cast<std::size_t>(na + i)];
    });
    return out;
}

Tensor* slice_vec(Graph& g, Tensor* x, int start, int len) {
    Tensor* out = g.make({len});
    std::copy(x->v.begin() + start, x->v.begin() + start + len, out->v.begin());
    g.record([x, out, start, len]() {
        for (int i = 0; i < len; ++i)
            x->g[static_cast<std::size_t>(start + i)] += out->g[static_cast<std::size_t>(i)];
    });
    return out;
}

Tensor* row_vec(Graph& g, Tensor* x, int t) {
    int c = x->cols();
    Tensor* out = g.make({c});
    std::copy(x->v.begin() + static_cast<std::size_t>(t) * c,
              x->v.begin() + static_cast<std::size_t>(t + 1) * c, out->v.begin());
    g.record([x, out, t, c]() {
        double* dst = x->g.data() + static_cast<std::size_t>(t) * c;
        for (int i = 0; i < c; ++i) dst[i] += out->g[static_cast<std::size_t>(i)];
    });
    return out;
}

Tensor* add(Graph& g, Tensor* a, Tensor* b) {
    if (a->size() != b->size()) throw std::invalid_argument("add: size mismatch");
    Tensor* out = g.make(a->shape);
    for (std::size_t i = 0; i < a->size(); ++i) out->v[i] = a->v[i] + b->v[i];
    g.record([a, b, out]() {
        for (std::size_t i = 0; i < out->size(); ++i) {
            a->g[i] += out->g[i];
            b->g[i] += out->g[i];
        }
    });
    return out;
}

Tensor* mul(Graph& g, Tensor* a, Tensor* b) {
    if (a->size() != b->size()) throw std::invalid_argument("mul: size mismatch");
    Tensor* out = g.make(a->shape);
    for (std::size_t i = 0; i < a->size(); ++i) out->v[i] = a->v[i] * b->v[i];
    g.record([a, b, out]() {
        for (std::size_t i = 0; i < out->size(); ++i) {
            a->g[i] += out->g[i] * b->v[i];
            b->g[i] += out->g[i] * a->v[i];
        }
    });
    return out;
}

Tensor* relu(Graph& g, Tensor* x) {
    Tensor* out = g.make(x->shape);
    for (std::size_t i = 0; i < x->size(); ++i) out->v[i] = x->v[i] > 0.0 ? x->v[i] : 0.0;
    g.record([x, out]() {
        for (std::size_t i = 0; i < out->size(); ++i)
            if (x->v[i] > 0.0) x->g[i] += out->g[i];
    });
    return out;
}

Tensor* sigmoid(Graph& g, Tensor* x) {
    Tensor* out = g.make(x->shape);
    for (std::size_t i = 0; i < x->size(); ++i) out->v[i] = 1.0 / (1.0 + std::exp(-x->v[i]));
    g.record([x, out]() {
        for (std::size_t i = 0; i < out->size(); ++i)
            x->g[i] += out->g[i] * out->v[i] * (1.0 - out->v[i]);
    });
    return out;
}

Tensor* tanh_op(Graph& g, Tensor* x) {
    Tensor* out = g.make(x->shape);
    for (std::size_t i = 0; i < x->size(); ++i) out->v[i] = std::tanh(x->v[i]);
    g.record([x, out]() {
        for (std::size_t i = 0; i < out->size(); ++i)
            x->g[i] += out->g[i] * (1.0 - out->v[i] * out->v[i]);
    });
    return out;
}

Tensor* scalar_mul(Graph& g, Tensor* x, double c) {
    Tensor* out = g.make(x->shape);
    for (std::size_t i = 0; i < x->size(); ++i) out->v[i] = x->v[i] * c;
    g.record([x, out, c]() {
        for (std::size_t i = 0; i < out->size(); ++i) x->g[i] += out->g[i] * c;
    });
    return out;
}

Tensor* linear(Graph& g, Tensor* W, Tensor* x, Tensor* b) {
    int m = W->rows(), n = W->cols();
    if (static_cast<int>(x->size()) != n) throw std::invalid_argument("linear: dim mismatch");
    Tensor* out = g.make({m});
    for (int i = 0; i < m; ++i) {
        const double* wrow = W->v.data() + static_cast<std::size_t>(i) * n;
        double s = b ? b->v[static_cast<std::size_t>(i)] : 0.0;
        for (int j = 0; j < n; ++j) s += wrow[j] * x->v[static_cast<std::size_t>(j)];
        out->v[static_cast<std::size_t>(i)] = s;
    }
    g.record([W, x, b, out, m, n]() {
        for (int i = 0; i < m; ++i) {
            double go = out->g[static_cast<std::size_t>(i)];
            if (go == 0.0) continue;
            const double* wrow = W->v.data() + static_cast<std::size_t>(i) * n;
            double* wgrow = W->g.data() + static_cast<std::size_t>(i) * n;
            for (int j = 0; j < n; ++j) {
                wgrow[j] += go * x->v[static_cast<std::size_t>(j)];
                x->g[static_cast<std::size_t>(j)] += go * wrow[j];
            }
            if (b) b->g[static_cast<std::size_t>(i)] += go;
        }
    });
    return out;
}

Tensor* conv1d_same(Graph& g, Tensor* X, Tensor* W, Tensor* b, int kernel) {
    int n = X->rows(), cin = X->cols();
    int cout = W->shape[0];
    if (W->shape.size() != 3 || W->shape[1] != kernel || W->shape[2] != cin)
        throw std::invalid_argument("conv1d_same: weight shape mismatch");
    if (n < kernel) throw std::invalid_argument("conv1d_same: sequence shorter than kernel");
    int half = kernel / 2;
    Tensor* out = g.make({n, cout});
    for (int t = 0; t < n; ++t) {
        double* orow = out->v.data() + static_cast<std::size_t>(t) * cout;
        for (int co = 0; co < cout; ++co) {
            const double* wbase =
                W->v.data() + static_cast<std::size_t>(co) * kernel * cin;
            double s = b ? b->v[static_cast<std::size_t>(co)] : 0.0;
            for (int k = 0; k < kernel; ++k) {
                int src = t + k - half;
                if (src < 0 || src >= n) continue;
                const double* xrow = X->v.data() + static_cast<std::size_t>(src) * cin;
                const double* wk = wbase + static_cast<std::size_t>(k) * cin;
                for (int ci = 0; ci < cin; ++ci) s += wk[ci] * xrow[ci];
            }
            orow[co] = s;
        }
    }
    g.record([X, W, b, out, n, cin, cout, kernel, half]() {
        for (int t = 0; t < n; ++t) {
            const double* grow = out->g.data() + static_cast<std::size_t>(t) * cout;
            for (int co = 0; co < cout; ++co) {
                double go = grow[co];
                if (go == 0.0) continue;
                const double* wbase = W->v.data() + static_cast<std::size_t>(co) * kernel * cin;
                double* wgbase = W->g.data() + static_cast<std::size_t>(co) * kernel * cin;
                for (int k = 0; k < kernel; ++k) {
                    int src = t + k - half;
                    if (src < 0 || src >= n) continue;
                    const double* xrow = X->v.data() + static_cast<std::size_t>(src) * cin;
                    double* xgrow = X->g.data() + static_cast<std::size_t>(src) * cin;
                    const double* wk = wbase + static_cast<std::size_t>(k) * cin;
                    double* wgk = wgbase + static_cast<std::size_t>(k) * cin;
                    for (int ci = 0; ci < cin; ++ci) {
                        wgk[ci] += go * xrow[ci];
                        xgrow[ci] += go * wk[ci];
                    }
                }
                if (b) b->g[static_cast<std::size_t>(co)] += go;
            }
        }
    });
    return out;
}

Tensor* maxpool1d(Graph& g, Tensor* X, int width) {
    int n = X->rows(), c = X->cols();
    int m = (n + width - 1) / width;
    Tensor* out = g.make({m, c});
    auto argmax = std::make_shared<std::vector<int>>(static_cast<std::size_t>(m) * c);
    for (int w = 0; w < m; ++w) {
        int lo = w * width, hi = std::min(n, lo + width);
        for (int j = 0; j < c; ++j) {
            int best = lo;
            double bv = X->v[static_cast<std::size_t>(lo) * c + j];
            for (int t = lo + 1; t < hi; ++t) {
                double v = X->v[static_cast<std::size_t>(t) * c + j];
                if (v > bv) {
                    bv = v;
                    best = t;
                }
            }
            out->v[static_cast<std::size_t>(w) * c + j] = bv;
            (*argmax)[static_cast<std::size_t>(w) * c + j] = best;
        }
    }
    g.record([X, out, argmax, m, c]() {
        for (int w = 0; w < m; ++w)
            for (int j = 0; j < c; ++j)
                X->g[static_cast<std::size_t>((*argmax)[static_cast<std::size_t>(w) * c + j]) * c + j] +=
                    out->g[static_cast<std::size_t>(w) * c + j];
    });
    return out;
}

Tensor* mean_rows(Graph& g, Tensor* X) {
    int n = X->rows(), c = X->cols();
    Tensor* out = g.make({c});
    for (int t = 0; t < n; ++t)
        for (int j = 0; j < c; ++j)
            out->v[static_cast<std::size_t>(j)] += X->v[static_cast<std::size_t>(t) * c + j];
    for (int j = 0; j < c; ++j) out->v[static_cast<std::size_t>(j)] /= n;
    g.record([X, out, n, c]() {
        for (int t = 0; t < n; ++t)
            for (int j = 0; j < c; ++j)
                X->g[static_cast<std::size_t>(t) * c + j] += out->g[static_cast<std::size_t>(j)] / n;
    });
    return out;
}

std::vector<double> softmax(const std::vector<double>& logits) {
    std::vector<double> p(logits);
    double mx = *std::max_element(p.begin(), p.end());
    double sum = 0.0;
    for (auto& v : p) {
        v = std::exp(v - mx);
        sum += v;
    }
    for (auto& v : p) v /= sum;
    return p;
}

Tensor* softmax_cross_entropy(Graph& g, Tensor* logits, int label) {
    int k = static_cast<int>(logits->size());
    if (k < 2) throw std::invalid_argument("cross entropy needs k >= 2");
    if (label < 0 || label >= k) throw std::invalid_argument("label out of range");
    auto probs = std::make_shared<std::vector<double>>(softmax(logits->v));
    Tensor* out = g.make({1});
    out->v[0] = -std::log(std::max((*probs)[static_cast<std::size_t>(label)], 1e-300));
    g.record([logits, out, probs, label, k]() {
        double go = out->g[0];
        for (int i = 0; i < k; ++i)
            logits->g[static_cast<std::size_t>(i)] +=
                go * ((*probs)[static_cast<std::size_t>(i)] - (i == label ? 1.0 : 0.0));
    });
    return out;
}

Tensor* mse_loss(Graph& g, Tensor* pred, double target) {
    if (pred->size() != 1) throw std::invalid_argument("mse_loss expects a scalar prediction");
    Tensor* out = g.make({1});
    double diff = pred->v[0] - target;
    out->v[0] = diff * diff;
    g.record([pred, out, diff]() { pred->g[0] += out->g[0] * 2.0 * diff; });
    return out;
}

Tensor* triplet_loss(Graph& g, Tensor* a, Tensor* p, Tensor* n, double margin) {
    std::size_t d = a->size();
    if (p->size() != d || n->size() != d) throw std::invalid_argument("triplet: dim mismatch");
    double dp = 0.0, dn = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        double x = a->v[i] - p->v[i];
        dp += x * x;
        double y = a->v[i] - n->v[i];
        dn += y * y;
    }
    Tensor* out = g.make({1});
    double val = dp - dn + margin;
    out->v[0] = val > 0.0 ? val : 0.0;
    bool active = val > 0.0;
    g.record([a, p, n, out, d, active]() {
        if (!active) return;
        double go = out->g[0];
        for (std::size_t i = 0; i < d; ++i) {
            double gp = 2.0 * (a->v[i] - p->v[i]);
            double gn = 2.0 * (a->v[i] - n->v[i]);
            a->g[i] += go * (gp - gn);
            p->g[i] += -go * gp;
            n->g[i] += go * gn;
        }
    });
    return out;
}

Tensor* mean_scalars(Graph& g, const std::vector<Tensor*>& xs) {
    if (xs.empty()) throw std::invalid_argument("mean_scalars: empty");
    Tensor* out = g.make({1});
    for (Tensor* x : xs) out->v[0] += x->v[0];
    out->v[0] /= static_cast<double>(xs.size());
    g.record([xs, out]() {
        double go = out->g[0] / static_cast<double>(xs.size());
        for (Tensor* x : xs) x->g[0] += go;
    });
    return out;
}

} // namespace txn::nn
