#include "txn/tsne.hpp"

#include "txn/data.hpp"
#include "txn/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace txn::analysis {

namespace {

std::vector<double> pairwise_sq_dists(const std::vector<std::vector<double>>& X) {
    std::size_t n = X.size();
    std::vector<double> D(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            double s = 0.0;
            for (std::size_t c = 0; c < X[i].size(); ++c) {
                double d = X[i][c] - X[j][c];
                s += d * d;
            }
            D[i * n + j] = D[j * n + i] = s;
        }
    return D;
}

// conditional row P_{j|i} for bandwidth beta; returns Shannon entropy in nats
double row_probabilities(const std::vector<double>& D, std::size_t n, std::size_t i, double beta,
                         std::vector<double>& row) {
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        row[j] = j == i ? 0.0 : std::exp(-D[i * n + j] * beta);
        sum += row[j];
    }
    if (sum <= 0.0) return 0.0;
    double h = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        row[j] /= sum;
        if (row[j] > 1e-300) h -= row[j] * std::log(row[j]);
    }
    return h;
}

} // namespace

std::vector<std::vector<double>> tsne_joint_probabilities(const std::vector<std::vector<double>>& X,
                                                          double perplexity) {
    std::size_t n = X.size();
    if (!(perplexity < (static_cast<double>(n) - 1.0) / 3.0))
        throw std::invalid_argument("perplexity must be < (n-1)/3");
    auto D = pairwise_sq_dists(X);
    double target_h = std::log(perplexity);

    std::vector<std::vector<double>> P(n, std::vector<double>(n, 0.0));
    std::vector<double> row(n);
    for (std::size_t i = 0; i < n; ++i) {
        double beta = 1.0, lo = 0.0, hi = std::numeric_limits<double>::infinity();
        for (int iter = 0; iter < 1000; ++iter) {
            double h = row_probabilities(D, n, i, beta, row);
            if (std::abs(std::exp(h) - perplexity) < 1e-6) break;
            if (h > target_h) { // entropy too high -> sharpen
                lo = beta;
                beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
            } else {
                hi = beta;
                beta = 0.5 * (beta + lo);
            }
        }
        P[i] = row;
    }
    // symmetrize, normalize to a joint distribution
    double scale = 1.0 / (2.0 * static_cast<double>(n));
    std::vector<std::vector<double>> J(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) J[i][j] = (P[i][j] + P[j][i]) * scale;
    return J;
}

TsneResult tsne(const std::vector<std::vector<double>>& X, const TsneConfig& cfg) {
    std::size_t n = X.size();
    if (n < 10) throw std::invalid_argument("tsne: need n >= 10");
    auto P = tsne_joint_probabilities(X, cfg.perplexity);

    Rng rng = Rng::substream(cfg.seed, {0x75EULL});
    std::vector<std::vector<double>> Y(n, std::vector<double>(2));
    for (auto& y : Y)
        for (auto& c : y) c = rng.normal() * 1e-4;

    std::vector<std::vector<double>> dY(n, std::vector<double>(2, 0.0));
    std::vector<std::vector<double>> vel(n, std::vector<double>(2, 0.0));
    std::vector<std::vector<double>> gains(n, std::vector<double>(2, 1.0));
    std::vector<double> Q(n * n, 0.0);

    TsneResult res;
    const double pmin = 1e-12;
    for (int iter = 0; iter < cfg.iterations; ++iter) {
        double exag = iter < cfg.exaggeration_iters ? cfg.early_exaggeration : 1.0;
        // low-dimensional affinities (Student-t, dof 1)
        double qsum = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) {
                double dx = Y[i][0] - Y[j][0], dy = Y[i][1] - Y[j][1];
                double w = 1.0 / (1.0 + dx * dx + dy * dy);
                Q[i * n + j] = Q[j * n + i] = w;
                qsum += 2.0 * w;
            }
        for (std::size_t i = 0; i < n; ++i) {
            dY[i][0] = dY[i][1] = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                if (i == j) continue;
                double w = Q[i * n + j];
                double coeff = 4.0 * (exag * P[i][j] - w / qsum) * w;
                dY[i][0] += coeff * (Y[i][0] - Y[j][0]);
                dY[i][1] += coeff * (Y[i][1] - Y[j][1]);
            }
        }
        double momentum = iter < cfg.exaggeration_iters ? 0.5 : 0.8;
        for (std::size_t i = 0; i < n; ++i)
            for (int c = 0; c < 2; ++c) {
                bool same_sign = (dY[i][static_cast<std::size_t>(c)] > 0.0) ==
                                 (vel[i][static_cast<std::size_t>(c)] > 0.0);
                gains[i][static_cast<std::size_t>(c)] =
                    std::max(0.01, same_sign ? gains[i][static_cast<std::size_t>(c)] * 0.8
                                             : gains[i][static_cast<std::size_t>(c)] + 0.2);
                vel[i][static_cast<std::size_t>(c)] =
                    momentum * vel[i][static_cast<std::size_t>(c)] -
                    cfg.learning_rate * gains[i][static_cast<std::size_t>(c)] *
                        dY[i][static_cast<std::size_t>(c)];
                Y[i][static_cast<std::size_t>(c)] += vel[i][static_cast<std::size_t>(c)];
            }
        // recenter
        double mx = 0.0, my = 0.0;
        for (const auto& y : Y) {
            mx += y[0];
            my += y[1];
        }
        mx /= static_cast<double>(n);
        my /= static_cast<double>(n);
        for (auto& y : Y) {
            y[0] -= mx;
            y[1] -= my;
        }

        if ((iter + 1) % 50 == 0 || iter + 1 == cfg.iterations) {
            double kl = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    if (i == j || P[i][j] <= pmin) continue;
                    kl += P[i][j] * std::log(P[i][j] / std::max(Q[i * n + j] / qsum, pmin));
                }
            res.kl_trace.push_back(kl);
            res.final_kl = kl;
        }
    }
    res.Y = std::move(Y);
    return res;
}

void write_tsne_csv(const TsneResult& r, const std::vector<std::int64_t>& day_index,
                    const std::vector<int>& labels, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "day_index,x,y,label\n";
    for (std::size_t i = 0; i < r.Y.size(); ++i)
        out << day_index[i] << ',' << format_double(r.Y[i][0]) << ',' << format_double(r.Y[i][1])
            << ',' << labels[i] << '\n';
}

void write_tsne_svg(const TsneResult& r, const std::vector<int>& labels, const std::string& path) {
    static const char* palette[7] = {"#e41a1c", "#377eb8", "#4daf4a", "#984ea3",
                                     "#ff7f00", "#a65628", "#f781bf"};
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& y : r.Y) {
        xmin = std::min(xmin, y[0]);
        xmax = std::max(xmax, y[0]);
        ymin = std::min(ymin, y[1]);
        ymax = std::max(ymax, y[1]);
    }
    double sx = xmax > xmin ? 760.0 / (xmax - xmin) : 1.0;
    double sy = ymax > ymin ? 760.0 / (ymax - ymin) : 1.0;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"800\" "
           "viewBox=\"0 0 800 800\">\n";
    out << "<rect width=\"800\" height=\"800\" fill=\"white\"/>\n";
    for (std::size_t i = 0; i < r.Y.size(); ++i) {
        double px = 20.0 + (r.Y[i][0] - xmin) * sx;
        double py = 20.0 + (r.Y[i][1] - ymin) * sy;
        const char* color = palette[static_cast<std::size_t>(labels[i] % 7)];
        out << "<circle cx=\"" << format_double(px) << "\" cy=\"" << format_double(py)
            << "\" r=\"4\" fill=\"" << color << "\"/>\n";
    }
    out << "</svg>\n";
}

} // namespace txn::analysis
