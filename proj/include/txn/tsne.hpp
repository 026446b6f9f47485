#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace txn::analysis {

struct TsneConfig {
    double perplexity = 30.0;
    int iterations = 1000;
    double learning_rate = 200.0;
    double early_exaggeration = 12.0; // applied for the first 250 iterations
    int exaggeration_iters = 250;
    std::uint64_t seed = 0;
};

struct TsneResult {
    std::vector<std::vector<double>> Y; // n x 2
    std::vector<double> kl_trace;       // every 50 iterations
    double final_kl = 0.0;
};

// Exact (non-tree) t-SNE. Per-point bandwidths are binary-searched so each
// conditional distribution hits cfg.perplexity within 1e-6.
TsneResult tsne(const std::vector<std::vector<double>>& X, const TsneConfig& cfg);

// Symmetrized joint probabilities (sums to 1) with per-row conditional
// perplexity pinned; exposed for testing.
std::vector<std::vector<double>> tsne_joint_probabilities(const std::vector<std::vector<double>>& X,
                                                          double perplexity);

void write_tsne_csv(const TsneResult& r, const std::vector<std::int64_t>& day_index,
                    const std::vector<int>& labels, const std::string& path);

// 800x800 scatter, points colored by class with a fixed 7-color palette.
void write_tsne_svg(const TsneResult& r, const std::vector<int>& labels, const std::string& path);

} // namespace txn::analysis
