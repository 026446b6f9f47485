#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace txn::embed {

// token-index -> dense-vector map; row 0 (OOV) participates like any token
struct EmbeddingTable {
    std::string field;
    int vocab_size = 0;
    int dim = 0;
    std::vector<double> matrix; // row-major, vocab_size x dim

    double* row(int token) { return matrix.data() + static_cast<std::size_t>(token) * static_cast<std::size_t>(dim); }
    const double* row(int token) const {
        return matrix.data() + static_cast<std::size_t>(token) * static_cast<std::size_t>(dim);
    }
};

struct TokenFrequency {
    std::vector<double> p; // simplex over the vocabulary
};

struct SifConfig {
    double a = 1e-3; // smoothing hyperparameter, > 0
};

struct SkipgramConfig {
    int dim = 77;
    int window = 5;
    int negatives = 5;
    int epochs = 5;
    double lr = 0.025; // linearly decayed over training
    std::uint64_t seed = 1;
};

struct SkipgramResult {
    EmbeddingTable table;
    double first_epoch_loss = 0.0;
    double last_epoch_loss = 0.0;
};

// Skip-gram with negative sampling over per-day token sequences. Negative
// distribution is proportional to p(w)^0.75. Single-threaded, deterministic.
SkipgramResult train_skipgram(const std::vector<std::vector<int>>& corpus, int vocab_size,
                              const SkipgramConfig& cfg, const std::string& field = "");

TokenFrequency token_frequency(const std::vector<std::vector<int>>& corpus, int vocab_size);

double sif_weight(double a, double pw);

// (1/|day|) sum_w [a/(a+p(w))] * vec(w)
std::vector<double> sif_day_embedding(const std::vector<int>& day_tokens, const EmbeddingTable& table,
                                      const TokenFrequency& freq, const SifConfig& cfg);

struct RemoveComponentResult {
    std::vector<std::vector<double>> rows;
    std::vector<double> direction; // first right singular vector u
    int iterations = 0;
    bool converged = true;
    bool degenerate_spectrum = false; // top two singular values (near) equal
};

// Removes each row's projection onto the matrix's first right singular vector,
// found by power iteration on the dim x dim Gram matrix (rel tol 1e-9, max
// 1000 iterations).
RemoveComponentResult remove_first_component(const std::vector<std::vector<double>>& day_matrix);

// manifest + raw little-endian 64-bit float array, row-major
void save_table(const EmbeddingTable& t, std::uint64_t seed, const std::string& path);
EmbeddingTable load_table(const std::string& path);

} // namespace txn::embed
