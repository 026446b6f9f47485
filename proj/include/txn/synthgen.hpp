#pragma once

#include "txn/data.hpp"

#include <cstdint>

namespace txn {

// Synthetic datasets with controllable planted signals.
//
// Two signal channels exist in the token stream:
//  - marginal_strength shifts per-class (or per-z) unigram frequencies, which
//    bag-of-token features can see;
//  - motif_strength plants ordered trigger->follower token pairs whose pairing
//    depends on the target while every token's marginal frequency stays
//    target-independent, so only order-aware models can see it.
struct GenConfig {
    std::uint64_t seed = 0;
    int n_days = 0;
    int txns_min = 0;
    int txns_max = 0;
    VocabSizes vocab;
    double marginal_strength = 0.0;
    double motif_strength = 0.0;
    double noise_std = 0.0;
    TaskKind task = TaskKind::classification;
    double ar_coeff = 0.0; // latent AR(1) coefficient, regression task
};

struct TruthPoint {
    std::int64_t day_index;
    double z;
    double label;
};

struct GeneratedData {
    Dataset dataset;
    std::vector<TruthPoint> truth; // regression task only
};

// Day-of-week task: day d's class is d mod 7.
GeneratedData generate_dayofweek(const GenConfig& cfg);

// Default-rate task: latent z_t = ar_coeff*z_{t-1} + eps,
// label_t = logistic(z_t) scaled into [0.01, 0.20].
GeneratedData generate_defaultrate(const GenConfig& cfg);

GeneratedData generate(const GenConfig& cfg);

void write_truth(const std::vector<TruthPoint>& truth, const std::string& path);

// Identity vocabularies ("17" -> 17) covering the generator's index ranges,
// for schema round-trips through the CSV loader.
VocabularySet identity_vocabularies(const VocabSizes& sizes);

} // namespace txn
