#pragma once

#include "txn/trainer.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace txn::analysis {

struct Partition {
    std::vector<int> labels; // cluster ids in {0..C-1}
    int n_clusters = 0;

    std::size_t size() const { return labels.size(); }
    static Partition from_labels(std::vector<int> labels);
};

struct KmeansResult {
    Partition partition;
    std::vector<std::vector<double>> centers;
    double inertia = 0.0;
    std::vector<double> inertia_trace; // per Lloyd iteration of the winning restart
};

// k-means++ init, Lloyd to assignment fixpoint (max 300 iterations), best
// inertia over restarts. Empty clusters are re-seeded from the farthest point.
KmeansResult kmeans(const std::vector<std::vector<double>>& X, int k, int restarts,
                    std::uint64_t seed);

double entropy(const Partition& u);                       // nats
double mutual_information(const Partition& u, const Partition& v);
double expected_mi(const Partition& u, const Partition& v); // fixed-marginals hypergeometric model
// (MI - E[MI]) / (max{H(U),H(V)} - E[MI]); degenerate denominator -> 1 if the
// partitions are identical else 0.
double ami(const Partition& u, const Partition& v);

struct StabilityResult {
    double mean_ami = 0.0;
    std::vector<std::vector<double>> pair_matrix; // runs x runs, diag 1
    std::vector<Partition> partitions;
    int completed_runs = 0;
    std::vector<std::string> failures;
};

// Trains `runs` independent models with fresh seeds, k-means the validation-day
// embeddings of each, and averages AMI over all pairs. Runs execute in
// parallel worker threads. Failed runs are reported and skipped.
StabilityResult stability_protocol(const Dataset& train_ds, const Dataset& val_ds,
                                   const TrainConfig& cfg, int runs = 10, int k = 7, int jobs = 0);

// Mean-embedding vectors for every day of a dataset on a frozen model.
std::vector<std::vector<double>> day_embeddings(nn::SequenceModel& model, const Dataset& ds,
                                                std::size_t window_len, std::size_t k,
                                                std::uint64_t seed);

void write_ami_matrix(const StabilityResult& r, const std::string& path);

} // namespace txn::analysis
