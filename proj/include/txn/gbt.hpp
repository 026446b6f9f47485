#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace txn::gbt {

struct BoostParams {
    int n_rounds = 50;
    int max_depth = 3;
    double min_child_weight = 1.0; // minimum hessian sum per child
    double shrinkage = 0.1;
    double l2_lambda = 1.0;
};

struct TreeNode {
    int feature = -1; // -1: leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
};

struct Tree {
    std::vector<TreeNode> nodes; // pre-order, root at 0
    double predict(std::span<const double> x) const;
};

// prediction = base_score + shrinkage * sum of tree outputs.
// Classification has one tree per class per round, laid out round-major.
struct TreeEnsemble {
    int n_features = 0;
    int n_classes = 1; // 1 = regression
    std::vector<double> base_score;
    std::vector<Tree> trees;
    double shrinkage = 0.1;

    // raw additive scores (length n_classes)
    std::vector<double> score(std::span<const double> x) const;
    // regression value, or softmax probabilities for classification
    std::vector<double> predict(std::span<const double> x) const;
    int predict_class(std::span<const double> x) const;
};

// Second-order boosting with exact greedy splits. Candidate thresholds are
// midpoints between consecutive distinct sorted feature values; ties broken by
// lowest feature index then lowest threshold.
TreeEnsemble fit_regression(const std::vector<std::vector<double>>& X,
                            const std::vector<double>& y, const BoostParams& p);

TreeEnsemble fit_multiclass(const std::vector<std::vector<double>>& X,
                            const std::vector<int>& y, int k, const BoostParams& p);

// Training-loss trace, one entry per completed round (for monotonicity checks).
struct FitTrace {
    std::vector<double> loss_per_round;
};
TreeEnsemble fit_regression(const std::vector<std::vector<double>>& X,
                            const std::vector<double>& y, const BoostParams& p, FitTrace* trace);
TreeEnsemble fit_multiclass(const std::vector<std::vector<double>>& X,
                            const std::vector<int>& y, int k, const BoostParams& p, FitTrace* trace);

void save_ensemble(const TreeEnsemble& e, const BoostParams& p, const std::string& path);
TreeEnsemble load_ensemble(const std::string& path, BoostParams* params_out = nullptr);

} // namespace txn::gbt
