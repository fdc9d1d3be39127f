#pragma once

#include <cstdint>
#include <vector>

#include "pointfuse/rng.hpp"
#include "pointfuse/tensor.hpp"

namespace pointfuse::ml {

struct ForestConfig {
    int n_trees = 100;
    int min_samples_leaf = 2;
    int max_depth = 0; // 0 = unlimited
    int mtry = 0;      // features tried per split; 0 = sqrt(p)
};

enum class SplitCriterion { variance, gini };

struct TreeNode {
    int feature = -1; // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    std::vector<double> value; // leaf output: mean vector or class histogram
};

// CART tree; regression trees are multi-output (summed per-dim variance
// reduction), classification trees use Gini impurity.
class DecisionTree {
public:
    void fit(const nn::Tensor& x, const std::vector<double>& targets, int target_dim,
             SplitCriterion criterion, const ForestConfig& cfg,
             const std::vector<int>& sample_indices, Rng& rng);

    const std::vector<double>& predict(const double* x) const;

    const std::vector<TreeNode>& nodes() const { return nodes_; }
    void restore(std::vector<TreeNode> nodes) { nodes_ = std::move(nodes); }

private:
    std::vector<TreeNode> nodes_;
};

class RandomForest {
public:
    // regression: targets is [n * out_dim] row-major
    void fit_regression(const nn::Tensor& x, const std::vector<double>& targets, int out_dim,
                        const ForestConfig& cfg, std::uint64_t seed);
    // classification: labels in [0, n_classes)
    void fit_classification(const nn::Tensor& x, const std::vector<int>& labels, int n_classes,
                            const ForestConfig& cfg, std::uint64_t seed);

    // mean over trees: out_dim vector (regression) or probability histogram
    std::vector<double> predict(const double* x) const;

    int output_dim() const { return out_dim_; }
    const std::vector<DecisionTree>& trees() const { return trees_; }
    void restore(std::vector<DecisionTree> trees, int out_dim);

private:
    void fit(const nn::Tensor& x, const std::vector<double>& targets, int target_dim,
             SplitCriterion criterion, const ForestConfig& cfg, std::uint64_t seed);

    std::vector<DecisionTree> trees_;
    int out_dim_ = 0;
};

} // namespace pointfuse::ml
