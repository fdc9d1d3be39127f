#include "pointfuse/forest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "pointfuse/errors.hpp"

namespace pointfuse::ml {

namespace {

struct BuildContext {
    const nn::Tensor& x;
    const std::vector<double>& targets;
    int target_dim;
    SplitCriterion criterion;
    const ForestConfig& cfg;
    int mtry;
    Rng& rng;
};

std::vector<double> leaf_value(const BuildContext& ctx, const std::vector<int>& idx) {
    std::vector<double> v(static_cast<std::size_t>(ctx.target_dim), 0.0);
    if (ctx.criterion == SplitCriterion::variance) {
        for (const int i : idx)
            for (int d = 0; d < ctx.target_dim; ++d)
                v[static_cast<std::size_t>(d)] +=
                    ctx.targets[static_cast<std::size_t>(i) * ctx.target_dim + d];
        for (double& e : v) e /= static_cast<double>(idx.size());
    } else {
        for (const int i : idx)
            v[static_cast<std::size_t>(ctx.targets[static_cast<std::size_t>(i)])] += 1.0;
        for (double& e : v) e /= static_cast<double>(idx.size());
    }
    return v;
}

// node impurity * n: summed per-dim SSE, or n * gini
double impurity_times_n(const BuildContext& ctx, const std::vector<int>& idx) {
    const double n = static_cast<double>(idx.size());
    if (ctx.criterion == SplitCriterion::variance) {
        double total = 0.0;
        for (int d = 0; d < ctx.target_dim; ++d) {
            double s = 0.0, ss = 0.0;
            for (const int i : idx) {
                const double y = ctx.targets[static_cast<std::size_t>(i) * ctx.target_dim + d];
                s += y;
                ss += y * y;
            }
            total += ss - s * s / n;
        }
        return total;
    }
    std::vector<double> counts(static_cast<std::size_t>(ctx.target_dim), 0.0);
    for (const int i : idx) counts[static_cast<std::size_t>(ctx.targets[static_cast<std::size_t>(i)])] += 1.0;
    double sumsq = 0.0;
    for (const double c : counts) sumsq += c * c;
    return n - sumsq / n; // n * (1 - sum (c/n)^2)
}

struct BestSplit {
    int feature = -1;
    double threshold = 0.0;
    double score = std::numeric_limits<double>::infinity(); // child impurity sum
};

BestSplit find_split(const BuildContext& ctx, const std::vector<int>& idx,
                     const std::vector<int>& features) {
    const std::size_t n = idx.size();
    const int min_leaf = std::max(1, ctx.cfg.min_samples_leaf);
    BestSplit best;

    std::vector<std::pair<double, int>> order(n);
    const int k = ctx.target_dim;
    std::vector<double> left_sum(static_cast<std::size_t>(k));
    std::vector<double> left_sumsq(static_cast<std::size_t>(k));
    std::vector<double> total_sum(static_cast<std::size_t>(k));
    std::vector<double> total_sumsq(static_cast<std::size_t>(k));
    std::vector<double> left_count, total_count;
    if (ctx.criterion == SplitCriterion::gini) {
        left_count.assign(static_cast<std::size_t>(k), 0.0);
        total_count.assign(static_cast<std::size_t>(k), 0.0);
    }

    for (const int f : features) {
        for (std::size_t r = 0; r < n; ++r)
            order[r] = {ctx.x.at(idx[r], f), idx[r]};
        std::sort(order.begin(), order.end());
        if (order.front().first == order.back().first) continue;

        if (ctx.criterion == SplitCriterion::variance) {
            std::fill(left_sum.begin(), left_sum.end(), 0.0);
            std::fill(left_sumsq.begin(), left_sumsq.end(), 0.0);
            std::fill(total_sum.begin(), total_sum.end(), 0.0);
            std::fill(total_sumsq.begin(), total_sumsq.end(), 0.0);
            for (std::size_t r = 0; r < n; ++r)
                for (int d = 0; d < k; ++d) {
                    const double y =
                        ctx.targets[static_cast<std::size_t>(order[r].second) * k + d];
                    total_sum[static_cast<std::size_t>(d)] += y;
                    total_sumsq[static_cast<std::size_t>(d)] += y * y;
                }
            for (std::size_t r = 0; r + 1 < n; ++r) {
                for (int d = 0; d < k; ++d) {
                    const double y =
                        ctx.targets[static_cast<std::size_t>(order[r].second) * k + d];
                    left_sum[static_cast<std::size_t>(d)] += y;
                    left_sumsq[static_cast<std::size_t>(d)] += y * y;
                }
                const std::size_t nl = r + 1, nr = n - nl;
                if (nl < static_cast<std::size_t>(min_leaf)
                    || nr < static_cast<std::size_t>(min_leaf))
                    continue;
                if (order[r].first == order[r + 1].first) continue;
                double score = 0.0;
                for (int d = 0; d < k; ++d) {
                    const double ls = left_sum[static_cast<std::size_t>(d)];
                    const double lss = left_sumsq[static_cast<std::size_t>(d)];
                    const double rs = total_sum[static_cast<std::size_t>(d)] - ls;
                    const double rss = total_sumsq[static_cast<std::size_t>(d)] - lss;
                    score += lss - ls * ls / static_cast<double>(nl);
                    score += rss - rs * rs / static_cast<double>(nr);
                }
                if (score < best.score) {
                    best.score = score;
                    best.feature = f;
                    best.threshold = 0.5 * (order[r].first + order[r + 1].first);
                }
            }
        } else {
            std::fill(left_count.begin(), left_count.end(), 0.0);
            std::fill(total_count.begin(), total_count.end(), 0.0);
            for (std::size_t r = 0; r < n; ++r)
                total_count[static_cast<std::size_t>(
                    ctx.targets[static_cast<std::size_t>(order[r].second)])] += 1.0;
            for (std::size_t r = 0; r + 1 < n; ++r) {
                left_count[static_cast<std::size_t>(
                    ctx.targets[static_cast<std::size_t>(order[r].second)])] += 1.0;
                const std::size_t nl = r + 1, nr = n - nl;
                if (nl < static_cast<std::size_t>(min_leaf)
                    || nr < static_cast<std::size_t>(min_leaf))
                    continue;
                if (order[r].first == order[r + 1].first) continue;
                double lsq = 0.0, rsq = 0.0;
                for (int c = 0; c < k; ++c) {
                    const double lc = left_count[static_cast<std::size_t>(c)];
                    const double rc = total_count[static_cast<std::size_t>(c)] - lc;
                    lsq += lc * lc;
                    rsq += rc * rc;
                }
                const double score = (static_cast<double>(nl) - lsq / static_cast<double>(nl))
                                     + (static_cast<double>(nr) - rsq / static_cast<double>(nr));
                if (score < best.score) {
                    best.score = score;
                    best.feature = f;
                    best.threshold = 0.5 * (order[r].first + order[r + 1].first);
                }
            }
        }
    }
    return best;
}

} // namespace

void DecisionTree::fit(const nn::Tensor& x, const std::vector<double>& targets, int target_dim,
                       SplitCriterion criterion, const ForestConfig& cfg,
                       const std::vector<int>& sample_indices, Rng& rng) {
    if (x.rank() != 2) throw ShapeError("tree fit: expected [n,p]");
    const int p = x.dim(1);
    const int mtry = cfg.mtry > 0
                         ? std::min(cfg.mtry, p)
                         : std::max(1, static_cast<int>(std::sqrt(static_cast<double>(p))));
    BuildContext ctx{x, targets, target_dim, criterion, cfg, mtry, rng};
    nodes_.clear();

    std::vector<int> all_features(static_cast<std::size_t>(p));
    std::iota(all_features.begin(), all_features.end(), 0);

    struct Work {
        std::vector<int> idx;
        int node;
        int depth;
    };
    nodes_.emplace_back();
    std::vector<Work> stack{{sample_indices, 0, 0}};

    while (!stack.empty()) {
        Work w = std::move(stack.back());
        stack.pop_back();
        TreeNode& node = nodes_[static_cast<std::size_t>(w.node)];

        const bool depth_capped = cfg.max_depth > 0 && w.depth >= cfg.max_depth;
        const bool too_small = w.idx.size() < 2 * static_cast<std::size_t>(
                                   std::max(1, cfg.min_samples_leaf));
        if (depth_capped || too_small || impurity_times_n(ctx, w.idx) <= 1e-12) {
            node.value = leaf_value(ctx, w.idx);
            continue;
        }

        // feature subsample: partial Fisher-Yates over the feature list
        std::vector<int> features = all_features;
        for (int i = 0; i < mtry; ++i) {
            const std::size_t j =
                i + static_cast<std::size_t>(ctx.rng.uniform_index(features.size() - i));
            std::swap(features[static_cast<std::size_t>(i)], features[j]);
        }
        features.resize(static_cast<std::size_t>(mtry));

        const BestSplit split = find_split(ctx, w.idx, features);
        if (split.feature < 0) {
            node.value = leaf_value(ctx, w.idx);
            continue;
        }

        std::vector<int> left, right;
        for (const int i : w.idx)
            (ctx.x.at(i, split.feature) <= split.threshold ? left : right).push_back(i);
        if (left.empty() || right.empty()) {
            node.value = leaf_value(ctx, w.idx);
            continue;
        }

        node.feature = split.feature;
        node.threshold = split.threshold;
        node.left = static_cast<int>(nodes_.size());
        node.right = node.left + 1;
        const int left_id = node.left, right_id = node.right;
        nodes_.emplace_back();
        nodes_.emplace_back();
        stack.push_back({std::move(right), right_id, w.depth + 1});
        stack.push_back({std::move(left), left_id, w.depth + 1});
    }
}

const std::vector<double>& DecisionTree::predict(const double* x) const {
    int i = 0;
    while (nodes_[static_cast<std::size_t>(i)].feature >= 0) {
        const TreeNode& n = nodes_[static_cast<std::size_t>(i)];
        i = x[n.feature] <= n.threshold ? n.left : n.right;
    }
    return nodes_[static_cast<std::size_t>(i)].value;
}

void RandomForest::fit(const nn::Tensor& x, const std::vector<double>& targets, int target_dim,
                       SplitCriterion criterion, const ForestConfig& cfg, std::uint64_t seed) {
    const int n = x.dim(0);
    if (n == 0) throw ShapeError("forest fit: empty training set");
    out_dim_ = target_dim;
    trees_.assign(static_cast<std::size_t>(cfg.n_trees), {});
    const Rng base = Rng(seed).split("forest");
    for (int t = 0; t < cfg.n_trees; ++t) {
        Rng rng = base.split(static_cast<std::uint64_t>(t));
        std::vector<int> boot(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i)
            boot[static_cast<std::size_t>(i)] =
                static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(n)));
        trees_[static_cast<std::size_t>(t)].fit(x, targets, target_dim, criterion, cfg, boot,
                                                rng);
    }
}

void RandomForest::fit_regression(const nn::Tensor& x, const std::vector<double>& targets,
                                  int out_dim, const ForestConfig& cfg, std::uint64_t seed) {
    fit(x, targets, out_dim, SplitCriterion::variance, cfg, seed);
}

void RandomForest::fit_classification(const nn::Tensor& x, const std::vector<int>& labels,
                                      int n_classes, const ForestConfig& cfg,
                                      std::uint64_t seed) {
    std::vector<double> t(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= n_classes)
            throw DomainError("forest label out of range");
        t[i] = static_cast<double>(labels[i]);
    }
    fit(x, t, n_classes, SplitCriterion::gini, cfg, seed);
}

std::vector<double> RandomForest::predict(const double* x) const {
    std::vector<double> out(static_cast<std::size_t>(out_dim_), 0.0);
    for (const DecisionTree& tree : trees_) {
        const std::vector<double>& v = tree.predict(x);
        for (int d = 0; d < out_dim_; ++d) out[static_cast<std::size_t>(d)] += v[static_cast<std::size_t>(d)];
    }
    for (double& v : out) v /= static_cast<double>(trees_.size());
    return out;
}

void RandomForest::restore(std::vector<DecisionTree> trees, int out_dim) {
    trees_ = std::move(trees);
    out_dim_ = out_dim;
}

} // namespace pointfuse::ml
