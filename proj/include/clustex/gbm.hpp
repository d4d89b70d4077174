#pragma once

#include "clustex/types.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace clustex {

struct SplitSpec {
    std::vector<Index> train;
    std::vector<Index> test;
    double ratio = 0.7;
    std::uint64_t seed = 0;
};

// Stratified split: per-class counts follow the ratio via largest-remainder
// rounding, clamped so both sides keep at least one member of every class.
SplitSpec train_test_split(const std::vector<int>& y, double ratio, std::uint64_t seed);

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
};

struct RegressionTree {
    std::vector<TreeNode> nodes;  // node 0 is the root

    double predict(const RowVector& x) const {
        int at = 0;
        while (nodes[static_cast<std::size_t>(at)].feature >= 0) {
            const TreeNode& node = nodes[static_cast<std::size_t>(at)];
            at = x(node.feature) <= node.threshold ? node.left : node.right;
        }
        return nodes[static_cast<std::size_t>(at)].value;
    }
};

struct GbmOptions {
    double learning_rate = 1.0;
    int max_depth = 10;
    int n_trees = 100;
    std::uint64_t seed = 0;
    std::string loss = "binomial";  // or "multinomial"
};

struct BoostedModel {
    std::string loss = "binomial";
    int classes = 2;
    double learning_rate = 1.0;
    std::vector<double> initial_scores;  // binomial: one prior log-odds entry
    std::vector<RegressionTree> trees;   // multinomial: class-major within each round
    std::vector<std::string> feature_names;
    std::vector<double> train_deviance;  // mean deviance after each round
    std::uint64_t seed = 0;

    int rounds() const {
        return trees.empty() ? 0 : static_cast<int>(trees.size()) / (loss == "multinomial" ? classes : 1);
    }
};

// Boosted trees on labels 1..K. Binomial deviance for two classes (class 2
// is the positive class), multinomial otherwise; Newton leaf values, exact
// greedy splits over midpoints of adjacent distinct feature values.
BoostedModel fit_gbm(const Matrix& X, const std::vector<int>& y, const GbmOptions& opts,
                     std::vector<std::string> feature_names = {});

// N x K class probabilities, strictly inside (0,1), each row summing to 1.
Matrix predict_proba(const BoostedModel& model, const Matrix& X);

// Probability of class 2 for one sample; the response every explainer uses.
double predict_class2(const BoostedModel& model, const RowVector& x);

std::vector<int> predict_labels(const BoostedModel& model, const Matrix& X);

double accuracy(const BoostedModel& model, const Matrix& X, const std::vector<int>& y);

nlohmann::json model_to_json(const BoostedModel& model);
BoostedModel model_from_json(const nlohmann::json& j);

}  // namespace clustex
