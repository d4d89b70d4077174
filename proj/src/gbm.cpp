#include "clustex/gbm.hpp"

#include "clustex/rng.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

namespace clustex {

namespace {

constexpr double kProbFloor = 1e-15;

double sigmoid(double f) { return 1.0 / (1.0 + std::exp(-f)); }

double clamp_prob(double p) { return std::min(std::max(p, kProbFloor), 1.0 - kProbFloor); }

}  // namespace

SplitSpec train_test_split(const std::vector<int>& y, double ratio, std::uint64_t seed) {
    if (!(ratio > 0.0 && ratio < 1.0))
        throw std::invalid_argument("train_test_split: ratio must be inside (0,1)");
    std::map<int, std::vector<Index>> by_class;
    for (std::size_t i = 0; i < y.size(); ++i)
        by_class[y[i]].push_back(static_cast<Index>(i));
    if (by_class.size() < 2)
        throw std::invalid_argument("train_test_split: need at least 2 classes");
    for (const auto& [label, members] : by_class)
        if (members.size() < 2)
            throw std::invalid_argument("train_test_split: class " + std::to_string(label) +
                                        " has fewer than 2 members");

    // Largest-remainder rounding keeps the total train size at
    // round(ratio * N) while every class stays within one sample of the
    // ratio and keeps a presence on both sides.
    const auto total_train =
        static_cast<std::size_t>(std::llround(ratio * static_cast<double>(y.size())));
    std::vector<std::pair<double, int>> remainders;
    std::map<int, std::size_t> take;
    std::size_t assigned = 0;
    for (const auto& [label, members] : by_class) {
        const double exact = ratio * static_cast<double>(members.size());
        take[label] = static_cast<std::size_t>(std::floor(exact));
        assigned += take[label];
        remainders.emplace_back(exact - std::floor(exact), label);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t r = 0; assigned < total_train && r < remainders.size(); ++r) {
        ++take[remainders[r].second];
        ++assigned;
    }
    for (auto& [label, count] : take) {
        const std::size_t size = by_class[label].size();
        count = std::min(std::max<std::size_t>(count, 1), size - 1);
    }

    SplitSpec split;
    split.ratio = ratio;
    split.seed = seed;
    std::uint64_t counter = 0;
    for (auto& [label, members] : by_class) {
        Rng rng(derive_seed(seed, counter++));
        rng.shuffle(members);
        for (std::size_t i = 0; i < members.size(); ++i)
            (i < take[label] ? split.train : split.test).push_back(members[i]);
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.test.begin(), split.test.end());
    return split;
}

// ---------------------------------------------------------------------------
// Regression tree fitting
// ---------------------------------------------------------------------------

namespace {

struct LeafStats {
    double residual_sum = 0.0;
    double hessian_sum = 0.0;
};

// Grows one tree on the residual vector; `newton_scale` is 1 for binomial
// and (K-1)/K for multinomial leaves.
class TreeBuilder {
  public:
    TreeBuilder(const Matrix& X, const std::vector<Index>& rows, const Vector& residual,
                const Vector& hessian, int max_depth, double newton_scale)
        : X_(X),
          residual_(residual),
          hessian_(hessian),
          max_depth_(max_depth),
          newton_scale_(newton_scale) {
        tree_.nodes.reserve(64);
        grow(rows, 0);
    }

    RegressionTree take() { return std::move(tree_); }

  private:
    int make_leaf(const std::vector<Index>& rows) {
        LeafStats stats;
        for (Index i : rows) {
            stats.residual_sum += residual_(i);
            stats.hessian_sum += hessian_(i);
        }
        TreeNode node;
        node.value = stats.hessian_sum > 1e-150
                         ? newton_scale_ * stats.residual_sum / stats.hessian_sum
                         : 0.0;
        tree_.nodes.push_back(node);
        return static_cast<int>(tree_.nodes.size()) - 1;
    }

    int grow(const std::vector<Index>& rows, int depth) {
        if (depth >= max_depth_ || rows.size() < 2) return make_leaf(rows);
        bool constant = true;
        for (std::size_t i = 1; i < rows.size() && constant; ++i)
            constant = residual_(rows[i]) == residual_(rows[0]);
        if (constant) return make_leaf(rows);

        // Exact greedy split: maximize the variance-reduction surrogate
        // sum_L^2/n_L + sum_R^2/n_R over midpoints of adjacent distinct
        // values, scanning features then thresholds in ascending order so
        // ties keep the first candidate.
        double total = 0.0;
        for (Index i : rows) total += residual_(i);
        const double base = total * total / static_cast<double>(rows.size());

        int best_feature = -1;
        double best_threshold = 0.0;
        double best_gain = 0.0;
        std::vector<std::pair<double, Index>> order(rows.size());
        for (int f = 0; f < X_.cols(); ++f) {
            for (std::size_t i = 0; i < rows.size(); ++i)
                order[i] = {X_(rows[i], f), rows[i]};
            std::sort(order.begin(), order.end());
            double left_sum = 0.0;
            for (std::size_t i = 0; i + 1 < order.size(); ++i) {
                left_sum += residual_(order[i].second);
                if (order[i].first == order[i + 1].first) continue;
                const auto n_left = static_cast<double>(i + 1);
                const auto n_right = static_cast<double>(order.size() - i - 1);
                const double right_sum = total - left_sum;
                const double gain = left_sum * left_sum / n_left +
                                    right_sum * right_sum / n_right - base;
                if (gain > best_gain) {
                    best_gain = gain;
                    best_feature = f;
                    best_threshold = 0.5 * (order[i].first + order[i + 1].first);
                }
            }
        }
        if (best_feature < 0) return make_leaf(rows);

        std::vector<Index> left_rows, right_rows;
        for (Index i : rows)
            (X_(i, best_feature) <= best_threshold ? left_rows : right_rows).push_back(i);

        TreeNode node;
        node.feature = best_feature;
        node.threshold = best_threshold;
        tree_.nodes.push_back(node);
        const int at = static_cast<int>(tree_.nodes.size()) - 1;
        const int left = grow(left_rows, depth + 1);
        const int right = grow(right_rows, depth + 1);
        tree_.nodes[static_cast<std::size_t>(at)].left = left;
        tree_.nodes[static_cast<std::size_t>(at)].right = right;
        return at;
    }

    const Matrix& X_;
    const Vector& residual_;
    const Vector& hessian_;
    const int max_depth_;
    const double newton_scale_;
    RegressionTree tree_;
};

}  // namespace

// ---------------------------------------------------------------------------
// Boosting
// ---------------------------------------------------------------------------

BoostedModel fit_gbm(const Matrix& X, const std::vector<int>& y, const GbmOptions& opts,
                     std::vector<std::string> feature_names) {
    const Index n = X.rows();
    if (static_cast<Index>(y.size()) != n)
        throw std::invalid_argument("fit_gbm: labels do not match matrix");
    if (opts.n_trees < 1) throw std::invalid_argument("fit_gbm: need at least one tree");
    if (opts.learning_rate <= 0.0)
        throw std::invalid_argument("fit_gbm: learning rate must be positive");

    int classes = 0;
    for (int label : y) {
        if (label < 1) throw std::invalid_argument("fit_gbm: labels must start at 1");
        classes = std::max(classes, label);
    }
    std::vector<Index> class_counts(static_cast<std::size_t>(classes) + 1, 0);
    for (int label : y) ++class_counts[static_cast<std::size_t>(label)];
    int present = 0;
    for (int c = 1; c <= classes; ++c) present += class_counts[static_cast<std::size_t>(c)] > 0;
    if (present < 2) throw std::invalid_argument("fit_gbm: training labels are single-class");

    BoostedModel model;
    model.learning_rate = opts.learning_rate;
    model.seed = opts.seed;
    model.feature_names = std::move(feature_names);
    if (model.feature_names.empty())
        for (Index f = 0; f < X.cols(); ++f)
            model.feature_names.push_back("f" + std::to_string(f));

    std::vector<Index> all_rows(static_cast<std::size_t>(n));
    std::iota(all_rows.begin(), all_rows.end(), Index{0});

    const bool multinomial = opts.loss == "multinomial" || classes > 2;
    if (!multinomial) {
        model.loss = "binomial";
        model.classes = 2;
        const double positive =
            static_cast<double>(class_counts[2]) / static_cast<double>(n);
        model.initial_scores = {std::log(positive / (1.0 - positive))};

        Vector raw = Vector::Constant(n, model.initial_scores[0]);
        Vector residual(n), hessian(n);
        for (int round = 0; round < opts.n_trees; ++round) {
            for (Index i = 0; i < n; ++i) {
                const double p = sigmoid(raw(i));
                residual(i) = (y[static_cast<std::size_t>(i)] == 2 ? 1.0 : 0.0) - p;
                hessian(i) = p * (1.0 - p);
            }
            TreeBuilder builder(X, all_rows, residual, hessian, opts.max_depth, 1.0);
            model.trees.push_back(builder.take());
            double deviance = 0.0;
            for (Index i = 0; i < n; ++i) {
                raw(i) += opts.learning_rate * model.trees.back().predict(X.row(i));
                const double p = clamp_prob(sigmoid(raw(i)));
                deviance -= 2.0 * (y[static_cast<std::size_t>(i)] == 2 ? std::log(p)
                                                                       : std::log(1.0 - p));
            }
            model.train_deviance.push_back(deviance / static_cast<double>(n));
        }
        return model;
    }

    model.loss = "multinomial";
    model.classes = classes;
    model.initial_scores.resize(static_cast<std::size_t>(classes));
    for (int c = 1; c <= classes; ++c) {
        const double prior =
            std::max(static_cast<double>(class_counts[static_cast<std::size_t>(c)]), 1.0) /
            static_cast<double>(n);
        model.initial_scores[static_cast<std::size_t>(c - 1)] = std::log(prior);
    }

    Matrix raw(n, classes);
    for (int c = 0; c < classes; ++c)
        raw.col(c).setConstant(model.initial_scores[static_cast<std::size_t>(c)]);
    const double newton_scale = static_cast<double>(classes - 1) / static_cast<double>(classes);
    Vector residual(n), hessian(n);
    Matrix proba(n, classes);
    for (int round = 0; round < opts.n_trees; ++round) {
        for (Index i = 0; i < n; ++i) {
            const double peak = raw.row(i).maxCoeff();
            const Eigen::ArrayXd exps = (raw.row(i).array() - peak).exp();
            proba.row(i) = exps / exps.sum();
        }
        for (int c = 0; c < classes; ++c) {
            for (Index i = 0; i < n; ++i) {
                const double p = proba(i, c);
                residual(i) = (y[static_cast<std::size_t>(i)] == c + 1 ? 1.0 : 0.0) - p;
                hessian(i) = p * (1.0 - p);
            }
            TreeBuilder builder(X, all_rows, residual, hessian, opts.max_depth, newton_scale);
            model.trees.push_back(builder.take());
            for (Index i = 0; i < n; ++i)
                raw(i, c) += opts.learning_rate * model.trees.back().predict(X.row(i));
        }
        double deviance = 0.0;
        for (Index i = 0; i < n; ++i) {
            const double peak = raw.row(i).maxCoeff();
            const double log_norm = peak + std::log((raw.row(i).array() - peak).exp().sum());
            deviance -= 2.0 * (raw(i, y[static_cast<std::size_t>(i)] - 1) - log_norm);
        }
        model.train_deviance.push_back(deviance / static_cast<double>(n));
    }
    return model;
}

Matrix predict_proba(const BoostedModel& model, const Matrix& X) {
    if (X.cols() != static_cast<Index>(model.feature_names.size()))
        throw std::invalid_argument("predict_proba: feature count mismatch");
    const Index n = X.rows();
    Matrix proba(n, model.classes);
    if (model.loss == "binomial") {
        for (Index i = 0; i < n; ++i) {
            double raw = model.initial_scores[0];
            for (const auto& tree : model.trees)
                raw += model.learning_rate * tree.predict(X.row(i));
            const double p = clamp_prob(sigmoid(raw));
            proba(i, 0) = 1.0 - p;
            proba(i, 1) = p;
        }
        return proba;
    }
    const int classes = model.classes;
    for (Index i = 0; i < n; ++i) {
        Eigen::ArrayXd raw(classes);
        for (int c = 0; c < classes; ++c) raw(c) = model.initial_scores[static_cast<std::size_t>(c)];
        for (std::size_t t = 0; t < model.trees.size(); ++t)
            raw(static_cast<Index>(t % static_cast<std::size_t>(classes))) +=
                model.learning_rate * model.trees[t].predict(X.row(i));
        const Eigen::ArrayXd exps = (raw - raw.maxCoeff()).exp().max(kProbFloor);
        proba.row(i) = exps / exps.sum();
    }
    return proba;
}

double predict_class2(const BoostedModel& model, const RowVector& x) {
    if (x.size() != static_cast<Index>(model.feature_names.size()))
        throw std::invalid_argument("predict_class2: feature count mismatch");
    if (model.loss == "binomial") {
        double raw = model.initial_scores[0];
        for (const auto& tree : model.trees) raw += model.learning_rate * tree.predict(x);
        return clamp_prob(sigmoid(raw));
    }
    Matrix one(1, x.size());
    one.row(0) = x;
    return predict_proba(model, one)(0, 1);
}

std::vector<int> predict_labels(const BoostedModel& model, const Matrix& X) {
    const Matrix proba = predict_proba(model, X);
    std::vector<int> labels(static_cast<std::size_t>(X.rows()));
    for (Index i = 0; i < X.rows(); ++i) {
        int best = 0;
        for (int c = 1; c < model.classes; ++c)
            if (proba(i, c) > proba(i, best)) best = c;
        labels[static_cast<std::size_t>(i)] = best + 1;
    }
    return labels;
}

double accuracy(const BoostedModel& model, const Matrix& X, const std::vector<int>& y) {
    if (X.rows() == 0) throw std::invalid_argument("accuracy: empty test set");
    if (static_cast<Index>(y.size()) != X.rows())
        throw std::invalid_argument("accuracy: labels do not match matrix");
    const std::vector<int> predicted = predict_labels(model, X);
    Index correct = 0;
    for (std::size_t i = 0; i < y.size(); ++i) correct += predicted[i] == y[i];
    return static_cast<double>(correct) / static_cast<double>(X.rows());
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

nlohmann::json node_to_json(const RegressionTree& tree, int at) {
    const TreeNode& node = tree.nodes[static_cast<std::size_t>(at)];
    if (node.feature < 0) return {{"value", node.value}};
    return {{"feature", node.feature},
            {"threshold", node.threshold},
            {"left", node_to_json(tree, node.left)},
            {"right", node_to_json(tree, node.right)}};
}

int node_from_json(const nlohmann::json& j, RegressionTree& tree) {
    TreeNode node;
    if (j.contains("feature")) {
        node.feature = j.at("feature").get<int>();
        node.threshold = j.at("threshold").get<double>();
    } else {
        node.value = j.at("value").get<double>();
    }
    tree.nodes.push_back(node);
    const int at = static_cast<int>(tree.nodes.size()) - 1;
    if (node.feature >= 0) {
        const int left = node_from_json(j.at("left"), tree);
        const int right = node_from_json(j.at("right"), tree);
        tree.nodes[static_cast<std::size_t>(at)].left = left;
        tree.nodes[static_cast<std::size_t>(at)].right = right;
    }
    return at;
}

}  // namespace

nlohmann::json model_to_json(const BoostedModel& model) {
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& tree : model.trees) trees.push_back(node_to_json(tree, 0));
    return {{"loss", model.loss},
            {"classes", model.classes},
            {"learning_rate", model.learning_rate},
            {"initial_scores", model.initial_scores},
            {"feature_names", model.feature_names},
            {"train_deviance", model.train_deviance},
            {"seed", model.seed},
            {"trees", trees}};
}

BoostedModel model_from_json(const nlohmann::json& j) {
    BoostedModel model;
    model.loss = j.at("loss").get<std::string>();
    model.classes = j.at("classes").get<int>();
    model.learning_rate = j.at("learning_rate").get<double>();
    model.initial_scores = j.at("initial_scores").get<std::vector<double>>();
    model.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    model.train_deviance = j.at("train_deviance").get<std::vector<double>>();
    model.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& tree_json : j.at("trees")) {
        RegressionTree tree;
        node_from_json(tree_json, tree);
        model.trees.push_back(std::move(tree));
    }
    return model;
}

}  // namespace clustex
