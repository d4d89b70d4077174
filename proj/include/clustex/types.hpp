#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace clustex {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Index = Eigen::Index;

/// Noise encoding used in label CSVs; in-memory noise is carried by the mask.
inline constexpr int kNoiseLabel = 0;

/// N x p table of per-respondent factor scores, the currency between stages.
struct FeatureMatrix {
    std::vector<std::string> respondent_ids;
    std::vector<std::string> feature_names;
    Matrix values;  // one row per respondent, one column per factor

    Index rows() const { return values.rows(); }
    Index cols() const { return values.cols(); }
};

/// Per-sample cluster assignment from one algorithm. Non-noise labels are
/// contiguous 1..k, numbered by first occurrence in sample order.
struct Labeling {
    std::string algorithm;
    std::vector<int> labels;
    std::vector<char> noise;  // true where the algorithm declared noise
    std::vector<std::pair<std::string, std::string>> params;
    std::uint64_t seed = 0;

    Index size() const { return static_cast<Index>(labels.size()); }

    bool is_noise(Index i) const { return noise[static_cast<std::size_t>(i)] != 0; }

    int cluster_count() const {
        int k = 0;
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (!noise[i] && labels[i] > k) k = labels[i];
        return k;
    }

    /// Sizes of clusters 1..k; noise points are not counted.
    std::vector<Index> cluster_sizes() const {
        std::vector<Index> sizes(static_cast<std::size_t>(cluster_count()), 0);
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (!noise[i]) ++sizes[static_cast<std::size_t>(labels[i] - 1)];
        return sizes;
    }
};

/// Renumbers non-noise labels to 1..k by first occurrence in sample order,
/// so equal partitions always serialize identically.
void canonicalize_labels(Labeling& labeling);

struct Centroids {
    Matrix points;  // k x p, row i is the centroid of cluster i+1

    Index count() const { return points.rows(); }
};

}  // namespace clustex
