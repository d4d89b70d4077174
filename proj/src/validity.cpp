#include "clustex/validity.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace clustex {

double silhouette(const Matrix& X, const Labeling& labeling) {
    const Index n = X.rows();
    if (labeling.size() != n)
        throw std::invalid_argument("silhouette: labeling does not match matrix");
    const int k = labeling.cluster_count();
    if (k < 2) throw std::invalid_argument("silhouette: need at least 2 clusters");

    std::vector<Index> cluster_sizes(static_cast<std::size_t>(k) + 1, 0);
    for (Index i = 0; i < n; ++i)
        if (!labeling.is_noise(i))
            ++cluster_sizes[static_cast<std::size_t>(labeling.labels[static_cast<std::size_t>(i)])];

    double total = 0.0;
    Index counted = 0;
    std::vector<double> dist_sum(static_cast<std::size_t>(k) + 1, 0.0);
    for (Index i = 0; i < n; ++i) {
        if (labeling.is_noise(i)) continue;
        const int own = labeling.labels[static_cast<std::size_t>(i)];
        ++counted;
        if (cluster_sizes[static_cast<std::size_t>(own)] <= 1) continue;  // singleton: s = 0

        std::fill(dist_sum.begin(), dist_sum.end(), 0.0);
        for (Index j = 0; j < n; ++j) {
            if (j == i || labeling.is_noise(j)) continue;
            dist_sum[static_cast<std::size_t>(labeling.labels[static_cast<std::size_t>(j)])] +=
                (X.row(i) - X.row(j)).norm();
        }
        const double a =
            dist_sum[static_cast<std::size_t>(own)] /
            static_cast<double>(cluster_sizes[static_cast<std::size_t>(own)] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (int c = 1; c <= k; ++c) {
            if (c == own || cluster_sizes[static_cast<std::size_t>(c)] == 0) continue;
            b = std::min(b, dist_sum[static_cast<std::size_t>(c)] /
                                static_cast<double>(cluster_sizes[static_cast<std::size_t>(c)]));
        }
        const double denom = std::max(a, b);
        if (denom > 0.0) total += (b - a) / denom;
    }
    return total / static_cast<double>(counted);
}

double calinski_harabasz(const Matrix& X, const Labeling& labeling) {
    const Index n = X.rows();
    if (labeling.size() != n)
        throw std::invalid_argument("calinski_harabasz: labeling does not match matrix");
    const int k = labeling.cluster_count();

    std::vector<Index> cluster_sizes(static_cast<std::size_t>(k) + 1, 0);
    Index counted = 0;
    for (Index i = 0; i < n; ++i) {
        if (labeling.is_noise(i)) continue;
        ++cluster_sizes[static_cast<std::size_t>(labeling.labels[static_cast<std::size_t>(i)])];
        ++counted;
    }
    if (k < 2 || static_cast<Index>(k) >= counted)
        throw std::invalid_argument("calinski_harabasz: need 2 <= k < N");

    Matrix centroids = Matrix::Zero(k + 1, X.cols());
    RowVector grand = RowVector::Zero(X.cols());
    for (Index i = 0; i < n; ++i) {
        if (labeling.is_noise(i)) continue;
        centroids.row(labeling.labels[static_cast<std::size_t>(i)]) += X.row(i);
        grand += X.row(i);
    }
    grand /= static_cast<double>(counted);
    for (int c = 1; c <= k; ++c)
        centroids.row(c) /= static_cast<double>(cluster_sizes[static_cast<std::size_t>(c)]);

    double between = 0.0;
    for (int c = 1; c <= k; ++c)
        between += static_cast<double>(cluster_sizes[static_cast<std::size_t>(c)]) *
                   (centroids.row(c) - grand).squaredNorm();
    double within = 0.0;
    for (Index i = 0; i < n; ++i) {
        if (labeling.is_noise(i)) continue;
        within += (X.row(i) - centroids.row(labeling.labels[static_cast<std::size_t>(i)])).squaredNorm();
    }

    if (within == 0.0) return kCalinskiHarabaszCap;
    const double ch = (between / static_cast<double>(k - 1)) /
                      (within / static_cast<double>(counted - k));
    return std::min(ch, kCalinskiHarabaszCap);
}

ValidityScore score_labeling(const Matrix& X, const Labeling& labeling) {
    ValidityScore score;
    score.k = labeling.cluster_count();
    score.params = labeling.params;
    score.silhouette = silhouette(X, labeling);
    score.calinski_harabasz = calinski_harabasz(X, labeling);
    return score;
}

}  // namespace clustex
