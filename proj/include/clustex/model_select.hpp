#pragma once

#include "clustex/types.hpp"
#include "clustex/validity.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace clustex {

enum class SweepAlgorithm { kmeans, agglomerative, birch };

std::string to_string(SweepAlgorithm algorithm);

struct SweepEntry {
    double param = 0.0;
    int k = 0;               // resulting cluster count
    bool scored = false;     // false when k < 2 leaves the indices undefined
    double silhouette = 0.0;
    double calinski_harabasz = 0.0;
};

struct GroupScore {
    int k = 0;
    int runs = 0;
    bool scored = false;
    double mean_silhouette = 0.0;
    double mean_calinski_harabasz = 0.0;
};

struct SweepResult {
    std::vector<SweepEntry> entries;   // ordered by parameter value
    std::vector<GroupScore> groups;    // per cluster count, for grouped sweeps
    double chosen_param = 0.0;
    int chosen_k = 0;
    std::string rule;
    bool index_disagreement = false;   // the two indices prefer different entries
};

struct KneeCurve {
    std::vector<double> distances;  // per-sample k-th neighbor distance, ascending
    Index knee = 0;
    double eps = 0.0;
    int smoothing_window = 0;
};

// Runs the algorithm for k in [k_min, k_max] and picks the k with the best
// silhouette; the Calinski-Harabasz column is reported alongside and a flag
// raised when the two indices disagree. Ties go to the smaller k. The two
// trailing knobs only affect the birch sweep.
SweepResult sweep_k(const Matrix& X, SweepAlgorithm algorithm, int k_min, int k_max,
                    std::uint64_t seed, double birch_threshold = 0.5, int birch_branching = 50);

// Sorted distance-to-kth-neighbor curve (self excluded). The knee is the
// largest second difference of a moving-average smoothed copy, window
// max(3, N/100); ties resolve to the middle of the first maximal run. eps is
// read off the raw curve at the knee.
KneeCurve kdist_knee(const Matrix& X, int k);

// DBSCAN over min_pts in [1, min_pts_max], scores grouped by resulting
// cluster count and averaged; the winning count has the best mean silhouette
// and the chosen parameter is the smallest min_pts attaining it.
SweepResult sweep_min_samples(const Matrix& X, double eps, int min_pts_max);

// Mean shift over bandwidths [lo, hi] in the given step; grouping as above
// but the chosen parameter is the largest bandwidth attaining the winning
// cluster count. When no bandwidth yields two scoreable clusters the result
// is marked degenerate instead of carrying validity scores.
SweepResult sweep_bandwidth(const Matrix& X, double lo, double hi, double step);

}  // namespace clustex
