#pragma once

#include "clustex/types.hpp"

#include <cstdint>
#include <vector>

namespace clustex {

// All five algorithms work on raw factor scores with squared Euclidean
// distance; features share the same Likert scale, so no standardization.
// Tie-breaks always go to the lowest sample index and labels are
// canonicalized by first occurrence, so results are reproducible bit for
// bit under a fixed seed.

struct KmeansOptions {
    int k = 2;
    std::uint64_t seed = 0;
    int max_iter = 300;
    double tol = 1e-6;
    int n_init = 10;
};

struct KmeansResult {
    Labeling labeling;
    Centroids centroids;
    double objective = 0.0;              // Sum of squared point-to-centroid distances
    std::vector<double> objective_trace; // per Lloyd iteration of the winning restart
};

/// Lloyd iterations from k-means++ seeded centers; best of n_init restarts
/// by final objective. Empty clusters are re-seeded at the point farthest
/// from its current centroid.
KmeansResult kmeans(const Matrix& X, const KmeansOptions& opts);

struct DbscanOptions {
    double eps = 0.5;
    int min_pts = 5;  // neighborhood count includes the point itself
};

/// Neighbor lists within Euclidean distance eps, self included, indices
/// ascending. Exposed so parameter sweeps can reuse one computation.
std::vector<std::vector<Index>> radius_neighbors(const Matrix& X, double eps);

Labeling dbscan(const Matrix& X, const DbscanOptions& opts);

/// DBSCAN given precomputed eps-neighbor lists. Border points join the
/// cluster of the lowest-index core point that reaches them.
Labeling dbscan_from_neighbors(const std::vector<std::vector<Index>>& neighbors, int min_pts);

/// One Ward merge: the two clusters fused and the increase in the total
/// within-cluster error sum of squares that the fusion costs.
struct WardMerge {
    Index first;   // lowest member index of the first cluster
    Index second;  // lowest member index of the second cluster
    double height; // delta ESS of this merge
};

/// Full merge history from singletons; cut at any k without re-clustering.
struct WardDendrogram {
    Index n = 0;
    std::vector<WardMerge> merges;  // n-1 entries, heights non-decreasing

    Labeling cut(int k) const;
};

WardDendrogram ward_dendrogram(const Matrix& X);

/// Ward's minimum-increase-in-ESS agglomeration, cut at k clusters.
Labeling agglomerative_ward(const Matrix& X, int k);

struct MeanShiftOptions {
    double bandwidth = 1.0;
    int max_iter = 300;
    double tol = 1e-5;
};

struct MeanShiftResult {
    Labeling labeling;
    Centroids modes;  // row i is the mode of cluster i+1
};

/// Flat-kernel mean shift seeded at every data point. Converged modes
/// closer than the bandwidth are merged, higher-support mode winning;
/// points are labeled by their nearest surviving mode.
MeanShiftResult mean_shift(const Matrix& X, const MeanShiftOptions& opts);

struct BirchOptions {
    int k = 2;
    double threshold = 0.5;
    int branching = 50;
    std::uint64_t seed = 0;
};

/// Single-pass CF-tree insertion followed by seeded k-means over the leaf
/// CF centroids; each point inherits its leaf CF's group.
Labeling birch(const Matrix& X, const BirchOptions& opts);

/// Adjusted Rand index between two labelings (noise treated as its own
/// class). 1.0 means identical partitions up to renaming.
double adjusted_rand_index(const Labeling& a, const Labeling& b);

}  // namespace clustex
