#pragma once

#include "clustex/types.hpp"

namespace clustex {

// Reported in place of +inf when the within-cluster scatter is exactly zero.
inline constexpr double kCalinskiHarabaszCap = 1e12;

struct ValidityScore {
    double silhouette = 0.0;
    double calinski_harabasz = 0.0;
    int k = 0;
    std::vector<std::pair<std::string, std::string>> params;
};

// Mean silhouette s = (b - a) / max(a, b) over non-noise points with plain
// Euclidean distance; a is the mean distance to the rest of the point's own
// cluster, b the smallest mean distance to another cluster. Singletons
// contribute 0. Streams over the distance matrix, so memory stays O(N).
// Throws if fewer than two clusters remain after dropping noise.
double silhouette(const Matrix& X, const Labeling& labeling);

// Calinski-Harabasz ratio [B/(k-1)] / [W/(N-k)] with squared Euclidean
// scatter, computed over non-noise points. Requires 2 <= k < N; zero W is
// reported as kCalinskiHarabaszCap.
double calinski_harabasz(const Matrix& X, const Labeling& labeling);

ValidityScore score_labeling(const Matrix& X, const Labeling& labeling);

}  // namespace clustex
