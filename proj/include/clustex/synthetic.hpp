#pragma once

#include "clustex/types.hpp"

#include <cstdint>
#include <vector>

namespace clustex {

// Likert-like factor scores drawn around per-cluster means with bounded
// uniform noise, clamped to the 1..5 scale. One feature (the dominant one)
// separates the clusters more than any other, which gives the acceptance
// checks a known most-important feature.
struct SyntheticSpec {
    std::vector<Index> cluster_sizes{1340, 660};
    Matrix cluster_means;  // clusters x features, defaults filled by default_synthetic_spec
    double noise_scale = 0.12;
    int dominant_feature = 0;
    std::uint64_t seed = 1;
};

struct SyntheticData {
    FeatureMatrix features;
    std::vector<int> truth;  // ground-truth cluster per row, 1-based
};

// Two clusters, six factors, dominant separation 2.0 vs 0.1 elsewhere. The
// noise half-width (0.12) is calibrated both ways: blobs stay compact enough
// that every bandwidth up to 0.3 collapses each one to a single mode, yet
// the clusters overlap on every non-dominant feature, so only the dominant
// one can separate them on its own.
SyntheticSpec default_synthetic_spec();

SyntheticData generate_synthetic(const SyntheticSpec& spec);

}  // namespace clustex
