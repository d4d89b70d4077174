#pragma once

#include "clustex/types.hpp"

#include <string>
#include <vector>

namespace clustex {

// Per-algorithm labels recoded onto a shared orientation: 1 = the cluster
// with the higher grand mean of factor scores, 2 = the other, 0 = abstain
// (noise). `swapped` records which algorithms had their names flipped.
struct AlignedLabelings {
    std::vector<std::string> algorithms;
    std::vector<std::vector<int>> columns;  // one column per algorithm, N entries
    std::vector<char> swapped;

    Index size() const { return columns.empty() ? 0 : static_cast<Index>(columns.front().size()); }
};

struct ConsensusLabeling {
    std::vector<int> labels;  // final label per sample, 1 or 2
    std::vector<int> votes_1;
    std::vector<int> votes_2;
    std::vector<int> abstains;
    std::vector<char> tiebreak;  // vote counts tied, centroid distance decided

    Labeling as_labeling() const;
};

// Orients every labeling so cluster 1 is the one scoring higher on average
// across all factors; equal means go to the larger cluster. Labelings must
// have at most two non-noise clusters.
AlignedLabelings align_labels(const std::vector<Labeling>& labelings, const Matrix& X);

// Mode of the non-abstaining votes per sample. Tied samples take the label
// whose pooled aligned-cluster centroid lies nearer; samples where every
// algorithm abstained are an error (ids listed when provided).
ConsensusLabeling majority_vote(const AlignedLabelings& aligned, const Matrix& X,
                                const std::vector<std::string>& ids = {});

}  // namespace clustex
