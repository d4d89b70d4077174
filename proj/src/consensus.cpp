#include "clustex/consensus.hpp"

#include <sstream>
#include <stdexcept>

namespace clustex {

Labeling ConsensusLabeling::as_labeling() const {
    Labeling out;
    out.algorithm = "voting";
    out.labels = labels;
    out.noise.assign(labels.size(), 0);
    return out;
}

AlignedLabelings align_labels(const std::vector<Labeling>& labelings, const Matrix& X) {
    AlignedLabelings aligned;
    for (const auto& labeling : labelings) {
        if (labeling.size() != X.rows())
            throw std::invalid_argument("align_labels: labeling does not match matrix");
        const int k = labeling.cluster_count();
        if (k > 2)
            throw std::invalid_argument("align_labels: " + labeling.algorithm + " has " +
                                        std::to_string(k) + " clusters, voting needs at most 2");

        double sum[3] = {0.0, 0.0, 0.0};
        Index members[3] = {0, 0, 0};
        for (Index i = 0; i < labeling.size(); ++i) {
            if (labeling.is_noise(i)) continue;
            const int c = labeling.labels[static_cast<std::size_t>(i)];
            sum[c] += X.row(i).mean();
            ++members[c];
        }

        // Which original cluster becomes aligned cluster 1.
        int top = 1;
        if (k == 2) {
            const double mean1 = sum[1] / static_cast<double>(members[1]);
            const double mean2 = sum[2] / static_cast<double>(members[2]);
            if (mean2 > mean1 || (mean2 == mean1 && members[2] > members[1])) top = 2;
        }

        std::vector<int> column(static_cast<std::size_t>(labeling.size()), 0);
        for (Index i = 0; i < labeling.size(); ++i) {
            if (labeling.is_noise(i)) continue;
            const int c = labeling.labels[static_cast<std::size_t>(i)];
            column[static_cast<std::size_t>(i)] = (c == top) ? 1 : 2;
        }
        aligned.algorithms.push_back(labeling.algorithm);
        aligned.columns.push_back(std::move(column));
        aligned.swapped.push_back(top == 2);
    }
    return aligned;
}

ConsensusLabeling majority_vote(const AlignedLabelings& aligned, const Matrix& X,
                                const std::vector<std::string>& ids) {
    const Index n = aligned.size();
    if (n != X.rows()) throw std::invalid_argument("majority_vote: columns do not match matrix");

    ConsensusLabeling out;
    out.labels.assign(static_cast<std::size_t>(n), 0);
    out.votes_1.assign(static_cast<std::size_t>(n), 0);
    out.votes_2.assign(static_cast<std::size_t>(n), 0);
    out.abstains.assign(static_cast<std::size_t>(n), 0);
    out.tiebreak.assign(static_cast<std::size_t>(n), 0);

    for (const auto& column : aligned.columns) {
        for (Index i = 0; i < n; ++i) {
            switch (column[static_cast<std::size_t>(i)]) {
                case 1: ++out.votes_1[static_cast<std::size_t>(i)]; break;
                case 2: ++out.votes_2[static_cast<std::size_t>(i)]; break;
                default: ++out.abstains[static_cast<std::size_t>(i)];
            }
        }
    }

    std::vector<Index> unassignable;
    for (Index i = 0; i < n; ++i)
        if (out.votes_1[static_cast<std::size_t>(i)] + out.votes_2[static_cast<std::size_t>(i)] == 0)
            unassignable.push_back(i);
    if (!unassignable.empty()) {
        std::ostringstream msg;
        msg << "majority_vote: every algorithm abstained for";
        for (Index i : unassignable)
            msg << ' '
                << (ids.empty() ? std::to_string(i) : ids[static_cast<std::size_t>(i)]);
        throw std::runtime_error(msg.str());
    }

    // Pooled centroids of the two aligned clusters, each sample weighted by
    // how many algorithms put it there; used only to settle tied votes.
    RowVector centroid_1 = RowVector::Zero(X.cols());
    RowVector centroid_2 = RowVector::Zero(X.cols());
    double weight_1 = 0.0, weight_2 = 0.0;
    for (Index i = 0; i < n; ++i) {
        centroid_1 += static_cast<double>(out.votes_1[static_cast<std::size_t>(i)]) * X.row(i);
        centroid_2 += static_cast<double>(out.votes_2[static_cast<std::size_t>(i)]) * X.row(i);
        weight_1 += out.votes_1[static_cast<std::size_t>(i)];
        weight_2 += out.votes_2[static_cast<std::size_t>(i)];
    }
    if (weight_1 > 0.0) centroid_1 /= weight_1;
    if (weight_2 > 0.0) centroid_2 /= weight_2;

    for (Index i = 0; i < n; ++i) {
        const int v1 = out.votes_1[static_cast<std::size_t>(i)];
        const int v2 = out.votes_2[static_cast<std::size_t>(i)];
        if (v1 != v2) {
            out.labels[static_cast<std::size_t>(i)] = v1 > v2 ? 1 : 2;
            continue;
        }
        out.tiebreak[static_cast<std::size_t>(i)] = 1;
        const double d1 = (X.row(i) - centroid_1).squaredNorm();
        const double d2 = (X.row(i) - centroid_2).squaredNorm();
        out.labels[static_cast<std::size_t>(i)] = (d2 < d1) ? 2 : 1;
    }
    return out;
}

}  // namespace clustex
