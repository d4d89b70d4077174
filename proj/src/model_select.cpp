#include "clustex/model_select.hpp"

#include "clustex/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace clustex {

std::string to_string(SweepAlgorithm algorithm) {
    switch (algorithm) {
        case SweepAlgorithm::kmeans: return "kmeans";
        case SweepAlgorithm::agglomerative: return "agglomerative";
        case SweepAlgorithm::birch: return "birch";
    }
    return "unknown";
}

namespace {

// Many parameter settings produce the same partition, so validity scores are
// memoized on the label vector.
class ScoreCache {
  public:
    explicit ScoreCache(const Matrix& X) : X_(X) {}

    SweepEntry score(double param, const Labeling& labeling) {
        SweepEntry entry;
        entry.param = param;
        entry.k = labeling.cluster_count();
        Index members = 0;
        for (Index i = 0; i < labeling.size(); ++i)
            if (!labeling.is_noise(i)) ++members;
        if (entry.k < 2 || static_cast<Index>(entry.k) >= members) return entry;

        auto [it, fresh] = cache_.try_emplace(labeling.labels);
        if (fresh)
            it->second = {silhouette(X_, labeling), calinski_harabasz(X_, labeling)};
        entry.scored = true;
        entry.silhouette = it->second.first;
        entry.calinski_harabasz = it->second.second;
        return entry;
    }

  private:
    const Matrix& X_;
    std::map<std::vector<int>, std::pair<double, double>> cache_;
};

// Groups entries by resulting cluster count and averages the defined scores.
std::vector<GroupScore> group_by_k(const std::vector<SweepEntry>& entries) {
    std::map<int, GroupScore> groups;
    std::map<int, std::pair<double, double>> sums;
    std::map<int, int> scored_runs;
    for (const auto& entry : entries) {
        auto& group = groups[entry.k];
        group.k = entry.k;
        ++group.runs;
        if (entry.scored) {
            sums[entry.k].first += entry.silhouette;
            sums[entry.k].second += entry.calinski_harabasz;
            ++scored_runs[entry.k];
        }
    }
    std::vector<GroupScore> out;
    for (auto& [k, group] : groups) {
        if (const int runs = scored_runs[k]; runs > 0) {
            group.scored = true;
            group.mean_silhouette = sums[k].first / runs;
            group.mean_calinski_harabasz = sums[k].second / runs;
        }
        out.push_back(group);
    }
    return out;
}

// Winning cluster count = best mean silhouette; smaller k on ties. Returns
// -1 when no group has defined scores.
int pick_group(const std::vector<GroupScore>& groups) {
    int best_k = -1;
    double best = 0.0;
    for (const auto& group : groups) {
        if (!group.scored) continue;
        if (best_k < 0 || group.mean_silhouette > best) {
            best_k = group.k;
            best = group.mean_silhouette;
        }
    }
    return best_k;
}

int most_frequent_k(const std::vector<GroupScore>& groups) {
    int best_k = 0, best_runs = -1;
    for (const auto& group : groups)
        if (group.runs > best_runs) {
            best_runs = group.runs;
            best_k = group.k;
        }
    return best_k;
}

}  // namespace

SweepResult sweep_k(const Matrix& X, SweepAlgorithm algorithm, int k_min, int k_max,
                    std::uint64_t seed, double birch_threshold, int birch_branching) {
    if (k_min < 2) throw std::invalid_argument("sweep_k: k_min must be >= 2");
    if (static_cast<Index>(k_max) > X.rows() - 1)
        throw std::invalid_argument("sweep_k: k_max must be <= N-1");
    if (k_max < k_min) throw std::invalid_argument("sweep_k: empty k range");

    ScoreCache cache(X);
    SweepResult result;
    WardDendrogram dendrogram;
    if (algorithm == SweepAlgorithm::agglomerative) dendrogram = ward_dendrogram(X);

    for (int k = k_min; k <= k_max; ++k) {
        Labeling labeling;
        switch (algorithm) {
            case SweepAlgorithm::kmeans: {
                KmeansOptions opts;
                opts.k = k;
                opts.seed = seed;
                labeling = kmeans(X, opts).labeling;
                break;
            }
            case SweepAlgorithm::agglomerative:
                labeling = dendrogram.cut(k);
                break;
            case SweepAlgorithm::birch: {
                BirchOptions opts;
                opts.k = k;
                opts.threshold = birch_threshold;
                opts.branching = birch_branching;
                opts.seed = seed;
                labeling = birch(X, opts);
                break;
            }
        }
        result.entries.push_back(cache.score(static_cast<double>(k), labeling));
    }

    int best_sil = -1, best_ch = -1;
    for (int i = 0; i < static_cast<int>(result.entries.size()); ++i) {
        const auto& entry = result.entries[static_cast<std::size_t>(i)];
        if (!entry.scored) continue;
        if (best_sil < 0 ||
            entry.silhouette > result.entries[static_cast<std::size_t>(best_sil)].silhouette)
            best_sil = i;
        if (best_ch < 0 || entry.calinski_harabasz >
                               result.entries[static_cast<std::size_t>(best_ch)].calinski_harabasz)
            best_ch = i;
    }
    if (best_sil < 0) {
        result.rule = "degenerate_no_validity";
        result.chosen_param = result.entries.front().param;
        result.chosen_k = result.entries.front().k;
        return result;
    }
    result.rule = "max_silhouette";
    result.chosen_param = result.entries[static_cast<std::size_t>(best_sil)].param;
    result.chosen_k = result.entries[static_cast<std::size_t>(best_sil)].k;
    result.index_disagreement = best_ch != best_sil;
    return result;
}

KneeCurve kdist_knee(const Matrix& X, int k) {
    const Index n = X.rows();
    if (k < 1) throw std::invalid_argument("kdist_knee: k must be >= 1");
    if (static_cast<Index>(k) >= n) throw std::invalid_argument("kdist_knee: k must be < N");
    if (n < 3) throw std::invalid_argument("kdist_knee: need at least 3 samples");

    KneeCurve curve;
    curve.distances.reserve(static_cast<std::size_t>(n));
    std::vector<double> dists(static_cast<std::size_t>(n - 1));
    for (Index i = 0; i < n; ++i) {
        std::size_t w = 0;
        for (Index j = 0; j < n; ++j)
            if (j != i) dists[w++] = (X.row(i) - X.row(j)).norm();
        std::nth_element(dists.begin(), dists.begin() + (k - 1), dists.end());
        curve.distances.push_back(dists[static_cast<std::size_t>(k - 1)]);
    }
    std::sort(curve.distances.begin(), curve.distances.end());

    int window = std::max<int>(3, static_cast<int>(n / 100));
    if (window % 2 == 0) ++window;
    curve.smoothing_window = window;
    const Index half = window / 2;
    std::vector<double> smoothed(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        const Index lo = std::max<Index>(0, i - half);
        const Index hi = std::min<Index>(n - 1, i + half);
        double sum = 0.0;
        for (Index t = lo; t <= hi; ++t) sum += curve.distances[static_cast<std::size_t>(t)];
        smoothed[static_cast<std::size_t>(i)] = sum / static_cast<double>(hi - lo + 1);
    }

    // Where the window is clipped by the curve ends, the effective window
    // length changes from one rank to the next and the smoothed curve picks
    // up kinks that are artifacts of the clipping, not of the data.  The
    // knee search therefore only considers ranks whose centered window fits
    // entirely inside the curve.
    Index search_lo = half + 1;
    Index search_hi = n - 2 - half;
    if (search_lo > search_hi) {
        search_lo = 1;
        search_hi = n - 2;
    }
    std::vector<double> second(static_cast<std::size_t>(n), 0.0);
    double best = -std::numeric_limits<double>::infinity();
    for (Index i = search_lo; i <= search_hi; ++i) {
        second[static_cast<std::size_t>(i)] = smoothed[static_cast<std::size_t>(i + 1)] -
                                              2.0 * smoothed[static_cast<std::size_t>(i)] +
                                              smoothed[static_cast<std::size_t>(i - 1)];
        best = std::max(best, second[static_cast<std::size_t>(i)]);
    }
    // A single kink smoothed over the window becomes a plateau of near-equal
    // maxima; take the middle of the first such run so the knee sits on the
    // kink itself.
    const double threshold = best - 1e-9 * std::max(1.0, std::abs(best));
    Index run_start = -1, run_end = -1;
    for (Index i = search_lo; i <= search_hi; ++i) {
        if (second[static_cast<std::size_t>(i)] >= threshold) {
            if (run_start < 0) run_start = i;
            run_end = i;
        } else if (run_start >= 0) {
            break;
        }
    }
    curve.knee = run_start + (run_end - run_start) / 2;
    curve.eps = curve.distances[static_cast<std::size_t>(curve.knee)];
    return curve;
}

SweepResult sweep_min_samples(const Matrix& X, double eps, int min_pts_max) {
    if (min_pts_max < 1) throw std::invalid_argument("sweep_min_samples: empty range");
    const auto neighbors = radius_neighbors(X, eps);
    ScoreCache cache(X);
    SweepResult result;
    for (int min_pts = 1; min_pts <= min_pts_max; ++min_pts)
        result.entries.push_back(
            cache.score(static_cast<double>(min_pts), dbscan_from_neighbors(neighbors, min_pts)));

    result.groups = group_by_k(result.entries);
    int winner = pick_group(result.groups);
    if (winner < 0) {
        result.rule = "degenerate_no_validity";
        winner = most_frequent_k(result.groups);
    } else {
        result.rule = "max_mean_silhouette_smallest_min_pts";
    }
    result.chosen_k = winner;
    for (const auto& entry : result.entries)
        if (entry.k == winner) {
            result.chosen_param = entry.param;
            break;
        }
    return result;
}

SweepResult sweep_bandwidth(const Matrix& X, double lo, double hi, double step) {
    if (lo <= 0.0 || hi < lo || step <= 0.0)
        throw std::invalid_argument("sweep_bandwidth: invalid range");
    ScoreCache cache(X);
    SweepResult result;
    const int count = static_cast<int>(std::lround((hi - lo) / step)) + 1;
    for (int i = 0; i < count; ++i) {
        const double bandwidth = lo + step * i;
        MeanShiftOptions opts;
        opts.bandwidth = bandwidth;
        result.entries.push_back(cache.score(bandwidth, mean_shift(X, opts).labeling));
    }

    result.groups = group_by_k(result.entries);
    int winner = pick_group(result.groups);
    if (winner < 0) {
        result.rule = "degenerate_no_validity";
        winner = most_frequent_k(result.groups);
    } else {
        result.rule = "max_mean_silhouette_largest_bandwidth";
    }
    result.chosen_k = winner;
    for (auto it = result.entries.rbegin(); it != result.entries.rend(); ++it)
        if (it->k == winner) {
            result.chosen_param = it->param;
            break;
        }
    return result;
}

}  // namespace clustex
