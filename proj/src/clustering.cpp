#include "clustex/clustering.hpp"

#include "clustex/rng.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace clustex {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Vector squared_distances_to(const Matrix& X, const RowVector& point) {
    return (X.rowwise() - point).rowwise().squaredNorm();
}

Labeling make_labeling(std::string algorithm, std::vector<int> labels, std::vector<char> noise) {
    Labeling out;
    out.algorithm = std::move(algorithm);
    out.labels = std::move(labels);
    out.noise = std::move(noise);
    canonicalize_labels(out);
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// k-means
// ---------------------------------------------------------------------------

namespace {

Matrix kmeanspp_centers(const Matrix& X, int k, Rng& rng) {
    const Index n = X.rows();
    Matrix centers(k, X.cols());
    std::vector<char> chosen(static_cast<std::size_t>(n), 0);

    const Index first = static_cast<Index>(rng.next_below(static_cast<std::uint64_t>(n)));
    centers.row(0) = X.row(first);
    chosen[static_cast<std::size_t>(first)] = 1;
    Vector d2 = squared_distances_to(X, centers.row(0));

    for (int c = 1; c < k; ++c) {
        const double total = d2.sum();
        Index pick = -1;
        if (total > 0.0) {
            const double r = rng.next_double() * total;
            double acc = 0.0;
            for (Index i = 0; i < n; ++i) {
                acc += d2(i);
                if (acc > r) {
                    pick = i;
                    break;
                }
            }
            if (pick < 0) pick = n - 1;
        } else {
            // all remaining mass zero (duplicated data); take lowest unused index
            for (Index i = 0; i < n; ++i)
                if (!chosen[static_cast<std::size_t>(i)]) {
                    pick = i;
                    break;
                }
            if (pick < 0) pick = 0;
        }
        chosen[static_cast<std::size_t>(pick)] = 1;
        centers.row(c) = X.row(pick);
        d2 = d2.cwiseMin(squared_distances_to(X, centers.row(c)));
    }
    return centers;
}

// Nearest centroid per point, ties to the lowest centroid index.
void assign_nearest(const Matrix& X, const Matrix& centers, std::vector<int>& labels) {
    const Index n = X.rows();
    const int k = static_cast<int>(centers.rows());
    for (Index i = 0; i < n; ++i) {
        int best = 0;
        double best_d = (X.row(i) - centers.row(0)).squaredNorm();
        for (int c = 1; c < k; ++c) {
            const double d = (X.row(i) - centers.row(c)).squaredNorm();
            if (d < best_d) {
                best_d = d;
                best = c;
            }
        }
        labels[static_cast<std::size_t>(i)] = best;
    }
}

double kmeans_objective(const Matrix& X, const Matrix& centers, const std::vector<int>& labels) {
    double e = 0.0;
    for (Index i = 0; i < X.rows(); ++i)
        e += (X.row(i) - centers.row(labels[static_cast<std::size_t>(i)])).squaredNorm();
    return e;
}

struct LloydRun {
    std::vector<int> labels;
    Matrix centers;
    double objective = kInf;
    std::vector<double> trace;
};

LloydRun lloyd(const Matrix& X, int k, const KmeansOptions& opts, Rng& rng) {
    const Index n = X.rows();
    LloydRun run;
    run.centers = kmeanspp_centers(X, k, rng);
    run.labels.assign(static_cast<std::size_t>(n), 0);
    assign_nearest(X, run.centers, run.labels);
    run.trace.push_back(kmeans_objective(X, run.centers, run.labels));

    std::vector<int> next(run.labels);
    const double tol2 = opts.tol * opts.tol;
    for (int iter = 0; iter < opts.max_iter; ++iter) {
        Matrix sums = Matrix::Zero(k, X.cols());
        std::vector<Index> counts(static_cast<std::size_t>(k), 0);
        for (Index i = 0; i < n; ++i) {
            sums.row(run.labels[static_cast<std::size_t>(i)]) += X.row(i);
            ++counts[static_cast<std::size_t>(run.labels[static_cast<std::size_t>(i)])];
        }
        Matrix updated(k, X.cols());
        for (int c = 0; c < k; ++c) {
            if (counts[static_cast<std::size_t>(c)] > 0)
                updated.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
            else
                updated.row(c) = run.centers.row(c);  // placeholder, re-seeded below
        }
        // Re-seed each empty cluster at the point farthest from its own
        // centroid; that point's contribution to E drops to zero, so the
        // objective stays non-increasing.
        std::vector<char> used(static_cast<std::size_t>(n), 0);
        for (int c = 0; c < k; ++c) {
            if (counts[static_cast<std::size_t>(c)] > 0) continue;
            Index far = -1;
            double far_d = -1.0;
            for (Index i = 0; i < n; ++i) {
                if (used[static_cast<std::size_t>(i)]) continue;
                const double d =
                    (X.row(i) - updated.row(run.labels[static_cast<std::size_t>(i)])).squaredNorm();
                if (d > far_d) {
                    far_d = d;
                    far = i;
                }
            }
            updated.row(c) = X.row(far);
            used[static_cast<std::size_t>(far)] = 1;
        }

        const double shift2 = (updated - run.centers).rowwise().squaredNorm().maxCoeff();
        run.centers = updated;
        assign_nearest(X, run.centers, next);
        run.trace.push_back(kmeans_objective(X, run.centers, next));
        const bool fixpoint = (next == run.labels);
        run.labels = next;
        if (fixpoint || shift2 < tol2) break;
    }

    // Final centroids are the means of the final clusters.
    Matrix sums = Matrix::Zero(k, X.cols());
    std::vector<Index> counts(static_cast<std::size_t>(k), 0);
    for (Index i = 0; i < n; ++i) {
        sums.row(run.labels[static_cast<std::size_t>(i)]) += X.row(i);
        ++counts[static_cast<std::size_t>(run.labels[static_cast<std::size_t>(i)])];
    }
    for (int c = 0; c < k; ++c)
        if (counts[static_cast<std::size_t>(c)] > 0)
            run.centers.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
    run.objective = kmeans_objective(X, run.centers, run.labels);
    run.trace.push_back(run.objective);
    return run;
}

}  // namespace

KmeansResult kmeans(const Matrix& X, const KmeansOptions& opts) {
    const Index n = X.rows();
    if (opts.k < 1 || static_cast<Index>(opts.k) > n)
        throw std::invalid_argument("kmeans: k must be in [1, N]");
    if (opts.tol <= 0.0) throw std::invalid_argument("kmeans: tol must be positive");

    LloydRun best;
    for (int restart = 0; restart < std::max(1, opts.n_init); ++restart) {
        Rng rng(derive_seed(opts.seed, static_cast<std::uint64_t>(restart)));
        LloydRun run = lloyd(X, opts.k, opts, rng);
        if (run.objective < best.objective) best = std::move(run);
    }

    KmeansResult result;
    result.objective = best.objective;
    result.objective_trace = best.trace;

    std::vector<int> labels(best.labels.begin(), best.labels.end());
    result.labeling = make_labeling("kmeans", std::move(labels),
                                    std::vector<char>(static_cast<std::size_t>(n), 0));
    result.labeling.seed = opts.seed;
    result.labeling.params = {{"k", std::to_string(opts.k)},
                              {"n_init", std::to_string(opts.n_init)},
                              {"max_iter", std::to_string(opts.max_iter)}};

    // Reorder centroids to match the canonical label numbering.
    result.centroids.points.resize(opts.k, X.cols());
    std::vector<char> seen(static_cast<std::size_t>(opts.k) + 1, 0);
    for (Index i = 0; i < n; ++i) {
        const int canonical = result.labeling.labels[static_cast<std::size_t>(i)];
        if (!seen[static_cast<std::size_t>(canonical)]) {
            seen[static_cast<std::size_t>(canonical)] = 1;
            result.centroids.points.row(canonical - 1) =
                best.centers.row(best.labels[static_cast<std::size_t>(i)]);
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// DBSCAN
// ---------------------------------------------------------------------------

std::vector<std::vector<Index>> radius_neighbors(const Matrix& X, double eps) {
    if (eps <= 0.0) throw std::invalid_argument("radius_neighbors: eps must be positive");
    const Index n = X.rows();
    const double eps2 = eps * eps;
    std::vector<std::vector<Index>> neighbors(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        const Vector d2 = squared_distances_to(X, X.row(i));
        for (Index j = 0; j < n; ++j)
            if (d2(j) <= eps2) neighbors[static_cast<std::size_t>(i)].push_back(j);
    }
    return neighbors;
}

Labeling dbscan_from_neighbors(const std::vector<std::vector<Index>>& neighbors, int min_pts) {
    if (min_pts < 1) throw std::invalid_argument("dbscan: min_pts must be >= 1");
    const Index n = static_cast<Index>(neighbors.size());
    std::vector<char> core(static_cast<std::size_t>(n), 0);
    for (Index i = 0; i < n; ++i)
        core[static_cast<std::size_t>(i)] =
            static_cast<Index>(neighbors[static_cast<std::size_t>(i)].size()) >=
            static_cast<Index>(min_pts);

    std::vector<int> labels(static_cast<std::size_t>(n), -1);
    int next_cluster = 0;
    for (Index i = 0; i < n; ++i) {
        if (!core[static_cast<std::size_t>(i)] || labels[static_cast<std::size_t>(i)] >= 0) continue;
        const int cluster = next_cluster++;
        std::deque<Index> queue{i};
        labels[static_cast<std::size_t>(i)] = cluster;
        while (!queue.empty()) {
            const Index u = queue.front();
            queue.pop_front();
            for (Index v : neighbors[static_cast<std::size_t>(u)]) {
                if (!core[static_cast<std::size_t>(v)] || labels[static_cast<std::size_t>(v)] >= 0)
                    continue;
                labels[static_cast<std::size_t>(v)] = cluster;
                queue.push_back(v);
            }
        }
    }

    // Border points join the cluster of their lowest-index core neighbor
    // (neighbor lists are ascending, so the first core hit is the lowest).
    std::vector<char> noise(static_cast<std::size_t>(n), 0);
    for (Index i = 0; i < n; ++i) {
        if (core[static_cast<std::size_t>(i)]) continue;
        int attached = -1;
        for (Index v : neighbors[static_cast<std::size_t>(i)]) {
            if (core[static_cast<std::size_t>(v)]) {
                attached = labels[static_cast<std::size_t>(v)];
                break;
            }
        }
        if (attached >= 0) {
            labels[static_cast<std::size_t>(i)] = attached;
        } else {
            labels[static_cast<std::size_t>(i)] = 0;
            noise[static_cast<std::size_t>(i)] = 1;
        }
    }

    return make_labeling("dbscan", std::move(labels), std::move(noise));
}

Labeling dbscan(const Matrix& X, const DbscanOptions& opts) {
    Labeling out = dbscan_from_neighbors(radius_neighbors(X, opts.eps), opts.min_pts);
    out.params = {{"eps", std::to_string(opts.eps)}, {"min_pts", std::to_string(opts.min_pts)}};
    return out;
}

// ---------------------------------------------------------------------------
// Ward agglomeration
// ---------------------------------------------------------------------------

namespace {

// Condensed upper-triangular index for slots i < j out of n.
inline std::size_t condensed_index(Index n, Index i, Index j) {
    return static_cast<std::size_t>(i) * static_cast<std::size_t>(n) -
           static_cast<std::size_t>(i) * (static_cast<std::size_t>(i) + 1) / 2 +
           static_cast<std::size_t>(j - i - 1);
}

}  // namespace

WardDendrogram ward_dendrogram(const Matrix& X) {
    const Index n = X.rows();
    WardDendrogram dendrogram;
    dendrogram.n = n;
    if (n <= 1) return dendrogram;

    // d(i,j) holds the ESS increase of fusing clusters i and j; between
    // singletons that is half the squared distance.
    std::vector<double> d(condensed_index(n, n - 2, n - 1) + 1);
    for (Index i = 0; i < n; ++i) {
        const Vector d2 = squared_distances_to(X, X.row(i));
        for (Index j = i + 1; j < n; ++j) d[condensed_index(n, i, j)] = 0.5 * d2(j);
    }

    std::vector<Index> active;
    active.reserve(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) active.push_back(i);
    std::vector<double> size(static_cast<std::size_t>(n), 1.0);

    // Row minima cache: for each active slot i, the lowest-index argmin over
    // active j > i. The global scan over rows keeps the lexicographic
    // (distance, lower slot, higher slot) tie-break of a full pair scan.
    std::vector<double> row_min(static_cast<std::size_t>(n), kInf);
    std::vector<Index> row_arg(static_cast<std::size_t>(n), -1);
    auto recompute_row = [&](std::size_t pos) {
        const Index i = active[pos];
        double best = kInf;
        Index arg = -1;
        for (std::size_t q = pos + 1; q < active.size(); ++q) {
            const Index j = active[q];
            const double dij = d[condensed_index(n, i, j)];
            if (dij < best) {
                best = dij;
                arg = j;
            }
        }
        row_min[static_cast<std::size_t>(i)] = best;
        row_arg[static_cast<std::size_t>(i)] = arg;
    };
    for (std::size_t pos = 0; pos < active.size(); ++pos) recompute_row(pos);

    dendrogram.merges.reserve(static_cast<std::size_t>(n - 1));
    while (active.size() > 1) {
        double best = kInf;
        std::size_t best_pos = 0;
        for (std::size_t pos = 0; pos + 1 < active.size(); ++pos) {
            const double m = row_min[static_cast<std::size_t>(active[pos])];
            if (m < best) {
                best = m;
                best_pos = pos;
            }
        }
        const Index a = active[best_pos];
        const Index b = row_arg[static_cast<std::size_t>(a)];
        dendrogram.merges.push_back({a, b, best});

        const double na = size[static_cast<std::size_t>(a)];
        const double nb = size[static_cast<std::size_t>(b)];
        const double dab = best;

        // Lance-Williams update of every distance to the fused cluster,
        // which keeps slot a (the lower member index).
        for (std::size_t pos = 0; pos < active.size(); ++pos) {
            const Index x = active[pos];
            if (x == a || x == b) continue;
            const double nx = size[static_cast<std::size_t>(x)];
            const double dax = d[condensed_index(n, std::min(a, x), std::max(a, x))];
            const double dbx = d[condensed_index(n, std::min(b, x), std::max(b, x))];
            const double merged =
                ((na + nx) * dax + (nb + nx) * dbx - nx * dab) / (na + nb + nx);
            d[condensed_index(n, std::min(a, x), std::max(a, x))] = merged;
            auto& rm = row_min[static_cast<std::size_t>(std::min(a, x))];
            auto& ra = row_arg[static_cast<std::size_t>(std::min(a, x))];
            const Index hi = std::max(a, x);
            if (merged < rm || (merged == rm && hi < ra)) {
                rm = merged;
                ra = hi;
            }
        }
        size[static_cast<std::size_t>(a)] = na + nb;
        active.erase(active.begin() + static_cast<std::ptrdiff_t>(
                                           std::find(active.begin(), active.end(), b) -
                                           active.begin()));

        // Rows whose cached minimum referenced a fused slot are stale.
        for (std::size_t pos = 0; pos + 1 < active.size(); ++pos) {
            const Index i = active[pos];
            const Index arg = row_arg[static_cast<std::size_t>(i)];
            if (i == a || arg == a || arg == b) recompute_row(pos);
        }
        if (!active.empty())
            row_min[static_cast<std::size_t>(active.back())] = kInf;
    }
    return dendrogram;
}

Labeling WardDendrogram::cut(int k) const {
    if (k < 1 || static_cast<Index>(k) > n)
        throw std::invalid_argument("ward cut: k must be in [1, N]");
    std::vector<Index> parent(static_cast<std::size_t>(n));
    std::iota(parent.begin(), parent.end(), Index{0});
    std::function<Index(Index)> find = [&](Index v) {
        while (parent[static_cast<std::size_t>(v)] != v) {
            parent[static_cast<std::size_t>(v)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(v)])];
            v = parent[static_cast<std::size_t>(v)];
        }
        return v;
    };
    const std::size_t replay = static_cast<std::size_t>(n - k);
    for (std::size_t m = 0; m < replay; ++m) {
        const Index ra = find(merges[m].first);
        const Index rb = find(merges[m].second);
        parent[static_cast<std::size_t>(std::max(ra, rb))] = std::min(ra, rb);
    }
    std::vector<int> labels(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i)
        labels[static_cast<std::size_t>(i)] = static_cast<int>(find(i));
    Labeling out = make_labeling("agglomerative", std::move(labels),
                                 std::vector<char>(static_cast<std::size_t>(n), 0));
    out.params = {{"k", std::to_string(k)}, {"linkage", "ward"}};
    return out;
}

Labeling agglomerative_ward(const Matrix& X, int k) {
    return ward_dendrogram(X).cut(k);
}

// ---------------------------------------------------------------------------
// Mean shift
// ---------------------------------------------------------------------------

MeanShiftResult mean_shift(const Matrix& X, const MeanShiftOptions& opts) {
    if (opts.bandwidth <= 0.0) throw std::invalid_argument("mean_shift: bandwidth must be positive");
    const Index n = X.rows();
    const double bw2 = opts.bandwidth * opts.bandwidth;

    Matrix raw_modes(n, X.cols());
    std::vector<Index> support(static_cast<std::size_t>(n), 0);
    for (Index s = 0; s < n; ++s) {
        RowVector y = X.row(s);
        Index window = 1;
        for (int iter = 0; iter < opts.max_iter; ++iter) {
            const Vector d2 = squared_distances_to(X, y);
            RowVector mean = RowVector::Zero(X.cols());
            window = 0;
            for (Index j = 0; j < n; ++j) {
                if (d2(j) <= bw2) {
                    mean += X.row(j);
                    ++window;
                }
            }
            mean /= static_cast<double>(window);  // a seed is its own neighbor
            if ((mean - y).norm() < opts.tol) break;
            y = mean;
        }
        raw_modes.row(s) = y;
        support[static_cast<std::size_t>(s)] =
            (squared_distances_to(X, y).array() <= bw2).count();
    }

    // Merge modes closer than the bandwidth; the mode with more points in
    // its window wins, seed index breaking ties.
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
        return support[static_cast<std::size_t>(a)] > support[static_cast<std::size_t>(b)];
    });
    std::vector<Index> accepted;
    for (Index s : order) {
        bool merged = false;
        for (Index kept : accepted) {
            if ((raw_modes.row(s) - raw_modes.row(kept)).squaredNorm() < bw2) {
                merged = true;
                break;
            }
        }
        if (!merged) accepted.push_back(s);
    }

    Matrix modes(static_cast<Index>(accepted.size()), X.cols());
    for (std::size_t m = 0; m < accepted.size(); ++m)
        modes.row(static_cast<Index>(m)) = raw_modes.row(accepted[m]);

    std::vector<int> labels(static_cast<std::size_t>(n), 0);
    for (Index i = 0; i < n; ++i) {
        int best = 0;
        double best_d = (X.row(i) - modes.row(0)).squaredNorm();
        for (Index m = 1; m < modes.rows(); ++m) {
            const double dm = (X.row(i) - modes.row(m)).squaredNorm();
            if (dm < best_d) {
                best_d = dm;
                best = static_cast<int>(m);
            }
        }
        labels[static_cast<std::size_t>(i)] = best;
    }

    MeanShiftResult result;
    std::vector<int> raw_labels = labels;
    result.labeling = make_labeling("mean_shift", std::move(labels),
                                    std::vector<char>(static_cast<std::size_t>(n), 0));
    result.labeling.params = {{"bandwidth", std::to_string(opts.bandwidth)}};

    result.modes.points.resize(modes.rows(), X.cols());
    std::vector<char> seen(static_cast<std::size_t>(modes.rows()) + 1, 0);
    for (Index i = 0; i < n; ++i) {
        const int canonical = result.labeling.labels[static_cast<std::size_t>(i)];
        if (!seen[static_cast<std::size_t>(canonical)]) {
            seen[static_cast<std::size_t>(canonical)] = 1;
            result.modes.points.row(canonical - 1) =
                modes.row(raw_labels[static_cast<std::size_t>(i)]);
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// BIRCH
// ---------------------------------------------------------------------------

namespace {

struct ClusterFeature {
    double n = 0.0;
    Vector linear_sum;
    double squared_sum = 0.0;

    void add_point(const RowVector& x) {
        if (linear_sum.size() == 0) linear_sum = Vector::Zero(x.size());
        n += 1.0;
        linear_sum += x.transpose();
        squared_sum += x.squaredNorm();
    }
    void add(const ClusterFeature& other) {
        if (linear_sum.size() == 0) linear_sum = Vector::Zero(other.linear_sum.size());
        n += other.n;
        linear_sum += other.linear_sum;
        squared_sum += other.squared_sum;
    }
    Vector centroid() const { return linear_sum / n; }
    // RMS distance of the member points from the centroid.
    double radius_with(const RowVector& x) const {
        const double m = n + 1.0;
        Vector ls = linear_sum + x.transpose();
        const double ss = squared_sum + x.squaredNorm();
        const double r2 = ss / m - ls.squaredNorm() / (m * m);
        return std::sqrt(std::max(0.0, r2));
    }
};

struct CfEntry {
    ClusterFeature cf;
    int child = -1;    // node index; -1 for leaf entries
    int leaf_id = -1;  // registration order of leaf entries
};

struct CfNode {
    bool leaf = true;
    std::vector<CfEntry> entries;
};

struct CfTree {
    std::vector<CfNode> nodes;
    int root = -1;
    int next_leaf_id = 0;
    double threshold;
    int branching;

    explicit CfTree(double t, int b) : threshold(t), branching(b) {}

    int nearest_entry(const CfNode& node, const RowVector& x) const {
        int best = 0;
        double best_d = (x.transpose() - node.entries[0].cf.centroid()).squaredNorm();
        for (std::size_t e = 1; e < node.entries.size(); ++e) {
            const double d = (x.transpose() - node.entries[e].cf.centroid()).squaredNorm();
            if (d < best_d) {
                best_d = d;
                best = static_cast<int>(e);
            }
        }
        return best;
    }

    // Splits node `idx` into two by its farthest pair of entry centroids;
    // returns the entry describing the newly created sibling.
    CfEntry split(int idx) {
        CfNode& node = nodes[static_cast<std::size_t>(idx)];
        const std::size_t m = node.entries.size();
        std::size_t seed_a = 0, seed_b = 1;
        double far_d = -1.0;
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = i + 1; j < m; ++j) {
                const double dij =
                    (node.entries[i].cf.centroid() - node.entries[j].cf.centroid()).squaredNorm();
                if (dij > far_d) {
                    far_d = dij;
                    seed_a = i;
                    seed_b = j;
                }
            }
        std::vector<CfEntry> keep, moved;
        const Vector ca = node.entries[seed_a].cf.centroid();
        const Vector cb = node.entries[seed_b].cf.centroid();
        for (std::size_t e = 0; e < m; ++e) {
            const Vector c = node.entries[e].cf.centroid();
            const double da = (c - ca).squaredNorm();
            const double db = (c - cb).squaredNorm();
            if (da <= db)
                keep.push_back(std::move(node.entries[e]));
            else
                moved.push_back(std::move(node.entries[e]));
        }
        node.entries = std::move(keep);
        CfNode sibling;
        sibling.leaf = node.leaf;
        sibling.entries = std::move(moved);
        nodes.push_back(std::move(sibling));

        CfEntry entry;
        entry.child = static_cast<int>(nodes.size()) - 1;
        for (const auto& e : nodes.back().entries) entry.cf.add(e.cf);
        return entry;
    }

    // Returns the leaf entry id that absorbed the point.
    int insert(const RowVector& x) {
        if (root < 0) {
            CfNode leaf;
            CfEntry entry;
            entry.cf.add_point(x);
            entry.leaf_id = next_leaf_id++;
            leaf.entries.push_back(std::move(entry));
            nodes.push_back(std::move(leaf));
            root = 0;
            return 0;
        }

        std::vector<std::pair<int, int>> path;  // (node, entry index)
        int node_idx = root;
        while (!nodes[static_cast<std::size_t>(node_idx)].leaf) {
            const int e = nearest_entry(nodes[static_cast<std::size_t>(node_idx)], x);
            path.emplace_back(node_idx, e);
            node_idx = nodes[static_cast<std::size_t>(node_idx)].entries[static_cast<std::size_t>(e)].child;
        }

        CfNode& leaf = nodes[static_cast<std::size_t>(node_idx)];
        const int nearest = nearest_entry(leaf, x);
        int absorbed_id;
        if (leaf.entries[static_cast<std::size_t>(nearest)].cf.radius_with(x) <= threshold) {
            leaf.entries[static_cast<std::size_t>(nearest)].cf.add_point(x);
            absorbed_id = leaf.entries[static_cast<std::size_t>(nearest)].leaf_id;
        } else {
            CfEntry entry;
            entry.cf.add_point(x);
            entry.leaf_id = next_leaf_id++;
            absorbed_id = entry.leaf_id;
            leaf.entries.push_back(std::move(entry));
        }

        for (auto& [pn, pe] : path)
            nodes[static_cast<std::size_t>(pn)].entries[static_cast<std::size_t>(pe)].cf.add_point(x);

        // Split overflowing nodes bottom-up.
        int child_idx = node_idx;
        int level = static_cast<int>(path.size()) - 1;
        while (static_cast<int>(nodes[static_cast<std::size_t>(child_idx)].entries.size()) > branching) {
            CfEntry sibling = split(child_idx);
            if (level >= 0) {
                auto& [pn, pe] = path[static_cast<std::size_t>(level)];
                // refresh the parent entry's summary for the halved child
                CfEntry& parent_entry =
                    nodes[static_cast<std::size_t>(pn)].entries[static_cast<std::size_t>(pe)];
                parent_entry.cf = ClusterFeature{};
                for (const auto& e : nodes[static_cast<std::size_t>(child_idx)].entries)
                    parent_entry.cf.add(e.cf);
                nodes[static_cast<std::size_t>(pn)].entries.push_back(std::move(sibling));
                child_idx = pn;
                --level;
            } else {
                CfNode new_root;
                new_root.leaf = false;
                CfEntry left;
                left.child = child_idx;
                for (const auto& e : nodes[static_cast<std::size_t>(child_idx)].entries)
                    left.cf.add(e.cf);
                new_root.entries.push_back(std::move(left));
                new_root.entries.push_back(std::move(sibling));
                nodes.push_back(std::move(new_root));
                root = static_cast<int>(nodes.size()) - 1;
                break;
            }
        }
        return absorbed_id;
    }
};

}  // namespace

Labeling birch(const Matrix& X, const BirchOptions& opts) {
    if (opts.threshold <= 0.0) throw std::invalid_argument("birch: threshold must be positive");
    if (opts.branching < 2) throw std::invalid_argument("birch: branching must be >= 2");
    if (opts.k < 1) throw std::invalid_argument("birch: k must be >= 1");

    const Index n = X.rows();
    CfTree tree(opts.threshold, opts.branching);
    std::vector<int> point_entry(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) point_entry[static_cast<std::size_t>(i)] = tree.insert(X.row(i));

    // Leaf CF centroids in registration order, so a degenerate tree
    // reproduces plain k-means on the original rows exactly.
    Matrix centroids(tree.next_leaf_id, X.cols());
    for (const auto& node : tree.nodes) {
        if (!node.leaf) continue;
        for (const auto& entry : node.entries)
            centroids.row(entry.leaf_id) = entry.cf.centroid().transpose();
    }

    const int k_eff = std::min<int>(opts.k, tree.next_leaf_id);
    KmeansOptions km;
    km.k = k_eff;
    km.seed = opts.seed;
    const KmeansResult grouped = kmeans(centroids, km);

    std::vector<int> labels(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i)
        labels[static_cast<std::size_t>(i)] =
            grouped.labeling.labels[static_cast<std::size_t>(point_entry[static_cast<std::size_t>(i)])];

    Labeling out = make_labeling("birch", std::move(labels),
                                 std::vector<char>(static_cast<std::size_t>(n), 0));
    out.seed = opts.seed;
    out.params = {{"k", std::to_string(opts.k)},
                  {"threshold", std::to_string(opts.threshold)},
                  {"branching", std::to_string(opts.branching)}};
    return out;
}

// ---------------------------------------------------------------------------
// Adjusted Rand index
// ---------------------------------------------------------------------------

double adjusted_rand_index(const Labeling& a, const Labeling& b) {
    if (a.size() != b.size())
        throw std::invalid_argument("adjusted_rand_index: labelings differ in length");
    const Index n = a.size();
    const int ka = a.cluster_count() + 1;  // slot 0 holds noise
    const int kb = b.cluster_count() + 1;
    Eigen::MatrixXd table = Eigen::MatrixXd::Zero(ka + 1, kb + 1);
    for (Index i = 0; i < n; ++i) {
        const int ra = a.is_noise(i) ? 0 : a.labels[static_cast<std::size_t>(i)];
        const int rb = b.is_noise(i) ? 0 : b.labels[static_cast<std::size_t>(i)];
        table(ra, rb) += 1.0;
    }
    auto comb2 = [](double m) { return m * (m - 1.0) / 2.0; };
    double sum_cells = 0.0;
    for (Index r = 0; r < table.rows(); ++r)
        for (Index c = 0; c < table.cols(); ++c) sum_cells += comb2(table(r, c));
    double sum_rows = 0.0;
    for (Index r = 0; r < table.rows(); ++r) sum_rows += comb2(table.row(r).sum());
    double sum_cols = 0.0;
    for (Index c = 0; c < table.cols(); ++c) sum_cols += comb2(table.col(c).sum());
    const double total = comb2(static_cast<double>(n));
    const double expected = sum_rows * sum_cols / total;
    const double max_index = 0.5 * (sum_rows + sum_cols);
    if (max_index == expected) return 1.0;  // degenerate: single cluster both sides
    return (sum_cells - expected) / (max_index - expected);
}

}  // namespace clustex
