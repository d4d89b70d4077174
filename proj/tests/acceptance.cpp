// Acceptance gate for the whole pipeline: ten checks, one pass/fail line
// each, nonzero exit when anything fails. Reference results are computed
// here from first principles, independently of the library internals.

#include "clustex/clustering.hpp"
#include "clustex/consensus.hpp"
#include "clustex/csv.hpp"
#include "clustex/dataset.hpp"
#include "clustex/explain.hpp"
#include "clustex/gbm.hpp"
#include "clustex/pipeline.hpp"
#include "clustex/rng.hpp"
#include "clustex/synthetic.hpp"
#include "clustex/validity.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

using namespace clustex;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances, one place.
constexpr double kKmeansObjectiveTol = 1e-9;
constexpr double kValidityRelTol = 1e-12;
constexpr double kStepKlTol = 1e-6;
constexpr double kStepMseTol = 1e-12;
constexpr double kEfficiencyTol = 1e-6;
constexpr double kOrderingsTol = 1e-10;
constexpr double kAdditiveTol = 1e-10;
constexpr double kPfiAnalyticTol = 0.05;
constexpr double kIcePdpTol = 1e-12;
constexpr double kMinBranchAccuracy = 0.95;
constexpr double kClusteringBudgetSeconds = 30.0;
constexpr double kPipelineBudgetSeconds = 300.0;

struct Checker {
    std::vector<std::string> failures;

    void require(bool ok, const std::string& message) {
        if (!ok) failures.push_back(message);
    }
};

double seconds_since(const std::chrono::steady_clock::time_point& start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(double value) {
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%g", value);
    return buffer;
}

// ---------------------------------------------------------------------------
// criterion 1: clustering oracles
// ---------------------------------------------------------------------------

// Textbook DBSCAN: core points by self-inclusive neighborhood count,
// clusters = connected components of the core graph, borders join the
// lowest-index core that reaches them, labels renumbered by first
// occurrence in sample order.
Labeling reference_dbscan(const Matrix& X, double eps, int min_pts) {
    const Index n = X.rows();
    std::vector<std::vector<Index>> within(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j)
            if ((X.row(i) - X.row(j)).norm() <= eps)
                within[static_cast<std::size_t>(i)].push_back(j);

    std::vector<char> core(static_cast<std::size_t>(n), 0);
    for (Index i = 0; i < n; ++i)
        core[static_cast<std::size_t>(i)] =
            static_cast<int>(within[static_cast<std::size_t>(i)].size()) >= min_pts;

    std::vector<int> component(static_cast<std::size_t>(n), -1);
    int components = 0;
    for (Index s = 0; s < n; ++s) {
        if (!core[static_cast<std::size_t>(s)] || component[static_cast<std::size_t>(s)] >= 0)
            continue;
        const int id = components++;
        std::deque<Index> frontier{s};
        component[static_cast<std::size_t>(s)] = id;
        while (!frontier.empty()) {
            const Index at = frontier.front();
            frontier.pop_front();
            for (Index neighbor : within[static_cast<std::size_t>(at)]) {
                if (!core[static_cast<std::size_t>(neighbor)]) continue;
                if (component[static_cast<std::size_t>(neighbor)] >= 0) continue;
                component[static_cast<std::size_t>(neighbor)] = id;
                frontier.push_back(neighbor);
            }
        }
    }

    std::vector<int> raw(static_cast<std::size_t>(n), -1);
    for (Index i = 0; i < n; ++i) {
        if (core[static_cast<std::size_t>(i)]) {
            raw[static_cast<std::size_t>(i)] = component[static_cast<std::size_t>(i)];
            continue;
        }
        for (Index neighbor : within[static_cast<std::size_t>(i)]) {
            if (core[static_cast<std::size_t>(neighbor)]) {
                raw[static_cast<std::size_t>(i)] = component[static_cast<std::size_t>(neighbor)];
                break;  // neighbor lists ascend, so this is the lowest index
            }
        }
    }

    Labeling labeling;
    labeling.algorithm = "reference_dbscan";
    std::map<int, int> renumber;
    for (Index i = 0; i < n; ++i) {
        const int id = raw[static_cast<std::size_t>(i)];
        if (id < 0) {
            labeling.labels.push_back(0);
            labeling.noise.push_back(1);
            continue;
        }
        if (!renumber.count(id)) renumber[id] = static_cast<int>(renumber.size()) + 1;
        labeling.labels.push_back(renumber[id]);
        labeling.noise.push_back(0);
    }
    return labeling;
}

// Global k-means optimum by scanning every assignment of N points to k
// clusters, using ESS = sum |x|^2 - sum_c |sum_c|^2 / n_c.
double exhaustive_kmeans_objective(const Matrix& X, int k) {
    const Index n = X.rows();
    double total_sq = 0.0;
    for (Index i = 0; i < n; ++i) total_sq += X.row(i).squaredNorm();

    long combos = 1;
    for (Index i = 0; i < n; ++i) combos *= k;

    double best = 1e300;
    std::vector<int> assign(static_cast<std::size_t>(n), 0);
    for (long code = 0; code < combos; ++code) {
        long rest = code;
        for (Index i = 0; i < n; ++i) {
            assign[static_cast<std::size_t>(i)] = static_cast<int>(rest % k);
            rest /= k;
        }
        Matrix sums = Matrix::Zero(k, X.cols());
        std::vector<Index> counts(static_cast<std::size_t>(k), 0);
        for (Index i = 0; i < n; ++i) {
            sums.row(assign[static_cast<std::size_t>(i)]) += X.row(i);
            ++counts[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])];
        }
        double objective = total_sq;
        for (int c = 0; c < k; ++c)
            if (counts[static_cast<std::size_t>(c)] > 0)
                objective -= sums.row(c).squaredNorm() /
                             static_cast<double>(counts[static_cast<std::size_t>(c)]);
        best = std::min(best, objective);
    }
    return best;
}

void criterion_clustering(Checker& check) {
    const auto start = std::chrono::steady_clock::now();

    Rng rng(101);
    for (int trial = 0; trial < 200; ++trial) {
        const Index n = 5 + static_cast<Index>(rng.next_below(46));
        const Index p = 1 + static_cast<Index>(rng.next_below(6));
        Matrix X(n, p);
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < p; ++j) X(i, j) = rng.next_double(0.0, 2.0);
        DbscanOptions opts;
        opts.eps = rng.next_double(0.2, 1.2);
        opts.min_pts = 1 + static_cast<int>(rng.next_below(6));

        const Labeling got = dbscan(X, opts);
        const Labeling want = reference_dbscan(X, opts.eps, opts.min_pts);
        if (got.labels != want.labels || got.noise != want.noise) {
            check.require(false, "dbscan diverges from brute force on trial " +
                                     std::to_string(trial));
            break;
        }
    }

    Rng km_rng(202);
    for (int trial = 0; trial < 100; ++trial) {
        const Index n = 4 + static_cast<Index>(km_rng.next_below(5));
        const int k = 2 + static_cast<int>(km_rng.next_below(2));
        const Index p = 1 + static_cast<Index>(km_rng.next_below(2));
        Matrix X(n, p);
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < p; ++j) X(i, j) = km_rng.next_double(0.0, 4.0);

        KmeansOptions opts;
        opts.k = k;
        opts.n_init = 200;  // tiny instances; enough restarts to reach the optimum
        opts.seed = static_cast<std::uint64_t>(trial);
        const double got = kmeans(X, opts).objective;
        const double want = exhaustive_kmeans_objective(X, k);
        if (std::abs(got - want) > kKmeansObjectiveTol) {
            check.require(false, "kmeans objective " + fmt(got) + " vs optimum " + fmt(want) +
                                     " on trial " + std::to_string(trial));
            break;
        }
    }

    Matrix six(6, 1);
    six << 0.0, 1.0, 10.0, 10.5, 20.0, 26.0;
    const WardDendrogram dendrogram = ward_dendrogram(six);
    check.require(dendrogram.merges.size() == 5, "ward merge count");
    if (!dendrogram.merges.empty()) {
        // nearest singletons are rows 2 and 3; fusing points d apart costs d^2/2
        check.require(dendrogram.merges[0].first == 2 && dendrogram.merges[0].second == 3,
                      "ward first merge pair");
        check.require(std::abs(dendrogram.merges[0].height - 0.125) <= 1e-12,
                      "ward first merge height " + fmt(dendrogram.merges[0].height));
        for (std::size_t m = 1; m < dendrogram.merges.size(); ++m)
            check.require(dendrogram.merges[m].height >= dendrogram.merges[m - 1].height - 1e-12,
                          "ward heights must not decrease");
    }

    const double elapsed = seconds_since(start);
    check.require(elapsed < kClusteringBudgetSeconds,
                  "clustering oracles took " + fmt(elapsed) + " s");
}

// ---------------------------------------------------------------------------
// criterion 2: validity-index oracles
// ---------------------------------------------------------------------------

double reference_silhouette(const Matrix& X, const Labeling& labeling) {
    const Index n = X.rows();
    const int k = labeling.cluster_count();
    double total = 0.0;
    Index counted = 0;
    for (Index i = 0; i < n; ++i) {
        if (labeling.is_noise(i)) continue;
        ++counted;
        const int own = labeling.labels[static_cast<std::size_t>(i)];
        std::vector<double> dist_sum(static_cast<std::size_t>(k) + 1, 0.0);
        std::vector<Index> members(static_cast<std::size_t>(k) + 1, 0);
        for (Index j = 0; j < n; ++j) {
            if (j == i || labeling.is_noise(j)) continue;
            const int c = labeling.labels[static_cast<std::size_t>(j)];
            dist_sum[static_cast<std::size_t>(c)] += (X.row(i) - X.row(j)).norm();
            ++members[static_cast<std::size_t>(c)];
        }
        if (members[static_cast<std::size_t>(own)] == 0) continue;  // singleton scores 0
        const double a = dist_sum[static_cast<std::size_t>(own)] /
                         static_cast<double>(members[static_cast<std::size_t>(own)]);
        double b = 1e300;
        for (int c = 1; c <= k; ++c) {
            if (c == own || members[static_cast<std::size_t>(c)] == 0) continue;
            b = std::min(b, dist_sum[static_cast<std::size_t>(c)] /
                                static_cast<double>(members[static_cast<std::size_t>(c)]));
        }
        total += (b - a) / std::max(a, b);
    }
    return total / static_cast<double>(counted);
}

double reference_calinski_harabasz(const Matrix& X, const Labeling& labeling) {
    const int k = labeling.cluster_count();
    std::vector<Index> rows;
    for (Index i = 0; i < X.rows(); ++i)
        if (!labeling.is_noise(i)) rows.push_back(i);
    const auto n = static_cast<Index>(rows.size());

    RowVector grand = RowVector::Zero(X.cols());
    for (Index i : rows) grand += X.row(i);
    grand /= static_cast<double>(n);

    Matrix means = Matrix::Zero(k, X.cols());
    std::vector<Index> counts(static_cast<std::size_t>(k), 0);
    for (Index i : rows) {
        const int c = labeling.labels[static_cast<std::size_t>(i)];
        means.row(c - 1) += X.row(i);
        ++counts[static_cast<std::size_t>(c - 1)];
    }
    for (int c = 0; c < k; ++c) means.row(c) /= static_cast<double>(counts[static_cast<std::size_t>(c)]);

    double within = 0.0, between = 0.0;
    for (Index i : rows) {
        const int c = labeling.labels[static_cast<std::size_t>(i)];
        within += (X.row(i) - means.row(c - 1)).squaredNorm();
    }
    for (int c = 0; c < k; ++c)
        between += static_cast<double>(counts[static_cast<std::size_t>(c)]) *
                   (means.row(c) - grand).squaredNorm();
    if (within == 0.0) return kCalinskiHarabaszCap;
    return (between / (k - 1)) / (within / static_cast<double>(n - k));
}

void criterion_validity(Checker& check) {
    Rng rng(303);
    for (int trial = 0; trial < 60; ++trial) {
        const Index n = 6 + static_cast<Index>(rng.next_below(25));
        const Index p = 1 + static_cast<Index>(rng.next_below(4));
        const int k = 2 + static_cast<int>(rng.next_below(3));
        Matrix X(n, p);
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < p; ++j) X(i, j) = rng.next_double(0.0, 3.0);
        Labeling labeling;
        labeling.algorithm = "fixture";
        for (Index i = 0; i < n; ++i) {
            // the first 2k rows never drop out, so the non-noise count
            // stays safely above k and both indices remain defined
            const bool noise = i >= 2 * k && rng.next_below(8) == 0;
            const int label = i < k ? static_cast<int>(i) + 1
                                    : 1 + static_cast<int>(rng.next_below(k));
            labeling.labels.push_back(noise ? 0 : label);
            labeling.noise.push_back(noise ? 1 : 0);
        }

        const double s_got = silhouette(X, labeling);
        const double s_want = reference_silhouette(X, labeling);
        if (std::abs(s_got - s_want) > kValidityRelTol * std::max(1.0, std::abs(s_want))) {
            check.require(false, "silhouette " + fmt(s_got) + " vs reference " + fmt(s_want));
            break;
        }
        const double ch_got = calinski_harabasz(X, labeling);
        const double ch_want = reference_calinski_harabasz(X, labeling);
        if (std::abs(ch_got - ch_want) > kValidityRelTol * std::max(1.0, std::abs(ch_want))) {
            check.require(false,
                          "calinski-harabasz " + fmt(ch_got) + " vs reference " + fmt(ch_want));
            break;
        }
    }

    Matrix hand(4, 1);
    hand << 0.0, 0.1, 10.0, 10.1;
    Labeling pairs;
    pairs.algorithm = "fixture";
    pairs.labels = {1, 1, 2, 2};
    pairs.noise = {0, 0, 0, 0};
    const double s = silhouette(hand, pairs);
    // outer points: a=0.1, b=10.05; inner points: a=0.1, b=9.95
    const double hand_expected = ((10.05 - 0.1) / 10.05 + (9.95 - 0.1) / 9.95) / 2.0;
    check.require(std::abs(s - hand_expected) <= kValidityRelTol,
                  "hand silhouette " + fmt(s) + " != " + fmt(hand_expected));
    check.require(std::abs(s - 0.990) <= 1e-3, "hand silhouette not ~0.990");
    const double ch = calinski_harabasz(hand, pairs);
    check.require(std::abs(ch - 20000.0) <= kValidityRelTol * 20000.0,
                  "hand calinski-harabasz " + fmt(ch) + " != 20000");
}

// ---------------------------------------------------------------------------
// criterion 3 (and 8): full pipeline on the seeded synthetic study
// ---------------------------------------------------------------------------

struct PipelineRuns {
    fs::path root;
    std::string features_csv;
    PipelineConfig config;
    fs::path run_a;
    bool ran_a = false;
    double run_a_seconds = 0.0;
};

PipelineRuns g_runs;

void ensure_run_a() {
    if (g_runs.ran_a) return;
    g_runs.root = fs::temp_directory_path() / "clustex_acceptance";
    fs::remove_all(g_runs.root);
    fs::create_directories(g_runs.root / "input");

    const SyntheticData data = generate_synthetic(default_synthetic_spec());
    g_runs.features_csv = (g_runs.root / "input" / "features.csv").string();
    features_to_csv(data.features, g_runs.features_csv);

    g_runs.config = PipelineConfig{};
    g_runs.config.features_path = g_runs.features_csv;
    g_runs.run_a = g_runs.root / "run_a";
    g_runs.config.out_dir = g_runs.run_a.string();

    const auto start = std::chrono::steady_clock::now();
    run_pipeline(g_runs.config);
    g_runs.run_a_seconds = seconds_since(start);
    g_runs.ran_a = true;
}

std::size_t column_of(const csv::Table& table, const std::string& name) {
    for (std::size_t c = 0; c < table.header.size(); ++c)
        if (table.header[c] == name) return c;
    throw std::runtime_error("column " + name + " not found");
}

void criterion_pipeline(Checker& check) {
    ensure_run_a();
    const fs::path run = g_runs.run_a;

    std::ifstream selection_in(run / "select" / "selection.json");
    const nlohmann::json selection = nlohmann::json::parse(selection_in);
    for (const std::string algorithm : {"kmeans", "agglomerative", "birch", "dbscan", "mean_shift"}) {
        const int k = selection.at(algorithm).at("k").get<int>();
        check.require(k == 2, algorithm + " selected " + std::to_string(k) + " clusters");
    }

    const csv::Table accuracy = csv::read_file((run / "fit" / "accuracy.csv").string());
    const std::size_t acc_col = column_of(accuracy, "accuracy");
    const std::size_t alg_col = column_of(accuracy, "algorithm");
    check.require(accuracy.rows.size() == 5, "accuracy table rows");
    for (const auto& row : accuracy.rows) {
        const double value = std::stod(row[acc_col]);
        check.require(value >= kMinBranchAccuracy,
                      row[alg_col] + " test accuracy " + fmt(value));
    }

    const csv::Table voted = csv::read_file((run / "report" / "table_voted_means.csv").string());
    const std::size_t grand_col = column_of(voted, "grand_mean");
    const std::size_t cluster_col = column_of(voted, "cluster");
    double grand_1 = 0.0, grand_2 = 0.0;
    for (const auto& row : voted.rows) {
        if (row[cluster_col] == "1") grand_1 = std::stod(row[grand_col]);
        if (row[cluster_col] == "2") grand_2 = std::stod(row[grand_col]);
    }
    check.require(grand_1 > grand_2, "voted grand means " + fmt(grand_1) + " vs " + fmt(grand_2));

    const std::string dominant = "OSC3";
    const auto best_in_column = [&](const std::string& table_name, bool lower_is_better) {
        const csv::Table table = csv::read_file((run / "report" / table_name).string());
        const std::size_t feature_col = column_of(table, "feature");
        for (std::size_t c = 1; c < table.header.size(); ++c) {
            double dominant_value = 0.0;
            bool dominant_seen = false;
            for (const auto& row : table.rows)
                if (row[feature_col] == dominant) {
                    dominant_value = std::stod(row[c]);
                    dominant_seen = true;
                }
            check.require(dominant_seen, table_name + " lacks the dominant feature row");
            for (const auto& row : table.rows) {
                if (row[feature_col] == dominant) continue;
                const double other = std::stod(row[c]);
                const bool wins =
                    lower_is_better ? dominant_value < other : dominant_value > other;
                check.require(wins, table_name + " column " + table.header[c] + ": " + dominant +
                                        "=" + fmt(dominant_value) + " vs " + row[feature_col] +
                                        "=" + fmt(other));
            }
        }
    };
    best_in_column("table_qpdp_kl.csv", true);
    best_in_column("table_shap.csv", false);
    best_in_column("table_pfi.csv", false);

    check.require(g_runs.run_a_seconds < kPipelineBudgetSeconds,
                  "pipeline run took " + fmt(g_runs.run_a_seconds) + " s");
}

// ---------------------------------------------------------------------------
// criterion 4: qpdp scan correctness
// ---------------------------------------------------------------------------

struct StepScan {
    double min_kl = 1e4;
    StepDirection kl_direction = StepDirection::rising;
    double kl_truncation = 0.0;
    double min_mse = 1e4;
    StepDirection mse_direction = StepDirection::rising;
    double mse_truncation = 0.0;
};

StepScan reference_step_scan(const Vector& unit_grid, const Vector& mass, double epsilon) {
    StepScan best;
    const Index g_count = unit_grid.size();
    for (const StepDirection direction : {StepDirection::rising, StepDirection::falling}) {
        for (Index t = 1; t < g_count; ++t) {
            const double cut = unit_grid(t);
            Vector step = Vector::Zero(g_count);
            Index covered = 0;
            for (Index g = 0; g < g_count; ++g) {
                const bool in =
                    direction == StepDirection::rising ? unit_grid(g) >= cut : unit_grid(g) < cut;
                if (in) {
                    step(g) = 1.0;
                    ++covered;
                }
            }
            step /= static_cast<double>(covered);
            double kl = 0.0;
            for (Index g = 0; g < g_count; ++g)
                kl += step(g) * std::log((step(g) + epsilon) / (mass(g) + epsilon));
            // Eigen's reduction order, so exact equality with the library
            // is meaningful even where candidates tie to the last bit
            const double mse = (step - mass).squaredNorm();
            if (kl < best.min_kl) {
                best.min_kl = kl;
                best.kl_direction = direction;
                best.kl_truncation = cut;
            }
            if (mse < best.min_mse) {
                best.min_mse = mse;
                best.mse_direction = direction;
                best.mse_truncation = cut;
            }
        }
    }
    return best;
}

void criterion_qpdp(Checker& check) {
    Rng rng(404);
    for (int trial = 0; trial < 100; ++trial) {
        const int g_count = 5 + static_cast<int>(rng.next_below(46));
        PartialDependenceCurve curve;
        curve.feature = trial;
        curve.grid.resize(g_count);
        curve.pd.resize(g_count);
        double at = rng.next_double(0.0, 2.0);
        for (int g = 0; g < g_count; ++g) {
            curve.grid(g) = at;
            at += rng.next_double(0.05, 0.5);
            curve.pd(g) = rng.next_double(0.001, 1.0);
        }
        const QpdpFeatureScore got = qpdp_from_curve(curve, 1e-8);
        const StepScan want = reference_step_scan(got.nppd.grid, got.nppd.mass, 1e-8);
        const bool match = got.min_kl == want.min_kl && got.kl_direction == want.kl_direction &&
                           got.kl_truncation == want.kl_truncation &&
                           got.min_mse == want.min_mse &&
                           got.mse_direction == want.mse_direction &&
                           got.mse_truncation == want.mse_truncation;
        if (!match) {
            check.require(false, "qpdp scan mismatch on trial " + std::to_string(trial));
            break;
        }
    }

    Rng data_rng(405);
    Matrix X(300, 3);
    for (Index i = 0; i < X.rows(); ++i)
        for (int j = 0; j < 3; ++j) X(i, j) = data_rng.next_double();
    X(0, 1) = 0.0;
    X(1, 1) = 1.0;  // pin the scanned feature's range to [0,1]
    const ResponseFn step_response = [](const RowVector& row) {
        return row(1) > 0.4 ? 1.0 : 0.0;
    };
    const QpdpFeatureScore score = qpdp_from_curve(pdp(step_response, X, 1, 50), 1e-8);
    const double cell = 1.0 / 49.0;
    check.require(score.min_kl <= kStepKlTol, "step model min KL " + fmt(score.min_kl));
    check.require(score.min_mse <= kStepMseTol, "step model min MSE " + fmt(score.min_mse));
    check.require(std::abs(score.kl_truncation - 0.4) <= cell,
                  "KL truncation " + fmt(score.kl_truncation) + " not within one cell of 0.4");
    check.require(std::abs(score.mse_truncation - 0.4) <= cell,
                  "MSE truncation " + fmt(score.mse_truncation) + " not within one cell of 0.4");

    Vector unit_grid(21), uniform_mass(21);
    for (int g = 0; g < 21; ++g) {
        unit_grid(g) = g / 20.0;
        uniform_mass(g) = 1.0 / 21.0;
    }
    const StepPdf degenerate = make_step_pdf(unit_grid, StepDirection::rising, 0.0);
    const double kl = kl_divergence(degenerate.mass, uniform_mass, 1e-8);
    check.require(kl <= kStepKlTol, "uniform nppd vs degenerate step KL " + fmt(kl));
}

// ---------------------------------------------------------------------------
// criterion 5: shapley axioms and the orderings oracle
// ---------------------------------------------------------------------------

Vector ordering_shapley(const ResponseFn& response, const Matrix& background,
                        const RowVector& x) {
    const int p = static_cast<int>(x.size());
    std::vector<double> value(std::size_t{1} << p);
    RowVector probe(p);
    for (std::uint32_t mask = 0; mask < value.size(); ++mask) {
        double sum = 0.0;
        for (Index b = 0; b < background.rows(); ++b) {
            probe = background.row(b);
            for (int i = 0; i < p; ++i)
                if (mask & (1u << i)) probe(i) = x(i);
            sum += response(probe);
        }
        value[mask] = sum / static_cast<double>(background.rows());
    }

    std::vector<int> order(static_cast<std::size_t>(p));
    std::iota(order.begin(), order.end(), 0);
    Vector totals = Vector::Zero(p);
    std::size_t permutations = 0;
    do {
        std::uint32_t mask = 0;
        for (int i : order) {
            const std::uint32_t with = mask | (1u << i);
            totals(i) += value[with] - value[mask];
            mask = with;
        }
        ++permutations;
    } while (std::next_permutation(order.begin(), order.end()));
    return totals / static_cast<double>(permutations);
}

BoostedModel random_small_model(Rng& rng, Index n, int p, Matrix* X_out) {
    Matrix X(n, p);
    for (Index i = 0; i < n; ++i)
        for (int j = 0; j < p; ++j) X(i, j) = rng.next_double(1.0, 5.0);
    std::vector<int> y(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        double s = 0.0;
        for (int j = 0; j < p; ++j) s += (j + 1) * X(i, j);
        y[static_cast<std::size_t>(i)] = s > 3.0 * p ? 2 : 1;
    }
    bool both = false;
    for (int label : y) both = both || label != y[0];
    if (!both) y[0] = 3 - y[0];
    GbmOptions opts;
    opts.n_trees = 10;
    opts.max_depth = 3;
    if (X_out) *X_out = X;
    return fit_gbm(X, y, opts);
}

void criterion_shapley(Checker& check) {
    Rng rng(505);
    for (int trial = 0; trial < 100; ++trial) {
        const int p = 2 + static_cast<int>(rng.next_below(4));
        Matrix X;
        const BoostedModel model = random_small_model(rng, 30, p, &X);
        const Matrix background = X.topRows(10);
        const RowVector x = X.row(static_cast<Index>(rng.next_below(30)));
        const ShapleyAttribution attribution = shapley(model, background, x);
        const double gap =
            std::abs(attribution.values.sum() - (attribution.prediction - attribution.baseline));
        if (gap > kEfficiencyTol) {
            check.require(false, "efficiency gap " + fmt(gap) + " on trial " +
                                     std::to_string(trial));
            break;
        }
    }

    Rng dummy_rng(506);
    Matrix background(12, 5);
    for (Index i = 0; i < 12; ++i)
        for (int j = 0; j < 5; ++j) background(i, j) = dummy_rng.next_double();
    const ResponseFn partial = [](const RowVector& row) {
        return row(0) + 2.0 * row(2) * row(3);  // features 1 and 4 unused
    };
    RowVector x(5);
    for (int j = 0; j < 5; ++j) x(j) = dummy_rng.next_double();
    const ShapleyAttribution dummy_attribution = shapley(partial, background, x);
    check.require(dummy_attribution.values(1) == 0.0,
                  "dummy feature 1 got " + fmt(dummy_attribution.values(1)));
    check.require(dummy_attribution.values(4) == 0.0,
                  "dummy feature 4 got " + fmt(dummy_attribution.values(4)));

    Rng order_rng(507);
    Matrix small_background(8, 6);
    for (Index i = 0; i < 8; ++i)
        for (int j = 0; j < 6; ++j) small_background(i, j) = order_rng.next_double();
    const ResponseFn nonlinear = [](const RowVector& row) {
        return row(0) * row(1) + std::sin(row(2)) + 0.5 * row(3) * row(4) * row(5) + row(5);
    };
    for (int trial = 0; trial < 3; ++trial) {
        RowVector probe(6);
        for (int j = 0; j < 6; ++j) probe(j) = order_rng.next_double();
        const ShapleyAttribution got = shapley(nonlinear, small_background, probe);
        const Vector want = ordering_shapley(nonlinear, small_background, probe);
        for (int j = 0; j < 6; ++j)
            check.require(std::abs(got.values(j) - want(j)) <= kOrderingsTol,
                          "orderings oracle feature " + std::to_string(j) + ": " +
                              fmt(got.values(j)) + " vs " + fmt(want(j)));
    }

    Rng additive_rng(508);
    Matrix additive_background(15, 4);
    for (Index i = 0; i < 15; ++i)
        for (int j = 0; j < 4; ++j) additive_background(i, j) = additive_rng.next_double();
    RowVector weights(4), sample(4);
    for (int j = 0; j < 4; ++j) {
        weights(j) = additive_rng.next_double(-2.0, 2.0);
        sample(j) = additive_rng.next_double();
    }
    const ResponseFn additive = [&weights](const RowVector& row) {
        return 3.0 + weights.dot(row);
    };
    const ShapleyAttribution additive_attribution = shapley(additive, additive_background, sample);
    for (int j = 0; j < 4; ++j) {
        const double expected = weights(j) * (sample(j) - additive_background.col(j).mean());
        check.require(std::abs(additive_attribution.values(j) - expected) <= kAdditiveTol,
                      "additive closed form feature " + std::to_string(j));
    }
}

// ---------------------------------------------------------------------------
// criterion 6: permutation feature importance
// ---------------------------------------------------------------------------

void criterion_pfi(Checker& check) {
    Rng rng(606);
    const Index n = 200;
    Matrix X(n, 3);
    std::vector<int> y(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        X(i, 0) = (i % 2 == 0) ? rng.next_double(0.0, 0.45) : rng.next_double(0.55, 1.0);
        X(i, 1) = rng.next_double();
        X(i, 2) = rng.next_double();
        y[static_cast<std::size_t>(i)] = X(i, 0) > 0.5 ? 2 : 1;
    }
    const LabelPredictor indicator = [](const Matrix& rows) {
        std::vector<int> out(static_cast<std::size_t>(rows.rows()));
        for (Index i = 0; i < rows.rows(); ++i)
            out[static_cast<std::size_t>(i)] = rows(i, 0) > 0.5 ? 2 : 1;
        return out;
    };

    const PfiResult result = pfi(indicator, X, y, 30, 17);
    check.require(result.baseline == 1.0, "indicator baseline " + fmt(result.baseline));
    check.require(result.mean(1) == 0.0 && result.stddev(1) == 0.0,
                  "unused feature 1 importance " + fmt(result.mean(1)) + " +- " +
                      fmt(result.stddev(1)));
    check.require(result.mean(2) == 0.0 && result.stddev(2) == 0.0,
                  "unused feature 2 importance " + fmt(result.mean(2)) + " +- " +
                      fmt(result.stddev(2)));
    // half the rows sit on each side, so a permuted value stays on the
    // correct side with probability 1/2 and the expected drop is 0.5
    check.require(std::abs(result.mean(0) - 0.5) <= kPfiAnalyticTol,
                  "indicator importance " + fmt(result.mean(0)) + " vs analytic 0.5");
}

// ---------------------------------------------------------------------------
// criterion 7: voting semantics
// ---------------------------------------------------------------------------

void criterion_voting(Checker& check) {
    AlignedLabelings worked;
    worked.algorithms = {"a1", "a2", "a3", "a4", "a5"};
    worked.columns = {{1}, {1}, {2}, {1}, {1}};
    worked.swapped = {0, 0, 0, 0, 0};
    Matrix lone(1, 1);
    lone << 0.0;
    const ConsensusLabeling consensus = majority_vote(worked, lone);
    check.require(consensus.labels == std::vector<int>{1}, "worked example vote");
    check.require(consensus.votes_1 == std::vector<int>{4} &&
                      consensus.votes_2 == std::vector<int>{1},
                  "worked example tally");

    Rng rng(707);
    for (int trial = 0; trial < 1000; ++trial) {
        const Index n = 1 + static_cast<Index>(rng.next_below(12));
        Matrix X(n, 2);
        for (Index i = 0; i < n; ++i)
            for (int j = 0; j < 2; ++j) X(i, j) = rng.next_double(0.0, 4.0);

        AlignedLabelings aligned;
        aligned.swapped.assign(5, 0);
        for (int a = 0; a < 5; ++a) {
            aligned.algorithms.push_back("a" + std::to_string(a));
            std::vector<int> column(static_cast<std::size_t>(n));
            for (Index i = 0; i < n; ++i)
                column[static_cast<std::size_t>(i)] =
                    a == 0 ? 1 + static_cast<int>(rng.next_below(2))
                           : static_cast<int>(rng.next_below(3));
            aligned.columns.push_back(std::move(column));
        }

        const ConsensusLabeling base = majority_vote(aligned, X);

        AlignedLabelings shuffled = aligned;
        std::vector<std::size_t> order = {0, 1, 2, 3, 4};
        rng.shuffle(order);
        for (std::size_t a = 0; a < 5; ++a) shuffled.columns[a] = aligned.columns[order[a]];
        const ConsensusLabeling permuted = majority_vote(shuffled, X);
        if (base.labels != permuted.labels) {
            check.require(false, "column order changed the vote on trial " +
                                     std::to_string(trial));
            break;
        }
    }

    Rng flip_rng(708);
    for (int trial = 0; trial < 1000; ++trial) {
        const Index n = 4 + static_cast<Index>(flip_rng.next_below(17));
        const Index p = 1 + static_cast<Index>(flip_rng.next_below(3));
        Matrix X(n, p);
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < p; ++j) X(i, j) = flip_rng.next_double(0.0, 4.0);

        std::vector<Labeling> raw(3);
        for (std::size_t a = 0; a < raw.size(); ++a) {
            raw[a].algorithm = "a" + std::to_string(a);
            for (Index i = 0; i < n; ++i) {
                int label = i < 2 ? static_cast<int>(i) + 1
                                  : 1 + static_cast<int>(flip_rng.next_below(2));
                bool noise = a > 0 && i >= 2 && flip_rng.next_below(10) == 0;
                raw[a].labels.push_back(noise ? 0 : label);
                raw[a].noise.push_back(noise ? 1 : 0);
            }
        }

        std::vector<Labeling> flipped = raw;
        for (auto& labeling : flipped)
            for (std::size_t i = 0; i < labeling.labels.size(); ++i)
                if (!labeling.noise[i]) labeling.labels[i] = 3 - labeling.labels[i];

        const ConsensusLabeling base = majority_vote(align_labels(raw, X), X);
        const ConsensusLabeling swapped = majority_vote(align_labels(flipped, X), X);
        if (base.labels != swapped.labels) {
            check.require(false, "label swap changed the vote on trial " +
                                     std::to_string(trial));
            break;
        }
    }
}

// ---------------------------------------------------------------------------
// criterion 8: determinism of full runs
// ---------------------------------------------------------------------------

void criterion_determinism(Checker& check) {
    ensure_run_a();
    PipelineConfig config_b = g_runs.config;
    const fs::path run_b = g_runs.root / "run_b";
    config_b.out_dir = run_b.string();
    fs::remove_all(run_b);
    run_pipeline(config_b);

    const auto relative_files = [](const fs::path& root) {
        std::set<std::string> files;
        for (const auto& entry : fs::recursive_directory_iterator(root))
            if (entry.is_regular_file())
                files.insert(fs::relative(entry.path(), root).generic_string());
        return files;
    };
    const std::set<std::string> files_a = relative_files(g_runs.run_a);
    const std::set<std::string> files_b = relative_files(run_b);
    check.require(files_a == files_b, "run directories hold different file sets");
    check.require(!files_a.empty(), "run directory is empty");

    const auto read_all = [](const fs::path& path) {
        std::ifstream in(path, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(in),
                           std::istreambuf_iterator<char>());
    };
    for (const std::string& rel : files_a) {
        if (!files_b.count(rel)) continue;
        if (read_all(g_runs.run_a / rel) != read_all(run_b / rel)) {
            check.require(false, "file differs between runs: " + rel);
            break;
        }
    }
}

// ---------------------------------------------------------------------------
// criterion 9: ice/pdp identity
// ---------------------------------------------------------------------------

void criterion_ice_pdp(Checker& check) {
    Rng rng(909);
    for (int trial = 0; trial < 4; ++trial) {
        const int p = 2 + trial % 3;
        Matrix X;
        const BoostedModel model = random_small_model(rng, 50, p, &X);
        for (int f = 0; f < p; ++f) {
            const PartialDependenceCurve curve = pdp(model, X, f, 20);
            const IceBundle bundle = ice(model, X, f, 20);
            for (int g = 0; g < 20; ++g) {
                const double gap = std::abs(bundle.lines.col(g).mean() - curve.pd(g));
                if (gap > kIcePdpTol) {
                    check.require(false, "ICE mean deviates from PDP by " + fmt(gap));
                    return;
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// criterion 10: data-preparation rules
// ---------------------------------------------------------------------------

void criterion_data_prep(Checker& check) {
    check.require(lower_median({1, 2, 3, 4}) == 2, "lower median of {1,2,3,4}");
    check.require(lower_median({3, 1, 2}) == 2, "lower median of {3,1,2}");
    check.require(lower_median({5}) == 5, "lower median of {5}");
    check.require(lower_median({4, 1}) == 1, "lower median of {4,1}");

    SurveyTable survey;
    for (int item = 1; item <= 94; ++item) survey.item_names.push_back("I" + std::to_string(item));
    survey.respondent_ids = {"A", "B", "C", "D"};
    survey.items.assign(4, std::vector<std::optional<int>>(94, 3));
    for (int c = 0; c < 9; ++c) survey.items[0][static_cast<std::size_t>(c)].reset();
    for (int c = 0; c < 10; ++c) survey.items[1][static_cast<std::size_t>(c)].reset();
    survey.items[2][0] = 4;
    survey.items[3][0] = 1;

    const FilterReport filtered = filter_incomplete(survey, 0.10);
    check.require(filtered.dropped == 1 && filtered.retained == 3,
                  "filter kept " + std::to_string(filtered.retained) + ", dropped " +
                      std::to_string(filtered.dropped));
    check.require(filtered.table.respondent_ids ==
                      std::vector<std::string>{"A", "C", "D"},
                  "9/94 missing must survive the 10% threshold, 10/94 must not");
    check.require(filtered.table.missing_in_row(0) == 9, "kept row still has its gaps");

    const SurveyTable imputed = impute_median(filtered.table);
    for (Index r = 0; r < imputed.rows(); ++r)
        check.require(imputed.missing_in_row(r) == 0, "imputation left gaps");
    // item I1 is present as {4, 1}: even count takes the lower middle, 1
    check.require(imputed.items[0][0] == 1,
                  "imputed I1 = " + std::to_string(imputed.items[0][0].value_or(-1)));
    // items I2..I9 are present only as {3, 3}, so the gap fills with 3
    check.require(imputed.items[0][4] == 3, "imputed I5");
    // after the drop, rows C and D sit at indices 1 and 2
    check.require(imputed.items[1][0] == 4 && imputed.items[2][0] == 1,
                  "present cells must never change");
}

}  // namespace

int main() {
    struct Criterion {
        int number;
        std::string name;
        std::function<void(Checker&)> body;
    };
    const std::vector<Criterion> criteria = {
        {1, "clustering oracle equivalence", criterion_clustering},
        {2, "validity-index oracles", criterion_validity},
        {3, "pipeline structural reproduction on synthetic data", criterion_pipeline},
        {4, "qpdp step-distance correctness", criterion_qpdp},
        {5, "shapley axioms and orderings oracle", criterion_shapley},
        {6, "permutation importance properties", criterion_pfi},
        {7, "voting semantics", criterion_voting},
        {8, "byte-identical reruns", criterion_determinism},
        {9, "ice/pdp identity", criterion_ice_pdp},
        {10, "data-preparation rules", criterion_data_prep},
    };

    int failures = 0;
    for (const Criterion& criterion : criteria) {
        Checker check;
        try {
            criterion.body(check);
        } catch (const std::exception& error) {
            check.failures.push_back(std::string("exception: ") + error.what());
        }
        const bool ok = check.failures.empty();
        std::printf("criterion %2d %s  %s\n", criterion.number, ok ? "PASS" : "FAIL",
                    criterion.name.c_str());
        for (const std::string& failure : check.failures)
            std::printf("              - %s\n", failure.c_str());
        if (!ok) ++failures;
    }

    if (g_runs.ran_a) {
        std::error_code ec;
        fs::remove_all(g_runs.root, ec);
    }
    std::printf("%d of %zu criteria failed\n", failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
