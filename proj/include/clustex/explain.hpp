#pragma once

#include "clustex/gbm.hpp"
#include "clustex/types.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace clustex {

// Model response used by every explainer: probability of cluster 2.
using ResponseFn = std::function<double(const RowVector&)>;

ResponseFn response_of(const BoostedModel& model);

struct PartialDependenceCurve {
    int feature = 0;
    Vector grid;  // strictly increasing over the observed range
    Vector pd;    // mean response with the feature forced to each grid value
};

struct IceBundle {
    int feature = 0;
    Vector grid;
    Matrix lines;  // one row per sample; column means reproduce the PDP
};

PartialDependenceCurve pdp(const ResponseFn& response, const Matrix& X, int feature,
                           int grid_size = 50);
PartialDependenceCurve pdp(const BoostedModel& model, const Matrix& X, int feature,
                           int grid_size = 50);
IceBundle ice(const ResponseFn& response, const Matrix& X, int feature, int grid_size = 50);
IceBundle ice(const BoostedModel& model, const Matrix& X, int feature, int grid_size = 50);

// The PDP recast as a discrete distribution: grid min-max scaled onto [0,1],
// pd renormalized to unit mass.
struct NormalizedPd {
    Vector grid;
    Vector mass;
};

NormalizedPd normalize_pd(const PartialDependenceCurve& curve);

enum class StepDirection { rising, falling };

std::string to_string(StepDirection direction);

// Truncated-uniform reference distribution on the normalized grid: rising
// puts equal mass on grid points >= the truncation, falling on points
// strictly below it. A rising truncation at or below grid point 0 degenerates
// to the uniform distribution.
struct StepPdf {
    StepDirection direction = StepDirection::rising;
    double truncation = 0.0;
    Vector mass;
};

StepPdf make_step_pdf(const Vector& unit_grid, StepDirection direction, double truncation);

// sum f * log((f + eps)/(g + eps)); zero iff the distributions coincide,
// up to eps-induced slack.
double kl_divergence(const Vector& f, const Vector& g, double epsilon);

// sum of squared mass differences.
double step_mse(const Vector& f, const Vector& g);

struct QpdpFeatureScore {
    int feature = 0;
    double min_kl = 0.0;
    StepDirection kl_direction = StepDirection::rising;
    double kl_truncation = 0.0;
    double min_mse = 0.0;
    StepDirection mse_direction = StepDirection::rising;
    double mse_truncation = 0.0;
    NormalizedPd nppd;  // kept for the overlay plots
};

struct QpdpScores {
    std::vector<QpdpFeatureScore> per_feature;
    double epsilon = 1e-8;
    int grid_size = 50;
};

// Distance from the normalized PDP to its best-fitting step distribution,
// scanned over both directions and every truncation at grid indices
// 1..G-1 (the degenerate all-mass step is deliberately not a candidate:
// a flat curve measures no dependence, not maximal dependence). Smaller
// distance means the response depends more sharply on the feature.
QpdpFeatureScore qpdp_from_curve(const PartialDependenceCurve& curve, double epsilon = 1e-8);

QpdpScores qpdp(const BoostedModel& model, const Matrix& X, int grid_size = 50,
                double epsilon = 1e-8);

struct ShapleyAttribution {
    Vector values;            // one per feature
    double baseline = 0.0;    // value of the empty coalition
    double prediction = 0.0;  // value of the full coalition
    std::string mode = "single-model";
};

// Exact Shapley attribution by enumeration of all 2^p coalitions (p <= 12).
// Coalition value = mean response over background rows with the coalition's
// features pinned to x.
ShapleyAttribution shapley(const ResponseFn& response, const Matrix& background,
                           const RowVector& x);
ShapleyAttribution shapley(const BoostedModel& model, const Matrix& background,
                           const RowVector& x);

// Literal retraining variant: the value of a coalition is the prediction of
// a model refit on that feature subset alone. 2^p fits; keep the options
// small.
ShapleyAttribution shapley_retrain(const Matrix& X_train, const std::vector<int>& y_train,
                                   const GbmOptions& opts, const RowVector& x);

// One submodel per non-empty coalition plus the class-2 prior for the empty
// one; index = feature bitmask. Fit once, then attribute any number of
// samples without refitting.
struct CoalitionModels {
    int features = 0;
    double prior = 0.0;
    std::vector<BoostedModel> models;  // models[mask - 1] is trained on mask's columns
};

CoalitionModels fit_coalition_models(const Matrix& X_train, const std::vector<int>& y_train,
                                     const GbmOptions& opts);

ShapleyAttribution shapley_from_coalition_models(const CoalitionModels& coalitions,
                                                 const RowVector& x);

struct ShapSummary {
    std::vector<Index> rows;  // sampled test-row indices
    Matrix values;            // per sampled row, per feature
    Vector mean_abs;
    double baseline = 0.0;
};

ShapSummary shap_summary(const BoostedModel& model, const Matrix& X_test,
                         const Matrix& background, int n_samples, std::uint64_t seed);

Matrix subsample_rows(const Matrix& X, Index count, std::uint64_t seed);

struct PfiResult {
    Vector mean;    // baseline accuracy minus permuted accuracy, per feature
    Vector stddev;  // sample standard deviation across repeats
    double baseline = 0.0;
};

using LabelPredictor = std::function<std::vector<int>(const Matrix&)>;

PfiResult pfi(const LabelPredictor& predictor, const Matrix& X_test,
              const std::vector<int>& y_test, int repeats, std::uint64_t seed);
PfiResult pfi(const BoostedModel& model, const Matrix& X_test, const std::vector<int>& y_test,
              int repeats, std::uint64_t seed);

struct ImportanceColumn {
    std::string name;
    Vector values;
    bool lower_is_better = false;
};

struct ImportanceTable {
    std::vector<std::string> features;
    std::vector<ImportanceColumn> columns;
    Matrix ranks;  // features x columns, each column a permutation of 1..p
    Vector mean_rank;
    std::vector<Index> order;  // features sorted by mean rank, index-stable
    bool mean_rank_tie = false;
};

// Ranks every column (1 = most important under its own orientation) and
// orders features by mean rank.
ImportanceTable importance_consensus(const std::vector<std::string>& features,
                                     const std::vector<ImportanceColumn>& columns);

}  // namespace clustex
