#include "clustex/explain.hpp"

#include "clustex/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace clustex {

ResponseFn response_of(const BoostedModel& model) {
    return [&model](const RowVector& x) { return predict_class2(model, x); };
}

// ---------------------------------------------------------------------------
// PDP / ICE
// ---------------------------------------------------------------------------

namespace {

Vector feature_grid(const Matrix& X, int feature, int grid_size) {
    if (feature < 0 || feature >= X.cols())
        throw std::invalid_argument("pdp: feature index out of range");
    if (grid_size < 2) throw std::invalid_argument("pdp: need at least 2 grid points");
    if (X.rows() < 1) throw std::invalid_argument("pdp: empty data");
    const double lo = X.col(feature).minCoeff();
    const double hi = X.col(feature).maxCoeff();
    if (lo == hi) throw std::invalid_argument("pdp: feature has zero-width range");
    Vector grid(grid_size);
    for (int g = 0; g < grid_size; ++g)
        grid(g) = lo + (hi - lo) * static_cast<double>(g) / static_cast<double>(grid_size - 1);
    return grid;
}

}  // namespace

PartialDependenceCurve pdp(const ResponseFn& response, const Matrix& X, int feature,
                           int grid_size) {
    PartialDependenceCurve curve;
    curve.feature = feature;
    curve.grid = feature_grid(X, feature, grid_size);
    curve.pd = Vector::Zero(grid_size);
    RowVector probe(X.cols());
    for (int g = 0; g < grid_size; ++g) {
        double sum = 0.0;
        for (Index i = 0; i < X.rows(); ++i) {
            probe = X.row(i);
            probe(feature) = curve.grid(g);
            sum += response(probe);
        }
        curve.pd(g) = sum / static_cast<double>(X.rows());
    }
    return curve;
}

PartialDependenceCurve pdp(const BoostedModel& model, const Matrix& X, int feature,
                           int grid_size) {
    return pdp(response_of(model), X, feature, grid_size);
}

IceBundle ice(const ResponseFn& response, const Matrix& X, int feature, int grid_size) {
    IceBundle bundle;
    bundle.feature = feature;
    bundle.grid = feature_grid(X, feature, grid_size);
    bundle.lines.resize(X.rows(), grid_size);
    RowVector probe(X.cols());
    for (int g = 0; g < grid_size; ++g) {
        for (Index i = 0; i < X.rows(); ++i) {
            probe = X.row(i);
            probe(feature) = bundle.grid(g);
            bundle.lines(i, g) = response(probe);
        }
    }
    return bundle;
}

IceBundle ice(const BoostedModel& model, const Matrix& X, int feature, int grid_size) {
    return ice(response_of(model), X, feature, grid_size);
}

// ---------------------------------------------------------------------------
// QPDP
// ---------------------------------------------------------------------------

NormalizedPd normalize_pd(const PartialDependenceCurve& curve) {
    const Index g = curve.grid.size();
    if (g < 2) throw std::invalid_argument("normalize_pd: need at least 2 grid points");
    const double lo = curve.grid(0);
    const double hi = curve.grid(g - 1);
    if (hi <= lo) throw std::invalid_argument("normalize_pd: grid is not increasing");
    if (curve.pd.minCoeff() < 0.0)
        throw std::invalid_argument("normalize_pd: negative partial dependence");
    const double total = curve.pd.sum();
    if (total == 0.0) throw std::invalid_argument("normalize_pd: degenerate all-zero curve");

    NormalizedPd out;
    out.grid = (curve.grid.array() - lo) / (hi - lo);
    out.mass = curve.pd / total;
    return out;
}

std::string to_string(StepDirection direction) {
    return direction == StepDirection::rising ? "rising" : "falling";
}

StepPdf make_step_pdf(const Vector& unit_grid, StepDirection direction, double truncation) {
    StepPdf step;
    step.direction = direction;
    step.truncation = truncation;
    step.mass = Vector::Zero(unit_grid.size());
    Index covered = 0;
    for (Index g = 0; g < unit_grid.size(); ++g) {
        const bool in = direction == StepDirection::rising ? unit_grid(g) >= truncation
                                                           : unit_grid(g) < truncation;
        if (in) {
            step.mass(g) = 1.0;
            ++covered;
        }
    }
    if (covered == 0) throw std::invalid_argument("make_step_pdf: step carries no mass");
    step.mass /= static_cast<double>(covered);
    return step;
}

double kl_divergence(const Vector& f, const Vector& g, double epsilon) {
    if (f.size() != g.size()) throw std::invalid_argument("kl_divergence: size mismatch");
    double sum = 0.0;
    for (Index i = 0; i < f.size(); ++i)
        sum += f(i) * std::log((f(i) + epsilon) / (g(i) + epsilon));
    return sum;
}

double step_mse(const Vector& f, const Vector& g) {
    if (f.size() != g.size()) throw std::invalid_argument("step_mse: size mismatch");
    return (f - g).squaredNorm();
}

QpdpFeatureScore qpdp_from_curve(const PartialDependenceCurve& curve, double epsilon) {
    QpdpFeatureScore score;
    score.feature = curve.feature;
    score.nppd = normalize_pd(curve);

    const Index g_count = score.nppd.grid.size();
    score.min_kl = 1e4;
    score.min_mse = 1e4;
    for (const StepDirection direction : {StepDirection::rising, StepDirection::falling}) {
        for (Index g = 1; g < g_count; ++g) {
            const StepPdf step = make_step_pdf(score.nppd.grid, direction, score.nppd.grid(g));
            const double kl = kl_divergence(step.mass, score.nppd.mass, epsilon);
            if (kl < score.min_kl) {
                score.min_kl = kl;
                score.kl_direction = direction;
                score.kl_truncation = step.truncation;
            }
            const double mse = step_mse(step.mass, score.nppd.mass);
            if (mse < score.min_mse) {
                score.min_mse = mse;
                score.mse_direction = direction;
                score.mse_truncation = step.truncation;
            }
        }
    }
    return score;
}

QpdpScores qpdp(const BoostedModel& model, const Matrix& X, int grid_size, double epsilon) {
    QpdpScores scores;
    scores.epsilon = epsilon;
    scores.grid_size = grid_size;
    const ResponseFn response = response_of(model);
    for (int f = 0; f < X.cols(); ++f)
        scores.per_feature.push_back(qpdp_from_curve(pdp(response, X, f, grid_size), epsilon));
    return scores;
}

// ---------------------------------------------------------------------------
// Shapley values
// ---------------------------------------------------------------------------

namespace {

// |S|! (p-|S|-1)! / p! for every coalition size.
std::vector<double> coalition_weights(int p) {
    std::vector<double> factorial(static_cast<std::size_t>(p) + 1, 1.0);
    for (int i = 1; i <= p; ++i)
        factorial[static_cast<std::size_t>(i)] = factorial[static_cast<std::size_t>(i - 1)] * i;
    std::vector<double> weight(static_cast<std::size_t>(p), 0.0);
    for (int s = 0; s < p; ++s)
        weight[static_cast<std::size_t>(s)] = factorial[static_cast<std::size_t>(s)] *
                                              factorial[static_cast<std::size_t>(p - s - 1)] /
                                              factorial[static_cast<std::size_t>(p)];
    return weight;
}

ShapleyAttribution from_coalition_values(const std::vector<double>& value, int p) {
    const auto weight = coalition_weights(p);
    ShapleyAttribution out;
    out.values = Vector::Zero(p);
    for (int i = 0; i < p; ++i) {
        const std::uint32_t bit = 1u << i;
        double v = 0.0;
        for (std::uint32_t mask = 0; mask < value.size(); ++mask) {
            if (mask & bit) continue;
            v += weight[static_cast<std::size_t>(__builtin_popcount(mask))] *
                 (value[mask | bit] - value[mask]);
        }
        out.values(i) = v;
    }
    out.baseline = value.front();
    out.prediction = value.back();
    return out;
}

}  // namespace

ShapleyAttribution shapley(const ResponseFn& response, const Matrix& background,
                           const RowVector& x) {
    const int p = static_cast<int>(x.size());
    if (p > 12) throw std::invalid_argument("shapley: exact enumeration capped at 12 features");
    if (background.rows() == 0) throw std::invalid_argument("shapley: empty background");
    if (background.cols() != x.size())
        throw std::invalid_argument("shapley: background width mismatch");

    std::vector<double> value(std::size_t{1} << p, 0.0);
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
    ShapleyAttribution out = from_coalition_values(value, p);
    out.mode = "single-model";
    return out;
}

ShapleyAttribution shapley(const BoostedModel& model, const Matrix& background,
                           const RowVector& x) {
    return shapley(response_of(model), background, x);
}

ShapleyAttribution shapley_retrain(const Matrix& X_train, const std::vector<int>& y_train,
                                   const GbmOptions& opts, const RowVector& x) {
    const int p = static_cast<int>(x.size());
    if (p > 12) throw std::invalid_argument("shapley: exact enumeration capped at 12 features");
    if (X_train.cols() != x.size())
        throw std::invalid_argument("shapley_retrain: training width mismatch");

    double positives = 0.0;
    for (int label : y_train) positives += label == 2;
    const double prior = positives / static_cast<double>(y_train.size());

    std::vector<double> value(std::size_t{1} << p, prior);
    for (std::uint32_t mask = 1; mask < value.size(); ++mask) {
        std::vector<int> members;
        for (int i = 0; i < p; ++i)
            if (mask & (1u << i)) members.push_back(i);
        Matrix X_sub(X_train.rows(), static_cast<Index>(members.size()));
        RowVector x_sub(static_cast<Index>(members.size()));
        for (std::size_t c = 0; c < members.size(); ++c) {
            X_sub.col(static_cast<Index>(c)) = X_train.col(members[c]);
            x_sub(static_cast<Index>(c)) = x(members[c]);
        }
        const BoostedModel submodel = fit_gbm(X_sub, y_train, opts);
        value[mask] = predict_class2(submodel, x_sub);
    }
    ShapleyAttribution out = from_coalition_values(value, p);
    out.mode = "retrain";
    return out;
}

CoalitionModels fit_coalition_models(const Matrix& X_train, const std::vector<int>& y_train,
                                     const GbmOptions& opts) {
    const int p = static_cast<int>(X_train.cols());
    if (p > 12) throw std::invalid_argument("shapley: exact enumeration capped at 12 features");

    CoalitionModels out;
    out.features = p;
    double positives = 0.0;
    for (int label : y_train) positives += label == 2;
    out.prior = positives / static_cast<double>(y_train.size());

    const std::uint32_t masks = 1u << p;
    out.models.resize(masks - 1);
    for (std::uint32_t mask = 1; mask < masks; ++mask) {
        std::vector<int> members;
        for (int i = 0; i < p; ++i)
            if (mask & (1u << i)) members.push_back(i);
        Matrix X_sub(X_train.rows(), static_cast<Index>(members.size()));
        for (std::size_t c = 0; c < members.size(); ++c)
            X_sub.col(static_cast<Index>(c)) = X_train.col(members[c]);
        out.models[mask - 1] = fit_gbm(X_sub, y_train, opts);
    }
    return out;
}

ShapleyAttribution shapley_from_coalition_models(const CoalitionModels& coalitions,
                                                 const RowVector& x) {
    const int p = coalitions.features;
    if (x.size() != p) throw std::invalid_argument("shapley: sample width mismatch");

    std::vector<double> value(std::size_t{1} << p, coalitions.prior);
    for (std::uint32_t mask = 1; mask < value.size(); ++mask) {
        RowVector x_sub(__builtin_popcount(mask));
        Index at = 0;
        for (int i = 0; i < p; ++i)
            if (mask & (1u << i)) x_sub(at++) = x(i);
        value[mask] = predict_class2(coalitions.models[mask - 1], x_sub);
    }
    ShapleyAttribution out = from_coalition_values(value, p);
    out.mode = "retrain";
    return out;
}

Matrix subsample_rows(const Matrix& X, Index count, std::uint64_t seed) {
    if (count >= X.rows()) return X;
    std::vector<Index> rows(static_cast<std::size_t>(X.rows()));
    std::iota(rows.begin(), rows.end(), Index{0});
    Rng rng(seed);
    rng.shuffle(rows);
    rows.resize(static_cast<std::size_t>(count));
    std::sort(rows.begin(), rows.end());
    Matrix out(count, X.cols());
    for (Index i = 0; i < count; ++i) out.row(i) = X.row(rows[static_cast<std::size_t>(i)]);
    return out;
}

ShapSummary shap_summary(const BoostedModel& model, const Matrix& X_test,
                         const Matrix& background, int n_samples, std::uint64_t seed) {
    if (X_test.rows() == 0) throw std::invalid_argument("shap_summary: empty test set");
    const Index take = std::min<Index>(n_samples, X_test.rows());
    std::vector<Index> rows(static_cast<std::size_t>(X_test.rows()));
    std::iota(rows.begin(), rows.end(), Index{0});
    Rng rng(seed);
    rng.shuffle(rows);
    rows.resize(static_cast<std::size_t>(take));
    std::sort(rows.begin(), rows.end());

    ShapSummary summary;
    summary.rows = rows;
    summary.values.resize(take, X_test.cols());
    const ResponseFn response = response_of(model);
    for (Index r = 0; r < take; ++r) {
        const ShapleyAttribution attribution =
            shapley(response, background, X_test.row(rows[static_cast<std::size_t>(r)]));
        summary.values.row(r) = attribution.values.transpose();
        summary.baseline = attribution.baseline;
    }
    summary.mean_abs = summary.values.cwiseAbs().colwise().mean().transpose();
    return summary;
}

// ---------------------------------------------------------------------------
// Permutation feature importance
// ---------------------------------------------------------------------------

namespace {

double label_accuracy(const std::vector<int>& predicted, const std::vector<int>& truth) {
    Index correct = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) correct += predicted[i] == truth[i];
    return static_cast<double>(correct) / static_cast<double>(truth.size());
}

}  // namespace

PfiResult pfi(const LabelPredictor& predictor, const Matrix& X_test,
              const std::vector<int>& y_test, int repeats, std::uint64_t seed) {
    if (X_test.rows() == 0) throw std::invalid_argument("pfi: empty test set");
    if (static_cast<Index>(y_test.size()) != X_test.rows())
        throw std::invalid_argument("pfi: labels do not match matrix");
    if (repeats < 1) throw std::invalid_argument("pfi: need at least 1 repeat");

    PfiResult result;
    result.baseline = label_accuracy(predictor(X_test), y_test);
    result.mean = Vector::Zero(X_test.cols());
    result.stddev = Vector::Zero(X_test.cols());

    std::vector<Index> perm(static_cast<std::size_t>(X_test.rows()));
    Matrix shuffled = X_test;
    for (int f = 0; f < X_test.cols(); ++f) {
        std::vector<double> drops;
        drops.reserve(static_cast<std::size_t>(repeats));
        for (int r = 0; r < repeats; ++r) {
            std::iota(perm.begin(), perm.end(), Index{0});
            Rng rng(derive_seed(seed, static_cast<std::uint64_t>(f) *
                                          static_cast<std::uint64_t>(repeats) +
                                      static_cast<std::uint64_t>(r)));
            rng.shuffle(perm);
            for (Index i = 0; i < X_test.rows(); ++i)
                shuffled(i, f) = X_test(perm[static_cast<std::size_t>(i)], f);
            drops.push_back(result.baseline - label_accuracy(predictor(shuffled), y_test));
        }
        shuffled.col(f) = X_test.col(f);

        double mean = 0.0;
        for (double d : drops) mean += d;
        mean /= static_cast<double>(repeats);
        double var = 0.0;
        for (double d : drops) var += (d - mean) * (d - mean);
        result.mean(f) = mean;
        result.stddev(f) = repeats > 1 ? std::sqrt(var / static_cast<double>(repeats - 1)) : 0.0;
    }
    return result;
}

PfiResult pfi(const BoostedModel& model, const Matrix& X_test, const std::vector<int>& y_test,
              int repeats, std::uint64_t seed) {
    return pfi([&model](const Matrix& X) { return predict_labels(model, X); }, X_test, y_test,
               repeats, seed);
}

// ---------------------------------------------------------------------------
// Cross-method importance consensus
// ---------------------------------------------------------------------------

ImportanceTable importance_consensus(const std::vector<std::string>& features,
                                     const std::vector<ImportanceColumn>& columns) {
    const auto p = static_cast<Index>(features.size());
    if (p == 0) throw std::invalid_argument("importance_consensus: no features");
    if (columns.empty()) throw std::invalid_argument("importance_consensus: no columns");
    for (const auto& column : columns)
        if (column.values.size() != p)
            throw std::invalid_argument("importance_consensus: column " + column.name +
                                        " does not cover the feature set");

    ImportanceTable table;
    table.features = features;
    table.columns = columns;
    table.ranks.resize(p, static_cast<Index>(columns.size()));
    for (std::size_t c = 0; c < columns.size(); ++c) {
        std::vector<Index> order(static_cast<std::size_t>(p));
        std::iota(order.begin(), order.end(), Index{0});
        const auto& column = columns[c];
        std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
            return column.lower_is_better ? column.values(a) < column.values(b)
                                          : column.values(a) > column.values(b);
        });
        for (Index r = 0; r < p; ++r)
            table.ranks(order[static_cast<std::size_t>(r)], static_cast<Index>(c)) =
                static_cast<double>(r + 1);
    }

    table.mean_rank = table.ranks.rowwise().mean();
    table.order.resize(static_cast<std::size_t>(p));
    std::iota(table.order.begin(), table.order.end(), Index{0});
    std::stable_sort(table.order.begin(), table.order.end(),
                     [&](Index a, Index b) { return table.mean_rank(a) < table.mean_rank(b); });
    for (std::size_t i = 0; i + 1 < table.order.size(); ++i)
        if (table.mean_rank(table.order[i]) == table.mean_rank(table.order[i + 1]))
            table.mean_rank_tie = true;
    return table;
}

}  // namespace clustex
