#include "clustex/pipeline.hpp"

#include "artifacts.hpp"
#include "clustex/clustering.hpp"
#include "clustex/consensus.hpp"
#include "clustex/csv.hpp"
#include "clustex/dataset.hpp"
#include "clustex/explain.hpp"
#include "clustex/gbm.hpp"
#include "clustex/model_select.hpp"
#include "clustex/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace clustex {

using nlohmann::json;

// Seed fan-out counters. Every source of randomness derives from the root
// seed with a fixed counter, so rerunning one stage in isolation consumes
// exactly the same stream as a full run. Per-algorithm counters add the
// algorithm's position in artifacts::kAlgorithms.
namespace seeds {
constexpr std::uint64_t kSweepKmeans = 1;
constexpr std::uint64_t kSweepBirch = 2;
constexpr std::uint64_t kClusterKmeans = 3;
constexpr std::uint64_t kClusterBirch = 4;
constexpr std::uint64_t kFitSplit = 10;
constexpr std::uint64_t kShapBackground = 20;
constexpr std::uint64_t kShapSampling = 30;
constexpr std::uint64_t kPfi = 40;
constexpr std::uint64_t kGbm = 50;
}  // namespace seeds

json config_to_json(const PipelineConfig& c) {
    json j;
    j["survey_path"] = c.survey_path;
    j["schema_path"] = c.schema_path;
    j["features_path"] = c.features_path;
    j["missing_token"] = c.missing_token;
    j["incomplete_threshold"] = c.incomplete_threshold;
    j["k_min"] = c.k_min;
    j["k_max"] = c.k_max;
    j["kdist_k"] = c.kdist_k;
    j["eps_override"] = c.eps_override;
    j["min_pts_max"] = c.min_pts_max;
    j["bandwidth_min"] = c.bandwidth_min;
    j["bandwidth_max"] = c.bandwidth_max;
    j["bandwidth_step"] = c.bandwidth_step;
    j["birch_threshold"] = c.birch_threshold;
    j["birch_branching"] = c.birch_branching;
    j["split_ratio"] = c.split_ratio;
    j["learning_rate"] = c.learning_rate;
    j["max_depth"] = c.max_depth;
    j["n_trees"] = c.n_trees;
    j["grid_size"] = c.grid_size;
    j["qpdp_epsilon"] = c.qpdp_epsilon;
    j["shap_samples"] = c.shap_samples;
    j["shap_background"] = c.shap_background;
    j["shap_mode"] = c.shap_mode;
    j["pfi_repeats"] = c.pfi_repeats;
    j["ice_plot_lines"] = c.ice_plot_lines;
    j["seed"] = c.seed;
    // out_dir is deliberately not persisted: the run directory is wherever
    // the file lives, and reruns with identical settings stay byte-identical.
    return j;
}

namespace {

template <typename T>
void read_if_present(const json& j, const char* key, T& field) {
    if (j.contains(key)) field = j.at(key).get<T>();
}

}  // namespace

PipelineConfig config_from_json(const json& j) {
    PipelineConfig c;
    read_if_present(j, "survey_path", c.survey_path);
    read_if_present(j, "schema_path", c.schema_path);
    read_if_present(j, "features_path", c.features_path);
    read_if_present(j, "missing_token", c.missing_token);
    read_if_present(j, "incomplete_threshold", c.incomplete_threshold);
    read_if_present(j, "k_min", c.k_min);
    read_if_present(j, "k_max", c.k_max);
    read_if_present(j, "kdist_k", c.kdist_k);
    read_if_present(j, "eps_override", c.eps_override);
    read_if_present(j, "min_pts_max", c.min_pts_max);
    read_if_present(j, "bandwidth_min", c.bandwidth_min);
    read_if_present(j, "bandwidth_max", c.bandwidth_max);
    read_if_present(j, "bandwidth_step", c.bandwidth_step);
    read_if_present(j, "birch_threshold", c.birch_threshold);
    read_if_present(j, "birch_branching", c.birch_branching);
    read_if_present(j, "split_ratio", c.split_ratio);
    read_if_present(j, "learning_rate", c.learning_rate);
    read_if_present(j, "max_depth", c.max_depth);
    read_if_present(j, "n_trees", c.n_trees);
    read_if_present(j, "grid_size", c.grid_size);
    read_if_present(j, "qpdp_epsilon", c.qpdp_epsilon);
    read_if_present(j, "shap_samples", c.shap_samples);
    read_if_present(j, "shap_background", c.shap_background);
    read_if_present(j, "shap_mode", c.shap_mode);
    read_if_present(j, "pfi_repeats", c.pfi_repeats);
    read_if_present(j, "ice_plot_lines", c.ice_plot_lines);
    read_if_present(j, "seed", c.seed);
    return c;
}

int stage_exit_code(const std::string& stage) {
    static const std::vector<std::string> order = {"prepare", "select", "cluster", "vote",
                                                   "fit",     "explain", "report"};
    for (std::size_t i = 0; i < order.size(); ++i)
        if (order[i] == stage) return static_cast<int>(i) + 2;
    return 1;
}

// ---------------------------------------------------------------------------
// prepare
// ---------------------------------------------------------------------------

void stage_prepare(const PipelineConfig& config, const std::string& run_dir) {
    artifacts::ensure_dir(run_dir);

    json info;
    FeatureMatrix features;
    if (!config.features_path.empty()) {
        features = features_from_csv(config.features_path);
        info["source"] = "features";
        info["input"] = config.features_path;
    } else if (!config.survey_path.empty()) {
        const SurveyTable raw = load_survey(config.survey_path, config.missing_token);
        const FilterReport filtered = filter_incomplete(raw, config.incomplete_threshold);
        long imputed = 0;
        for (Index r = 0; r < filtered.table.rows(); ++r)
            imputed += filtered.table.missing_in_row(r);
        const SurveyTable complete = impute_median(filtered.table);
        const FactorSchema schema =
            config.schema_path.empty() ? default_schema() : load_schema(config.schema_path);
        features = score_factors(complete, schema);
        info["source"] = "survey";
        info["input"] = config.survey_path;
        info["respondents_loaded"] = raw.rows();
        info["dropped_incomplete"] = filtered.dropped;
        info["retained"] = filtered.retained;
        info["out_of_range_cells"] = raw.out_of_range_count;
        info["imputed_cells"] = imputed;
        info["incomplete_threshold"] = config.incomplete_threshold;
    } else {
        throw std::invalid_argument("no input: set a survey path or a features path");
    }

    info["rows"] = features.rows();
    info["feature_names"] = features.feature_names;
    features_to_csv(features, artifacts::join(run_dir, "features.csv"));
    artifacts::save_json(artifacts::join(run_dir, "prepare.json"), info);
}

// ---------------------------------------------------------------------------
// select
// ---------------------------------------------------------------------------

namespace {

void write_sweep_csv(const std::string& path, const SweepResult& sweep,
                     const std::string& param_name, bool integral_param) {
    csv::Table table;
    table.header = {param_name, "clusters", "scored", "silhouette", "calinski_harabasz"};
    for (const auto& entry : sweep.entries) {
        std::vector<std::string> row;
        row.push_back(integral_param ? std::to_string(static_cast<long>(entry.param))
                                     : csv::format_fixed(entry.param));
        row.push_back(std::to_string(entry.k));
        row.push_back(entry.scored ? "1" : "0");
        row.push_back(entry.scored ? csv::format_fixed(entry.silhouette) : "");
        row.push_back(entry.scored ? csv::format_fixed(entry.calinski_harabasz) : "");
        table.rows.push_back(std::move(row));
    }
    csv::write_file(path, table);
}

void write_groups_csv(const std::string& path, const SweepResult& sweep) {
    csv::Table table;
    table.header = {"clusters", "runs", "scored", "mean_silhouette", "mean_calinski_harabasz"};
    for (const auto& group : sweep.groups) {
        std::vector<std::string> row;
        row.push_back(std::to_string(group.k));
        row.push_back(std::to_string(group.runs));
        row.push_back(group.scored ? "1" : "0");
        row.push_back(group.scored ? csv::format_fixed(group.mean_silhouette) : "");
        row.push_back(group.scored ? csv::format_fixed(group.mean_calinski_harabasz) : "");
        table.rows.push_back(std::move(row));
    }
    csv::write_file(path, table);
}

json sweep_summary(const SweepResult& sweep) {
    return json{{"chosen_param", sweep.chosen_param},
                {"chosen_k", sweep.chosen_k},
                {"rule", sweep.rule},
                {"index_disagreement", sweep.index_disagreement}};
}

}  // namespace

void stage_select(const PipelineConfig& config, const std::string& run_dir) {
    const FeatureMatrix features = artifacts::load_features(run_dir);
    const Matrix& X = features.values;
    artifacts::ensure_dir(artifacts::join(run_dir, "select"));

    const SweepResult km = sweep_k(X, SweepAlgorithm::kmeans, config.k_min, config.k_max,
                                   derive_seed(config.seed, seeds::kSweepKmeans));
    const SweepResult agg =
        sweep_k(X, SweepAlgorithm::agglomerative, config.k_min, config.k_max, 0);
    const SweepResult bi = sweep_k(X, SweepAlgorithm::birch, config.k_min, config.k_max,
                                   derive_seed(config.seed, seeds::kSweepBirch),
                                   config.birch_threshold, config.birch_branching);

    const int kdist_k =
        config.kdist_k > 0 ? config.kdist_k : 2 * static_cast<int>(X.cols());
    const KneeCurve knee = kdist_knee(X, kdist_k);
    const bool eps_overridden = config.eps_override > 0.0;
    const double eps = eps_overridden ? config.eps_override : knee.eps;
    const SweepResult db = sweep_min_samples(X, eps, config.min_pts_max);

    const SweepResult ms =
        sweep_bandwidth(X, config.bandwidth_min, config.bandwidth_max, config.bandwidth_step);

    write_sweep_csv(artifacts::join(run_dir, "select/sweep_kmeans.csv"), km, "k", true);
    write_sweep_csv(artifacts::join(run_dir, "select/sweep_agglomerative.csv"), agg, "k", true);
    write_sweep_csv(artifacts::join(run_dir, "select/sweep_birch.csv"), bi, "k", true);
    write_sweep_csv(artifacts::join(run_dir, "select/sweep_dbscan.csv"), db, "min_pts", true);
    write_groups_csv(artifacts::join(run_dir, "select/sweep_dbscan_groups.csv"), db);
    write_sweep_csv(artifacts::join(run_dir, "select/sweep_bandwidth.csv"), ms, "bandwidth",
                    false);
    write_groups_csv(artifacts::join(run_dir, "select/sweep_bandwidth_groups.csv"), ms);

    csv::Table kdist;
    kdist.header = {"rank", "distance"};
    for (std::size_t i = 0; i < knee.distances.size(); ++i)
        kdist.rows.push_back({std::to_string(i), csv::format_fixed(knee.distances[i])});
    csv::write_file(artifacts::join(run_dir, "select/kdist.csv"), kdist);

    json selection;
    selection["kmeans"] = sweep_summary(km);
    selection["kmeans"]["k"] = km.chosen_k;
    selection["agglomerative"] = sweep_summary(agg);
    selection["agglomerative"]["k"] = agg.chosen_k;
    selection["birch"] = sweep_summary(bi);
    selection["birch"]["k"] = bi.chosen_k;
    selection["dbscan"] = sweep_summary(db);
    selection["dbscan"]["eps"] = eps;
    selection["dbscan"]["eps_source"] = eps_overridden ? "override" : "kdist_knee";
    selection["dbscan"]["kdist_k"] = kdist_k;
    selection["dbscan"]["knee_index"] = knee.knee;
    selection["dbscan"]["smoothing_window"] = knee.smoothing_window;
    selection["dbscan"]["min_pts"] = static_cast<int>(db.chosen_param);
    selection["dbscan"]["k"] = db.chosen_k;
    selection["mean_shift"] = sweep_summary(ms);
    selection["mean_shift"]["bandwidth"] = ms.chosen_param;
    selection["mean_shift"]["k"] = ms.chosen_k;
    artifacts::save_json(artifacts::join(run_dir, "select/selection.json"), selection);
}

// ---------------------------------------------------------------------------
// cluster
// ---------------------------------------------------------------------------

namespace {

json matrix_rows(const Matrix& m) {
    json rows = json::array();
    for (Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

void save_clustering(const std::string& run_dir, const FeatureMatrix& features,
                     const Labeling& labeling, json extra) {
    std::vector<int> csv_labels(labeling.labels.size());
    for (std::size_t i = 0; i < labeling.labels.size(); ++i)
        csv_labels[i] = labeling.noise[i] ? kNoiseLabel : labeling.labels[i];
    artifacts::save_labels_csv(
        artifacts::join(run_dir, "cluster/" + labeling.algorithm + ".csv"),
        features.respondent_ids, csv_labels);

    json params = json::object();
    for (const auto& [key, value] : labeling.params) params[key] = value;
    Index noise_count = 0;
    for (char flag : labeling.noise) noise_count += flag != 0;

    json sidecar;
    sidecar["algorithm"] = labeling.algorithm;
    sidecar["params"] = std::move(params);
    sidecar["seed"] = labeling.seed;
    sidecar["clusters"] = labeling.cluster_count();
    sidecar["cluster_sizes"] = labeling.cluster_sizes();
    sidecar["noise_points"] = noise_count;
    for (auto& [key, value] : extra.items()) sidecar[key] = std::move(value);
    artifacts::save_json(artifacts::join(run_dir, "cluster/" + labeling.algorithm + ".json"),
                         sidecar);
}

}  // namespace

void stage_cluster(const PipelineConfig& config, const std::string& run_dir) {
    const FeatureMatrix features = artifacts::load_features(run_dir);
    const Matrix& X = features.values;
    const json selection =
        artifacts::load_json(artifacts::join(run_dir, "select/selection.json"), "select");
    artifacts::ensure_dir(artifacts::join(run_dir, "cluster"));

    {
        KmeansOptions opts;
        opts.k = selection.at("kmeans").at("k").get<int>();
        opts.seed = derive_seed(config.seed, seeds::kClusterKmeans);
        const KmeansResult result = kmeans(X, opts);
        json extra;
        extra["objective"] = result.objective;
        extra["iterations"] = result.objective_trace.size();
        extra["centroids"] = matrix_rows(result.centroids.points);
        save_clustering(run_dir, features, result.labeling, std::move(extra));
    }
    {
        DbscanOptions opts;
        opts.eps = selection.at("dbscan").at("eps").get<double>();
        opts.min_pts = selection.at("dbscan").at("min_pts").get<int>();
        save_clustering(run_dir, features, dbscan(X, opts), json::object());
    }
    {
        const int k = selection.at("agglomerative").at("k").get<int>();
        save_clustering(run_dir, features, agglomerative_ward(X, k), json::object());
    }
    {
        MeanShiftOptions opts;
        opts.bandwidth = selection.at("mean_shift").at("bandwidth").get<double>();
        const MeanShiftResult result = mean_shift(X, opts);
        json extra;
        extra["modes"] = matrix_rows(result.modes.points);
        save_clustering(run_dir, features, result.labeling, std::move(extra));
    }
    {
        BirchOptions opts;
        opts.k = selection.at("birch").at("k").get<int>();
        opts.threshold = config.birch_threshold;
        opts.branching = config.birch_branching;
        opts.seed = derive_seed(config.seed, seeds::kClusterBirch);
        save_clustering(run_dir, features, birch(X, opts), json::object());
    }
}

// ---------------------------------------------------------------------------
// vote
// ---------------------------------------------------------------------------

void stage_vote(const PipelineConfig&, const std::string& run_dir) {
    const FeatureMatrix features = artifacts::load_features(run_dir);

    std::vector<Labeling> labelings;
    for (const auto& algorithm : artifacts::kAlgorithms) {
        Labeling labeling = artifacts::load_labeling(run_dir, algorithm);
        if (labeling.size() != features.rows())
            throw std::runtime_error("cluster/" + algorithm + ".csv does not match features.csv");
        labelings.push_back(std::move(labeling));
    }

    const AlignedLabelings aligned = align_labels(labelings, features.values);
    const ConsensusLabeling consensus =
        majority_vote(aligned, features.values, features.respondent_ids);
    artifacts::ensure_dir(artifacts::join(run_dir, "vote"));

    csv::Table aligned_table;
    aligned_table.header.push_back("id");
    for (const auto& algorithm : aligned.algorithms) aligned_table.header.push_back(algorithm);
    for (Index i = 0; i < aligned.size(); ++i) {
        std::vector<std::string> row;
        row.push_back(features.respondent_ids[static_cast<std::size_t>(i)]);
        for (const auto& column : aligned.columns)
            row.push_back(std::to_string(column[static_cast<std::size_t>(i)]));
        aligned_table.rows.push_back(std::move(row));
    }
    csv::write_file(artifacts::join(run_dir, "vote/aligned.csv"), aligned_table);

    csv::Table consensus_table;
    consensus_table.header = {"id", "label", "votes_1", "votes_2", "abstains", "tiebreak"};
    for (std::size_t i = 0; i < consensus.labels.size(); ++i) {
        consensus_table.rows.push_back({features.respondent_ids[i],
                                        std::to_string(consensus.labels[i]),
                                        std::to_string(consensus.votes_1[i]),
                                        std::to_string(consensus.votes_2[i]),
                                        std::to_string(consensus.abstains[i]),
                                        consensus.tiebreak[i] ? "1" : "0"});
    }
    csv::write_file(artifacts::join(run_dir, "vote/consensus.csv"), consensus_table);

    json swapped = json::object();
    for (std::size_t a = 0; a < aligned.algorithms.size(); ++a)
        swapped[aligned.algorithms[a]] = aligned.swapped[a] != 0;
    Index size_1 = 0, size_2 = 0, tiebreaks = 0;
    for (std::size_t i = 0; i < consensus.labels.size(); ++i) {
        (consensus.labels[i] == 1 ? size_1 : size_2) += 1;
        tiebreaks += consensus.tiebreak[i] != 0;
    }
    json info;
    info["swapped"] = std::move(swapped);
    info["cluster_1_size"] = size_1;
    info["cluster_2_size"] = size_2;
    info["tiebreak_count"] = tiebreaks;
    artifacts::save_json(artifacts::join(run_dir, "vote/vote.json"), info);
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

namespace {

Matrix take_rows(const Matrix& X, const std::vector<Index>& rows) {
    Matrix out(static_cast<Index>(rows.size()), X.cols());
    for (std::size_t i = 0; i < rows.size(); ++i)
        out.row(static_cast<Index>(i)) = X.row(rows[i]);
    return out;
}

}  // namespace

void stage_fit(const PipelineConfig& config, const std::string& run_dir) {
    const FeatureMatrix features = artifacts::load_features(run_dir);
    const artifacts::AlignedTable aligned = artifacts::load_aligned(run_dir);
    artifacts::ensure_dir(artifacts::join(run_dir, "fit"));

    csv::Table accuracy_table;
    accuracy_table.header = {"algorithm", "train_rows", "test_rows", "abstained",
                             "accuracy",  "rounds",     "final_train_deviance"};

    for (std::size_t a = 0; a < artifacts::kAlgorithms.size(); ++a) {
        const std::string& algorithm = artifacts::kAlgorithms[a];
        const std::vector<int>& column = aligned.columns[a];

        std::vector<Index> kept, abstained;
        std::vector<int> y_kept;
        for (std::size_t i = 0; i < column.size(); ++i) {
            if (column[i] == 0) {
                abstained.push_back(static_cast<Index>(i));
            } else {
                kept.push_back(static_cast<Index>(i));
                y_kept.push_back(column[i]);
            }
        }

        const SplitSpec split =
            train_test_split(y_kept, config.split_ratio, derive_seed(config.seed, seeds::kFitSplit + a));
        std::vector<Index> train_rows, test_rows;
        std::vector<int> y_train, y_test;
        for (Index idx : split.train) {
            train_rows.push_back(kept[static_cast<std::size_t>(idx)]);
            y_train.push_back(y_kept[static_cast<std::size_t>(idx)]);
        }
        for (Index idx : split.test) {
            test_rows.push_back(kept[static_cast<std::size_t>(idx)]);
            y_test.push_back(y_kept[static_cast<std::size_t>(idx)]);
        }

        GbmOptions opts;
        opts.learning_rate = config.learning_rate;
        opts.max_depth = config.max_depth;
        opts.n_trees = config.n_trees;
        opts.seed = derive_seed(config.seed, seeds::kGbm + a);
        const BoostedModel model =
            fit_gbm(take_rows(features.values, train_rows), y_train, opts, features.feature_names);
        const double test_accuracy = accuracy(model, take_rows(features.values, test_rows), y_test);

        artifacts::save_json(artifacts::join(run_dir, "fit/model_" + algorithm + ".json"),
                             model_to_json(model));
        json split_info;
        split_info["algorithm"] = algorithm;
        split_info["ratio"] = split.ratio;
        split_info["seed"] = split.seed;
        split_info["train"] = train_rows;
        split_info["test"] = test_rows;
        split_info["abstained"] = abstained;
        artifacts::save_json(artifacts::join(run_dir, "fit/split_" + algorithm + ".json"),
                             split_info);

        accuracy_table.rows.push_back({algorithm, std::to_string(train_rows.size()),
                                       std::to_string(test_rows.size()),
                                       std::to_string(abstained.size()),
                                       csv::format_fixed(test_accuracy),
                                       std::to_string(model.rounds()),
                                       csv::format_fixed(model.train_deviance.back())});
    }
    csv::write_file(artifacts::join(run_dir, "fit/accuracy.csv"), accuracy_table);
}

// ---------------------------------------------------------------------------
// explain
// ---------------------------------------------------------------------------

namespace {

Index grid_point_of(const Vector& grid, double value) {
    Index best = 0;
    for (Index g = 1; g < grid.size(); ++g)
        if (std::abs(grid(g) - value) < std::abs(grid(best) - value)) best = g;
    return best;
}

ShapSummary retrain_shap_summary(const CoalitionModels& coalitions, const Matrix& X_test,
                                 int n_samples, std::uint64_t seed) {
    // Same row sampling as shap_summary, but coalition submodels supply the
    // values instead of masked background predictions.
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
    for (Index r = 0; r < take; ++r) {
        const ShapleyAttribution attribution = shapley_from_coalition_models(
            coalitions, X_test.row(rows[static_cast<std::size_t>(r)]));
        summary.values.row(r) = attribution.values.transpose();
        summary.baseline = attribution.baseline;
    }
    summary.mean_abs = summary.values.cwiseAbs().colwise().mean().transpose();
    return summary;
}

}  // namespace

void stage_explain(const PipelineConfig& config, const std::string& run_dir) {
    const FeatureMatrix features = artifacts::load_features(run_dir);
    const Matrix& X = features.values;
    const artifacts::AlignedTable aligned = artifacts::load_aligned(run_dir);
    artifacts::ensure_dir(artifacts::join(run_dir, "explain"));
    const Index p = X.cols();

    for (std::size_t a = 0; a < artifacts::kAlgorithms.size(); ++a) {
        const std::string& algorithm = artifacts::kAlgorithms[a];
        const BoostedModel model = model_from_json(
            artifacts::load_json(artifacts::join(run_dir, "fit/model_" + algorithm + ".json"),
                                 "fit"));
        const artifacts::SplitIndices split = artifacts::load_split(run_dir, algorithm);
        const Matrix X_train = take_rows(X, split.train);
        const Matrix X_test = take_rows(X, split.test);
        std::vector<int> y_test;
        for (Index row : split.test)
            y_test.push_back(aligned.columns[a][static_cast<std::size_t>(row)]);

        csv::Table pd_table;
        pd_table.header = {"feature", "point", "value", "pd"};
        for (Index f = 0; f < p; ++f) {
            const IceBundle bundle = ice(model, X, static_cast<int>(f), config.grid_size);
            const std::string& name = features.feature_names[static_cast<std::size_t>(f)];
            for (Index g = 0; g < bundle.grid.size(); ++g)
                pd_table.rows.push_back({name, std::to_string(g),
                                         csv::format_fixed(bundle.grid(g)),
                                         csv::format_fixed(bundle.lines.col(g).mean())});

            csv::Table ice_table;
            ice_table.header.push_back("id");
            for (Index g = 0; g < bundle.grid.size(); ++g)
                ice_table.header.push_back(csv::format_fixed(bundle.grid(g)));
            for (Index r = 0; r < bundle.lines.rows(); ++r) {
                std::vector<std::string> row;
                row.push_back(features.respondent_ids[static_cast<std::size_t>(r)]);
                for (Index g = 0; g < bundle.grid.size(); ++g)
                    row.push_back(csv::format_fixed(bundle.lines(r, g)));
                ice_table.rows.push_back(std::move(row));
            }
            csv::write_file(
                artifacts::join(run_dir, "explain/ice_" + algorithm + "_" + name + ".csv"),
                ice_table);
        }
        csv::write_file(artifacts::join(run_dir, "explain/pdp_" + algorithm + ".csv"), pd_table);

        const QpdpScores scores = qpdp(model, X, config.grid_size, config.qpdp_epsilon);
        csv::Table qpdp_table;
        qpdp_table.header = {"feature",       "min_kl",       "kl_direction",
                             "kl_point",      "kl_truncation", "min_mse",
                             "mse_direction", "mse_point",     "mse_truncation"};
        csv::Table nppd_table;
        nppd_table.header = {"feature", "point", "unit_value", "mass"};
        for (const auto& score : scores.per_feature) {
            const std::string& name =
                features.feature_names[static_cast<std::size_t>(score.feature)];
            qpdp_table.rows.push_back(
                {name, csv::format_fixed(score.min_kl), to_string(score.kl_direction),
                 std::to_string(grid_point_of(score.nppd.grid, score.kl_truncation)),
                 csv::format_fixed(score.kl_truncation), csv::format_fixed(score.min_mse),
                 to_string(score.mse_direction),
                 std::to_string(grid_point_of(score.nppd.grid, score.mse_truncation)),
                 csv::format_fixed(score.mse_truncation)});
            for (Index g = 0; g < score.nppd.grid.size(); ++g)
                nppd_table.rows.push_back({name, std::to_string(g),
                                           csv::format_fixed(score.nppd.grid(g)),
                                           csv::format_fixed(score.nppd.mass(g))});
        }
        csv::write_file(artifacts::join(run_dir, "explain/qpdp_" + algorithm + ".csv"),
                        qpdp_table);
        csv::write_file(artifacts::join(run_dir, "explain/nppd_" + algorithm + ".csv"),
                        nppd_table);

        ShapSummary shap;
        Index background_rows = 0;
        if (config.shap_mode == "retrain") {
            GbmOptions opts;
            opts.learning_rate = config.learning_rate;
            opts.max_depth = config.max_depth;
            opts.n_trees = config.n_trees;
            opts.seed = derive_seed(config.seed, seeds::kGbm + a);
            std::vector<int> y_train;
            for (Index row : split.train)
                y_train.push_back(aligned.columns[a][static_cast<std::size_t>(row)]);
            const CoalitionModels coalitions = fit_coalition_models(X_train, y_train, opts);
            shap = retrain_shap_summary(coalitions, X_test, config.shap_samples,
                                        derive_seed(config.seed, seeds::kShapSampling + a));
        } else {
            const Matrix background =
                subsample_rows(X_train, config.shap_background,
                               derive_seed(config.seed, seeds::kShapBackground + a));
            background_rows = background.rows();
            shap = shap_summary(model, X_test, background, config.shap_samples,
                                derive_seed(config.seed, seeds::kShapSampling + a));
        }

        csv::Table shap_table;
        shap_table.header = {"row", "id"};
        for (const auto& name : features.feature_names) shap_table.header.push_back(name);
        for (Index r = 0; r < shap.values.rows(); ++r) {
            const Index original = split.test[static_cast<std::size_t>(shap.rows[static_cast<std::size_t>(r)])];
            std::vector<std::string> row;
            row.push_back(std::to_string(original));
            row.push_back(features.respondent_ids[static_cast<std::size_t>(original)]);
            for (Index f = 0; f < p; ++f) row.push_back(csv::format_fixed(shap.values(r, f)));
            shap_table.rows.push_back(std::move(row));
        }
        csv::write_file(artifacts::join(run_dir, "explain/shap_values_" + algorithm + ".csv"),
                        shap_table);

        const PfiResult importance = pfi(model, X_test, y_test, config.pfi_repeats,
                                         derive_seed(config.seed, seeds::kPfi + a));
        csv::Table pfi_table;
        pfi_table.header = {"feature", "mean_drop", "stddev"};
        for (Index f = 0; f < p; ++f)
            pfi_table.rows.push_back({features.feature_names[static_cast<std::size_t>(f)],
                                      csv::format_fixed(importance.mean(f)),
                                      csv::format_fixed(importance.stddev(f))});
        csv::write_file(artifacts::join(run_dir, "explain/pfi_" + algorithm + ".csv"),
                        pfi_table);

        json mean_abs = json::object();
        for (Index f = 0; f < p; ++f)
            mean_abs[features.feature_names[static_cast<std::size_t>(f)]] = shap.mean_abs(f);
        json info;
        info["shap"] = {{"mode", config.shap_mode},
                        {"baseline", shap.baseline},
                        {"samples", shap.values.rows()},
                        {"background_rows", background_rows},
                        {"mean_abs", std::move(mean_abs)}};
        info["pfi"] = {{"baseline", importance.baseline}, {"repeats", config.pfi_repeats}};
        artifacts::save_json(artifacts::join(run_dir, "explain/explain_" + algorithm + ".json"),
                             info);
    }
}

// ---------------------------------------------------------------------------
// report / full run
// ---------------------------------------------------------------------------

void stage_report(const PipelineConfig& config, const std::string& run_dir) {
    emit_tables(run_dir);
    emit_figures(run_dir, config.ice_plot_lines);
}

namespace {

void run_stage(const std::string& name, const std::function<void()>& body) {
    try {
        body();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& error) {
        throw StageError(name, error.what());
    }
}

}  // namespace

void run_pipeline(const PipelineConfig& config) {
    if (config.out_dir.empty()) throw std::invalid_argument("output directory not set");
    if (std::filesystem::exists(config.out_dir) &&
        !std::filesystem::is_empty(config.out_dir))
        throw std::invalid_argument("output directory " + config.out_dir + " is not empty");
    artifacts::ensure_dir(config.out_dir);
    artifacts::save_json(artifacts::join(config.out_dir, "run_config.json"),
                         config_to_json(config));

    run_stage("prepare", [&] { stage_prepare(config, config.out_dir); });
    run_stage("select", [&] { stage_select(config, config.out_dir); });
    run_stage("cluster", [&] { stage_cluster(config, config.out_dir); });
    run_stage("vote", [&] { stage_vote(config, config.out_dir); });
    run_stage("fit", [&] { stage_fit(config, config.out_dir); });
    run_stage("explain", [&] { stage_explain(config, config.out_dir); });
    run_stage("report", [&] { stage_report(config, config.out_dir); });
}

}  // namespace clustex
