#include "clustex/pipeline.hpp"

#include "clustex/csv.hpp"
#include "clustex/dataset.hpp"
#include "clustex/synthetic.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

using namespace clustex;
namespace fs = std::filesystem;

namespace {

std::string read_all(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::size_t column_of(const csv::Table& table, const std::string& name) {
    for (std::size_t c = 0; c < table.header.size(); ++c)
        if (table.header[c] == name) return c;
    throw std::runtime_error("missing column " + name);
}

}  // namespace

TEST_CASE("config json round-trips every field except the output directory") {
    PipelineConfig config;
    config.survey_path = "raw.csv";
    config.schema_path = "schema.json";
    config.features_path = "features.csv";
    config.missing_token = "NA";
    config.incomplete_threshold = 0.25;
    config.k_min = 3;
    config.k_max = 7;
    config.kdist_k = 9;
    config.eps_override = 0.5;
    config.min_pts_max = 42;
    config.bandwidth_min = 0.2;
    config.bandwidth_max = 0.4;
    config.bandwidth_step = 0.05;
    config.birch_threshold = 0.33;
    config.birch_branching = 17;
    config.split_ratio = 0.6;
    config.learning_rate = 0.5;
    config.max_depth = 4;
    config.n_trees = 25;
    config.grid_size = 30;
    config.qpdp_epsilon = 1e-6;
    config.shap_samples = 11;
    config.shap_background = 13;
    config.shap_mode = "retrain";
    config.pfi_repeats = 5;
    config.ice_plot_lines = 80;
    config.seed = 777;
    config.out_dir = "/tmp/somewhere";

    const nlohmann::json j = config_to_json(config);
    CHECK_FALSE(j.contains("out_dir"));

    const PipelineConfig back = config_from_json(j);
    CHECK(back.survey_path == config.survey_path);
    CHECK(back.schema_path == config.schema_path);
    CHECK(back.features_path == config.features_path);
    CHECK(back.missing_token == config.missing_token);
    CHECK(back.incomplete_threshold == config.incomplete_threshold);
    CHECK(back.k_min == config.k_min);
    CHECK(back.k_max == config.k_max);
    CHECK(back.kdist_k == config.kdist_k);
    CHECK(back.eps_override == config.eps_override);
    CHECK(back.min_pts_max == config.min_pts_max);
    CHECK(back.bandwidth_min == config.bandwidth_min);
    CHECK(back.bandwidth_max == config.bandwidth_max);
    CHECK(back.bandwidth_step == config.bandwidth_step);
    CHECK(back.birch_threshold == config.birch_threshold);
    CHECK(back.birch_branching == config.birch_branching);
    CHECK(back.split_ratio == config.split_ratio);
    CHECK(back.learning_rate == config.learning_rate);
    CHECK(back.max_depth == config.max_depth);
    CHECK(back.n_trees == config.n_trees);
    CHECK(back.grid_size == config.grid_size);
    CHECK(back.qpdp_epsilon == config.qpdp_epsilon);
    CHECK(back.shap_samples == config.shap_samples);
    CHECK(back.shap_background == config.shap_background);
    CHECK(back.shap_mode == config.shap_mode);
    CHECK(back.pfi_repeats == config.pfi_repeats);
    CHECK(back.ice_plot_lines == config.ice_plot_lines);
    CHECK(back.seed == config.seed);
    CHECK(back.out_dir.empty());

    const PipelineConfig defaults = config_from_json(nlohmann::json::object());
    CHECK(defaults.k_max == 11);
    CHECK(defaults.shap_mode == "single-model");
}

TEST_CASE("stage exit codes number the stages in pipeline order") {
    CHECK(stage_exit_code("prepare") == 2);
    CHECK(stage_exit_code("select") == 3);
    CHECK(stage_exit_code("cluster") == 4);
    CHECK(stage_exit_code("vote") == 5);
    CHECK(stage_exit_code("fit") == 6);
    CHECK(stage_exit_code("explain") == 7);
    CHECK(stage_exit_code("report") == 8);
    CHECK(stage_exit_code("unknown") == 1);
    CHECK(stage_exit_code("") == 1);
}

TEST_CASE("stage errors carry the stage name") {
    const StageError error("fit", "model blew up");
    CHECK(error.stage == "fit");
    CHECK(std::string(error.what()) == "model blew up");
    CHECK(stage_exit_code(error.stage) == 6);
}

TEST_CASE("run_pipeline refuses a missing or occupied output directory") {
    PipelineConfig config;
    config.out_dir.clear();
    CHECK_THROWS_AS(run_pipeline(config), std::invalid_argument);

    const fs::path occupied = fs::temp_directory_path() / "clustex_occupied_dir";
    fs::remove_all(occupied);
    fs::create_directories(occupied);
    std::ofstream(occupied / "leftover.txt") << "x\n";
    config.out_dir = occupied.string();
    CHECK_THROWS_AS(run_pipeline(config), std::invalid_argument);
    fs::remove_all(occupied);
}

TEST_CASE("stages running out of order name the missing producer") {
    const fs::path empty_run = fs::temp_directory_path() / "clustex_empty_run";
    fs::remove_all(empty_run);
    fs::create_directories(empty_run);
    PipelineConfig config;
    try {
        stage_vote(config, empty_run.string());
        FAIL("expected a missing-artifact error");
    } catch (const std::runtime_error& error) {
        const std::string what = error.what();
        CHECK(what.find("missing artifact") != std::string::npos);
        CHECK(what.find("prepare") != std::string::npos);
    }
    fs::remove_all(empty_run);
}

TEST_CASE("a full run lays down every artifact and reruns byte-identically") {
    const fs::path base = fs::temp_directory_path() / "clustex_pipeline_e2e";
    fs::remove_all(base);
    fs::create_directories(base / "input");

    SyntheticSpec spec = default_synthetic_spec();
    spec.cluster_sizes = {100, 50};
    spec.seed = 7;
    const SyntheticData data = generate_synthetic(spec);
    const std::string features_path = (base / "input" / "features.csv").string();
    features_to_csv(data.features, features_path);

    PipelineConfig config;
    config.features_path = features_path;
    config.out_dir = (base / "run").string();
    config.n_trees = 15;
    config.max_depth = 4;
    config.grid_size = 20;
    config.shap_samples = 6;
    config.shap_background = 25;
    config.pfi_repeats = 3;
    config.ice_plot_lines = 8;
    config.seed = 5;

    run_pipeline(config);

    const fs::path run = base / "run";
    const std::vector<std::string> expected = {
        "run_config.json",
        "features.csv",
        "prepare.json",
        "select/selection.json",
        "select/kdist.csv",
        "select/sweep_kmeans.csv",
        "select/sweep_agglomerative.csv",
        "select/sweep_birch.csv",
        "select/sweep_dbscan.csv",
        "select/sweep_dbscan_groups.csv",
        "select/sweep_bandwidth.csv",
        "select/sweep_bandwidth_groups.csv",
        "vote/aligned.csv",
        "vote/consensus.csv",
        "vote/vote.json",
        "fit/accuracy.csv",
        "report/table_cluster_means.csv",
        "report/table_cluster_sizes.csv",
        "report/table_accuracy.csv",
        "report/table_qpdp_kl.csv",
        "report/table_qpdp_mse.csv",
        "report/table_shap.csv",
        "report/table_pfi.csv",
        "report/table_pfi_stddev.csv",
        "report/table_voted_means.csv",
        "report/figures/kdist_knee.svg",
    };
    for (const std::string& rel : expected) {
        INFO("expected artifact ", rel);
        CHECK(fs::exists(run / rel));
    }
    for (const std::string algorithm :
         {"kmeans", "dbscan", "agglomerative", "mean_shift", "birch"}) {
        CHECK(fs::exists(run / ("cluster/" + algorithm + ".csv")));
        CHECK(fs::exists(run / ("fit/model_" + algorithm + ".json")));
        CHECK(fs::exists(run / ("fit/split_" + algorithm + ".json")));
        CHECK(fs::exists(run / ("explain/qpdp_" + algorithm + ".csv")));
        CHECK(fs::exists(run / ("explain/pfi_" + algorithm + ".csv")));
        CHECK(fs::exists(run / ("explain/shap_values_" + algorithm + ".csv")));
        CHECK(fs::exists(run / ("explain/explain_" + algorithm + ".json")));
    }

    // the persisted configuration restores the run settings, minus out_dir
    std::ifstream config_in(run / "run_config.json");
    const nlohmann::json config_json = nlohmann::json::parse(config_in);
    CHECK_FALSE(config_json.contains("out_dir"));
    const PipelineConfig restored = config_from_json(config_json);
    CHECK(restored.seed == 5);
    CHECK(restored.n_trees == 15);
    CHECK(restored.features_path == features_path);

    std::ifstream prepare_in(run / "prepare.json");
    const nlohmann::json prepare_json = nlohmann::json::parse(prepare_in);
    CHECK(prepare_json.at("source") == "features");
    CHECK(prepare_json.at("rows") == 150);

    // the clean two-blob input pins the sweep outcome
    std::ifstream selection_in(run / "select" / "selection.json");
    const nlohmann::json selection = nlohmann::json::parse(selection_in);
    CHECK(selection.at("kmeans").at("k") == 2);
    CHECK(selection.at("agglomerative").at("k") == 2);
    CHECK(selection.at("birch").at("k") == 2);
    CHECK(selection.at("mean_shift").at("k") == 2);

    const csv::Table consensus = csv::read_file((run / "vote" / "consensus.csv").string());
    const std::size_t label_col = column_of(consensus, "label");
    REQUIRE(consensus.rows.size() == 150);
    Index in_first = 0, in_second = 0;
    for (const auto& row : consensus.rows) {
        const int label = std::stoi(row[label_col]);
        REQUIRE(label >= 1);
        REQUIRE(label <= 2);
        (label == 1 ? in_first : in_second) += 1;
    }
    CHECK(in_first == 100);
    CHECK(in_second == 50);

    const csv::Table accuracy = csv::read_file((run / "fit" / "accuracy.csv").string());
    const std::size_t acc_col = column_of(accuracy, "accuracy");
    REQUIRE(accuracy.rows.size() == 5);
    for (const auto& row : accuracy.rows) CHECK(std::stod(row[acc_col]) >= 0.9);

    // report stage reruns byte-identically from the persisted artifacts
    const std::string means_before = read_all(run / "report" / "table_cluster_means.csv");
    const std::string figure_before = read_all(run / "report" / "figures" / "kdist_knee.svg");
    fs::remove_all(run / "report");
    stage_report(config, run.string());
    CHECK(read_all(run / "report" / "table_cluster_means.csv") == means_before);
    CHECK(read_all(run / "report" / "figures" / "kdist_knee.svg") == figure_before);

    fs::remove_all(base);
}
