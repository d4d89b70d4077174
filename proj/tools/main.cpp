#include "clustex/csv.hpp"
#include "clustex/dataset.hpp"
#include "clustex/pipeline.hpp"
#include "clustex/synthetic.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace {

using clustex::PipelineConfig;

void add_config_flags(CLI::App* cmd, PipelineConfig& config) {
    cmd->add_option("--survey", config.survey_path, "Survey CSV of raw item responses");
    cmd->add_option("--schema", config.schema_path,
                    "Factor schema JSON (defaults to the built-in six-factor layout)");
    cmd->add_option("--features", config.features_path,
                    "Precomputed factor-score CSV; skips survey preparation");
    cmd->add_option("--missing-token", config.missing_token, "Cell value treated as missing");
    cmd->add_option("--incomplete-threshold", config.incomplete_threshold,
                    "Highest tolerated fraction of missing items per respondent");

    cmd->add_option("--k-min", config.k_min, "Smallest cluster count to sweep");
    cmd->add_option("--k-max", config.k_max, "Largest cluster count to sweep");
    cmd->add_option("--kdist-k", config.kdist_k,
                    "Neighbor rank of the k-distance curve (0 = twice the feature count)");
    cmd->add_option("--eps", config.eps_override,
                    "DBSCAN radius; overrides the knee estimate when positive");
    cmd->add_option("--min-pts-max", config.min_pts_max, "Largest min_pts to sweep");
    cmd->add_option("--bandwidth-min", config.bandwidth_min, "Smallest mean-shift bandwidth");
    cmd->add_option("--bandwidth-max", config.bandwidth_max, "Largest mean-shift bandwidth");
    cmd->add_option("--bandwidth-step", config.bandwidth_step, "Bandwidth sweep step");
    cmd->add_option("--birch-threshold", config.birch_threshold, "BIRCH absorption radius");
    cmd->add_option("--birch-branching", config.birch_branching, "BIRCH branching factor");

    cmd->add_option("--split", config.split_ratio, "Train fraction of the stratified split");
    cmd->add_option("--learning-rate", config.learning_rate, "Boosting learning rate");
    cmd->add_option("--max-depth", config.max_depth, "Tree depth limit");
    cmd->add_option("--trees", config.n_trees, "Boosting rounds");

    cmd->add_option("--grid-size", config.grid_size, "PDP/ICE grid points per feature");
    cmd->add_option("--qpdp-epsilon", config.qpdp_epsilon, "KL smoothing constant");
    cmd->add_option("--shap-samples", config.shap_samples, "Test rows given Shapley values");
    cmd->add_option("--shap-background", config.shap_background,
                    "Training rows in the Shapley background sample");
    cmd->add_option("--shap-mode", config.shap_mode, "single-model or retrain")
        ->check(CLI::IsMember({"single-model", "retrain"}));
    cmd->add_option("--pfi-repeats", config.pfi_repeats, "Permutation repeats per feature");
    cmd->add_option("--ice-lines", config.ice_plot_lines,
                    "ICE lines drawn per figure (0 = all)");

    cmd->add_option("--seed", config.seed, "Root seed; every stage derives from it");
    cmd->set_config("--config", "", "Key=value file of the same options; flags win");
}

void init_run_dir(const PipelineConfig& config) {
    if (config.out_dir.empty()) throw std::invalid_argument("output directory not set");
    if (std::filesystem::exists(config.out_dir) &&
        !std::filesystem::is_empty(config.out_dir))
        throw std::invalid_argument("output directory " + config.out_dir + " is not empty");
    std::filesystem::create_directories(config.out_dir);
    std::ofstream out(std::filesystem::path(config.out_dir) / "run_config.json",
                      std::ios::binary);
    out << clustex::config_to_json(config).dump(2) << '\n';
}

PipelineConfig load_run_config(const std::string& run_dir) {
    const auto path = std::filesystem::path(run_dir) / "run_config.json";
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("no run_config.json in " + run_dir +
                                 "; create the directory with `prepare` or `run`");
    return clustex::config_from_json(nlohmann::json::parse(in));
}

void guarded(const std::string& stage,
             const std::function<void(const PipelineConfig&, const std::string&)>& body,
             const PipelineConfig& config, const std::string& run_dir) {
    try {
        body(config, run_dir);
    } catch (const clustex::StageError&) {
        throw;
    } catch (const std::exception& error) {
        throw clustex::StageError(stage, error.what());
    }
}

std::vector<double> parse_means(const std::string& text) {
    std::vector<double> values;
    std::stringstream stream(text);
    std::string part;
    while (std::getline(stream, part, ',')) values.push_back(std::stod(part));
    return values;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Survey clustering, consensus voting and model explanation pipeline"};
    app.require_subcommand(1);

    PipelineConfig config;
    std::string run_dir;

    CLI::App* run = app.add_subcommand("run", "Run every stage into a fresh directory");
    add_config_flags(run, config);
    run->add_option("--out", config.out_dir, "Output directory (must not hold files)")
        ->required();
    run->callback([&] { clustex::run_pipeline(config); });

    CLI::App* prepare =
        app.add_subcommand("prepare", "Initialize a run directory and score the input");
    add_config_flags(prepare, config);
    prepare->add_option("--out", config.out_dir, "Run directory to create")->required();
    prepare->callback([&] {
        init_run_dir(config);
        guarded("prepare", clustex::stage_prepare, config, config.out_dir);
    });

    const std::vector<std::pair<std::string, std::function<void(const PipelineConfig&,
                                                                const std::string&)>>>
        stages = {{"select", clustex::stage_select},   {"cluster", clustex::stage_cluster},
                  {"vote", clustex::stage_vote},       {"fit", clustex::stage_fit},
                  {"explain", clustex::stage_explain}, {"report", clustex::stage_report}};
    for (const auto& [name, body] : stages) {
        CLI::App* cmd = app.add_subcommand(
            name, "Rerun the " + name + " stage of an existing run directory");
        cmd->add_option("--run", run_dir, "Run directory created by `prepare` or `run`")
            ->required();
        const auto stage_body = body;
        const std::string stage_name = name;
        cmd->callback([&, stage_body, stage_name] {
            guarded(stage_name, stage_body, load_run_config(run_dir), run_dir);
        });
    }

    CLI::App* synth = app.add_subcommand("synth", "Write a synthetic factor-score dataset");
    std::string synth_out, truth_out;
    std::vector<long> sizes;
    std::vector<std::string> mean_rows;
    clustex::SyntheticSpec spec = clustex::default_synthetic_spec();
    synth->add_option("--out", synth_out, "Feature CSV to write")->required();
    synth->add_option("--truth", truth_out, "Optional ground-truth CSV (id,cluster)");
    synth->add_option("--sizes", sizes, "Cluster sizes (default 1340 660)");
    synth->add_option("--cluster-mean", mean_rows,
                      "Comma-separated factor means, once per cluster");
    synth->add_option("--noise", spec.noise_scale, "Uniform noise half-width");
    synth->add_option("--dominant", spec.dominant_feature,
                      "Index of the dominant separating feature");
    synth->add_option("--seed", spec.seed, "Generator seed");
    synth->callback([&] {
        if (!sizes.empty()) spec.cluster_sizes.assign(sizes.begin(), sizes.end());
        if (!mean_rows.empty()) {
            const std::vector<double> first = parse_means(mean_rows.front());
            clustex::Matrix means(static_cast<clustex::Index>(mean_rows.size()),
                                  static_cast<clustex::Index>(first.size()));
            for (std::size_t r = 0; r < mean_rows.size(); ++r) {
                const std::vector<double> row = parse_means(mean_rows[r]);
                if (row.size() != first.size())
                    throw std::invalid_argument("synth: ragged --cluster-mean rows");
                for (std::size_t c = 0; c < row.size(); ++c)
                    means(static_cast<clustex::Index>(r), static_cast<clustex::Index>(c)) =
                        row[c];
            }
            spec.cluster_means = means;
        }
        const clustex::SyntheticData data = clustex::generate_synthetic(spec);
        clustex::features_to_csv(data.features, synth_out);
        if (!truth_out.empty()) {
            clustex::csv::Table table;
            table.header = {"id", "cluster"};
            for (std::size_t i = 0; i < data.truth.size(); ++i)
                table.rows.push_back(
                    {data.features.respondent_ids[i], std::to_string(data.truth[i])});
            clustex::csv::write_file(truth_out, table);
        }
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& error) {
        return app.exit(error);
    } catch (const clustex::StageError& error) {
        std::cerr << "stage " << error.stage << " failed: " << error.what() << '\n';
        return clustex::stage_exit_code(error.stage);
    } catch (const std::exception& error) {
        std::cerr << "error: " << error.what() << '\n';
        return 1;
    }
    return 0;
}
