#pragma once

#include "clustex/types.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace clustex {

// Every knob of the pipeline with defaults matching the reported study
// settings; CLI flags map onto these fields one to one.
struct PipelineConfig {
    std::string survey_path;    // raw item responses; enables the prepare rules
    std::string schema_path;    // factor schema JSON; empty uses the built-in schema
    std::string features_path;  // precomputed factor scores; bypasses survey prep
    std::string missing_token;
    double incomplete_threshold = 0.10;

    int k_min = 2;
    int k_max = 11;
    int kdist_k = 0;  // 0 derives twice the feature count
    double eps_override = 0.0;  // 0 takes eps from the knee
    int min_pts_max = 200;
    double bandwidth_min = 0.1;
    double bandwidth_max = 0.3;
    double bandwidth_step = 0.01;
    // Single-pass CF insertion lets a large entry absorb far-away points once
    // n*r^2 dominates the squared-radius update, so the pipeline default sits
    // below the within-cluster rms radius of 1-5 Likert factor scores.
    double birch_threshold = 0.15;
    int birch_branching = 50;

    double split_ratio = 0.7;
    double learning_rate = 1.0;
    int max_depth = 10;
    int n_trees = 100;

    int grid_size = 50;
    double qpdp_epsilon = 1e-8;
    int shap_samples = 1000;
    int shap_background = 200;
    std::string shap_mode = "single-model";  // or "retrain"
    int pfi_repeats = 30;
    int ice_plot_lines = 0;  // 0 draws every ICE line in the figures

    std::uint64_t seed = 1;
    std::string out_dir;
};

nlohmann::json config_to_json(const PipelineConfig& config);
PipelineConfig config_from_json(const nlohmann::json& j);

struct StageError : std::runtime_error {
    StageError(std::string stage_name, const std::string& what)
        : std::runtime_error(what), stage(std::move(stage_name)) {}
    std::string stage;
};

int stage_exit_code(const std::string& stage);

// Stages read their inputs from the run directory and persist their outputs
// there, so any stage can be rerun in isolation with identical results.
void stage_prepare(const PipelineConfig& config, const std::string& run_dir);
void stage_select(const PipelineConfig& config, const std::string& run_dir);
void stage_cluster(const PipelineConfig& config, const std::string& run_dir);
void stage_vote(const PipelineConfig& config, const std::string& run_dir);
void stage_fit(const PipelineConfig& config, const std::string& run_dir);
void stage_explain(const PipelineConfig& config, const std::string& run_dir);
void stage_report(const PipelineConfig& config, const std::string& run_dir);

// Aggregated tables and figures, rebuilt from persisted stage artifacts.
void emit_tables(const std::string& run_dir);
void emit_figures(const std::string& run_dir, int ice_plot_lines);

// Creates the output directory (it must not already hold files), persists the
// configuration, and runs every stage in order. Throws StageError on the
// first failing stage, leaving earlier artifacts in place.
void run_pipeline(const PipelineConfig& config);

}  // namespace clustex
