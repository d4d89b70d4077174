#pragma once

// Run-directory layout shared by the pipeline stages and the report
// emitters. Stages communicate only through these files, never in memory,
// so any stage can be rerun in isolation against a partially built run.

#include "clustex/csv.hpp"
#include "clustex/dataset.hpp"
#include "clustex/types.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace clustex::artifacts {

// Fixed processing and reporting order of the algorithm branches.
inline const std::vector<std::string> kAlgorithms = {"kmeans", "dbscan", "agglomerative",
                                                     "mean_shift", "birch"};

inline std::string join(const std::string& run_dir, const std::string& rel) {
    return (std::filesystem::path(run_dir) / rel).string();
}

inline void ensure_dir(const std::string& path) {
    std::error_code ec;
    std::filesystem::create_directories(path, ec);
    if (ec) throw std::runtime_error("cannot create directory " + path + ": " + ec.message());
}

// Missing artifacts name the stage that writes them, so a failed or skipped
// stage is diagnosable from the error alone.
inline void require(const std::string& path, const std::string& producing_stage) {
    if (!std::filesystem::exists(path))
        throw std::runtime_error("missing artifact " + path + "; run the " + producing_stage +
                                 " stage first");
}

inline void save_json(const std::string& path, const nlohmann::json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(2) << '\n';
}

inline nlohmann::json load_json(const std::string& path, const std::string& producing_stage) {
    require(path, producing_stage);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    return nlohmann::json::parse(in);
}

inline FeatureMatrix load_features(const std::string& run_dir) {
    const std::string path = join(run_dir, "features.csv");
    require(path, "prepare");
    return features_from_csv(path);
}

// Label files carry the CSV noise encoding (0 = noise/abstain).
inline void save_labels_csv(const std::string& path, const std::vector<std::string>& ids,
                            const std::vector<int>& labels) {
    csv::Table table;
    table.header = {"id", "label"};
    for (std::size_t i = 0; i < ids.size(); ++i)
        table.rows.push_back({ids[i], std::to_string(labels[i])});
    csv::write_file(path, table);
}

inline Labeling load_labeling(const std::string& run_dir, const std::string& algorithm) {
    const std::string path = join(run_dir, "cluster/" + algorithm + ".csv");
    require(path, "cluster");
    const csv::Table table = csv::read_file(path);
    if (table.header != std::vector<std::string>{"id", "label"})
        throw std::runtime_error(path + ": unexpected columns");
    Labeling labeling;
    labeling.algorithm = algorithm;
    for (const auto& row : table.rows) {
        const int label = std::stoi(row[1]);
        labeling.labels.push_back(label);
        labeling.noise.push_back(label == kNoiseLabel ? 1 : 0);
    }
    return labeling;
}

struct AlignedTable {
    std::vector<std::string> ids;
    std::vector<std::vector<int>> columns;  // one per algorithm, kAlgorithms order
};

inline AlignedTable load_aligned(const std::string& run_dir) {
    const std::string path = join(run_dir, "vote/aligned.csv");
    require(path, "vote");
    const csv::Table table = csv::read_file(path);
    std::vector<std::string> expected = {"id"};
    expected.insert(expected.end(), kAlgorithms.begin(), kAlgorithms.end());
    if (table.header != expected) throw std::runtime_error(path + ": unexpected columns");
    AlignedTable aligned;
    aligned.columns.resize(kAlgorithms.size());
    for (const auto& row : table.rows) {
        aligned.ids.push_back(row[0]);
        for (std::size_t a = 0; a < kAlgorithms.size(); ++a)
            aligned.columns[a].push_back(std::stoi(row[a + 1]));
    }
    return aligned;
}

struct SplitIndices {
    std::vector<Index> train;  // original feature-matrix row indices
    std::vector<Index> test;
};

inline SplitIndices load_split(const std::string& run_dir, const std::string& algorithm) {
    const nlohmann::json j =
        load_json(join(run_dir, "fit/split_" + algorithm + ".json"), "fit");
    SplitIndices split;
    for (const auto& v : j.at("train")) split.train.push_back(v.get<Index>());
    for (const auto& v : j.at("test")) split.test.push_back(v.get<Index>());
    return split;
}

}  // namespace clustex::artifacts
