#include "clustex/pipeline.hpp"

#include "artifacts.hpp"
#include "clustex/csv.hpp"
#include "clustex/explain.hpp"
#include "clustex/rng.hpp"
#include "clustex/svg.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace clustex {

using nlohmann::json;

namespace {

std::size_t column_of(const csv::Table& table, const std::string& name) {
    for (std::size_t c = 0; c < table.header.size(); ++c)
        if (table.header[c] == name) return c;
    throw std::runtime_error("column " + name + " not found");
}

csv::Table read_artifact(const std::string& run_dir, const std::string& rel,
                         const std::string& stage) {
    const std::string path = artifacts::join(run_dir, rel);
    artifacts::require(path, stage);
    return csv::read_file(path);
}

struct ClusterStats {
    Index size = 0;
    Vector mean;
    double grand_mean = 0.0;
};

ClusterStats cluster_stats(const Matrix& X, const std::vector<int>& labels, int cluster) {
    ClusterStats stats;
    stats.mean = Vector::Zero(X.cols());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != cluster) continue;
        stats.mean += X.row(static_cast<Index>(i)).transpose();
        ++stats.size;
    }
    if (stats.size > 0) {
        stats.mean /= static_cast<double>(stats.size);
        stats.grand_mean = stats.mean.mean();
    }
    return stats;
}

void append_means_row(csv::Table& table, const std::string& head, const ClusterStats& stats,
                      int cluster) {
    std::vector<std::string> row = {head, std::to_string(cluster),
                                    std::to_string(stats.size)};
    for (Index f = 0; f < stats.mean.size(); ++f)
        row.push_back(stats.size > 0 ? csv::format_fixed(stats.mean(f)) : "");
    row.push_back(stats.size > 0 ? csv::format_fixed(stats.grand_mean) : "");
    table.rows.push_back(std::move(row));
}

}  // namespace

void emit_tables(const std::string& run_dir) {
    const FeatureMatrix features = artifacts::load_features(run_dir);
    const Matrix& X = features.values;
    const Index p = X.cols();
    const artifacts::AlignedTable aligned = artifacts::load_aligned(run_dir);
    const csv::Table consensus = read_artifact(run_dir, "vote/consensus.csv", "vote");
    const std::string report_dir = artifacts::join(run_dir, "report");
    artifacts::ensure_dir(report_dir);

    std::vector<int> voted;
    for (const auto& row : consensus.rows)
        voted.push_back(std::stoi(row[column_of(consensus, "label")]));

    // Per-cluster factor means, one block of two rows per algorithm.
    csv::Table means_table;
    means_table.header = {"algorithm", "cluster", "size"};
    for (const auto& name : features.feature_names) means_table.header.push_back(name);
    means_table.header.push_back("grand_mean");
    for (std::size_t a = 0; a < artifacts::kAlgorithms.size(); ++a)
        for (int cluster = 1; cluster <= 2; ++cluster)
            append_means_row(means_table, artifacts::kAlgorithms[a],
                             cluster_stats(X, aligned.columns[a], cluster), cluster);
    csv::write_file(artifacts::join(report_dir, "table_cluster_means.csv"), means_table);

    // Cluster sizes per algorithm plus the consensus row.
    csv::Table sizes_table;
    sizes_table.header = {"algorithm", "cluster_1", "cluster_2", "abstain"};
    for (std::size_t a = 0; a < artifacts::kAlgorithms.size(); ++a) {
        Index n1 = 0, n2 = 0, abstain = 0;
        for (int label : aligned.columns[a]) {
            if (label == 1) ++n1;
            else if (label == 2) ++n2;
            else ++abstain;
        }
        sizes_table.rows.push_back({artifacts::kAlgorithms[a], std::to_string(n1),
                                    std::to_string(n2), std::to_string(abstain)});
    }
    {
        Index n1 = 0, n2 = 0;
        for (int label : voted) (label == 1 ? n1 : n2) += 1;
        sizes_table.rows.push_back({"voting", std::to_string(n1), std::to_string(n2), "0"});
    }
    csv::write_file(artifacts::join(report_dir, "table_cluster_sizes.csv"), sizes_table);

    // Classifier accuracy per algorithm branch.
    const csv::Table fit_accuracy = read_artifact(run_dir, "fit/accuracy.csv", "fit");
    csv::Table accuracy_table;
    accuracy_table.header = {"algorithm", "train_rows", "test_rows", "accuracy"};
    for (const auto& row : fit_accuracy.rows)
        accuracy_table.rows.push_back({row[column_of(fit_accuracy, "algorithm")],
                                       row[column_of(fit_accuracy, "train_rows")],
                                       row[column_of(fit_accuracy, "test_rows")],
                                       row[column_of(fit_accuracy, "accuracy")]});
    csv::write_file(artifacts::join(report_dir, "table_accuracy.csv"), accuracy_table);

    // Explainer scores: feature rows, one column per algorithm.
    std::map<std::string, std::map<std::string, double>> kl, mse, shap, pfi_mean, pfi_sd;
    for (const auto& algorithm : artifacts::kAlgorithms) {
        const csv::Table qpdp_table =
            read_artifact(run_dir, "explain/qpdp_" + algorithm + ".csv", "explain");
        for (const auto& row : qpdp_table.rows) {
            const std::string& feature = row[column_of(qpdp_table, "feature")];
            kl[feature][algorithm] = std::stod(row[column_of(qpdp_table, "min_kl")]);
            mse[feature][algorithm] = std::stod(row[column_of(qpdp_table, "min_mse")]);
        }
        const json explain_info = artifacts::load_json(
            artifacts::join(run_dir, "explain/explain_" + algorithm + ".json"), "explain");
        for (const auto& [feature, value] : explain_info.at("shap").at("mean_abs").items())
            shap[feature][algorithm] = value.get<double>();
        const csv::Table pfi_table =
            read_artifact(run_dir, "explain/pfi_" + algorithm + ".csv", "explain");
        for (const auto& row : pfi_table.rows) {
            const std::string& feature = row[column_of(pfi_table, "feature")];
            pfi_mean[feature][algorithm] = std::stod(row[column_of(pfi_table, "mean_drop")]);
            pfi_sd[feature][algorithm] = std::stod(row[column_of(pfi_table, "stddev")]);
        }
    }

    const auto write_score_table = [&](const std::string& name,
                                       std::map<std::string, std::map<std::string, double>>& scores) {
        csv::Table table;
        table.header = {"feature"};
        for (const auto& algorithm : artifacts::kAlgorithms) table.header.push_back(algorithm);
        for (const auto& feature : features.feature_names) {
            std::vector<std::string> row = {feature};
            for (const auto& algorithm : artifacts::kAlgorithms)
                row.push_back(csv::format_fixed(scores.at(feature).at(algorithm)));
            table.rows.push_back(std::move(row));
        }
        csv::write_file(artifacts::join(report_dir, name), table);
    };
    write_score_table("table_qpdp_kl.csv", kl);
    write_score_table("table_qpdp_mse.csv", mse);
    write_score_table("table_shap.csv", shap);
    write_score_table("table_pfi.csv", pfi_mean);
    write_score_table("table_pfi_stddev.csv", pfi_sd);

    // Factor means of the voted clusters.
    csv::Table voted_table;
    voted_table.header = {"cluster", "size"};
    for (const auto& name : features.feature_names) voted_table.header.push_back(name);
    voted_table.header.push_back("grand_mean");
    for (int cluster = 1; cluster <= 2; ++cluster) {
        const ClusterStats stats = cluster_stats(X, voted, cluster);
        std::vector<std::string> row = {std::to_string(cluster), std::to_string(stats.size)};
        for (Index f = 0; f < p; ++f)
            row.push_back(stats.size > 0 ? csv::format_fixed(stats.mean(f)) : "");
        row.push_back(stats.size > 0 ? csv::format_fixed(stats.grand_mean) : "");
        voted_table.rows.push_back(std::move(row));
    }
    csv::write_file(artifacts::join(report_dir, "table_voted_means.csv"), voted_table);

    // Rank agreement across the four importance families and five branches.
    std::vector<ImportanceColumn> columns;
    const auto add_family = [&](const std::string& family,
                                std::map<std::string, std::map<std::string, double>>& scores,
                                bool lower_is_better) {
        for (const auto& algorithm : artifacts::kAlgorithms) {
            ImportanceColumn column;
            column.name = family + "_" + algorithm;
            column.lower_is_better = lower_is_better;
            column.values.resize(p);
            for (Index f = 0; f < p; ++f)
                column.values(f) =
                    scores.at(features.feature_names[static_cast<std::size_t>(f)]).at(algorithm);
            columns.push_back(std::move(column));
        }
    };
    add_family("qpdp_kl", kl, true);
    add_family("qpdp_mse", mse, true);
    add_family("shap", shap, false);
    add_family("pfi", pfi_mean, false);
    const ImportanceTable consensus_table = importance_consensus(features.feature_names, columns);

    csv::Table rank_table;
    rank_table.header = {"feature"};
    for (const auto& column : columns) rank_table.header.push_back("rank_" + column.name);
    rank_table.header.push_back("mean_rank");
    for (Index f : consensus_table.order) {
        std::vector<std::string> row = {features.feature_names[static_cast<std::size_t>(f)]};
        for (Index c = 0; c < static_cast<Index>(columns.size()); ++c)
            row.push_back(std::to_string(static_cast<long>(std::llround(consensus_table.ranks(f, c)))));
        row.push_back(csv::format_fixed(consensus_table.mean_rank(f)));
        rank_table.rows.push_back(std::move(row));
    }
    csv::write_file(artifacts::join(report_dir, "table_importance_consensus.csv"), rank_table);
}

// ---------------------------------------------------------------------------
// Figures
// ---------------------------------------------------------------------------

namespace {

constexpr double kFigWidth = 640.0;
constexpr double kFigHeight = 420.0;

struct Series {
    std::vector<double> xs;
    std::vector<double> ys;
};

void pad_range(double& lo, double& hi) {
    if (hi <= lo) {
        lo -= 0.5;
        hi += 0.5;
        return;
    }
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
}

std::string number_label(double value) {
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%.4g", value);
    return buffer;
}

// Silhouette against the sweep parameter, with the Calinski-Harabasz curve
// rescaled into the same frame and the chosen parameter marked.
void sweep_figure(const std::string& run_dir, const std::string& rel, const std::string& out_name,
                  const std::string& title, const std::string& x_label, double chosen) {
    const std::string path = artifacts::join(run_dir, rel);
    artifacts::require(path, "select");
    const csv::Table table = csv::read_file(path);
    const std::size_t param_col = 0;
    const std::size_t scored_col = column_of(table, "scored");
    const std::size_t sil_col = column_of(table, "silhouette");
    const std::size_t ch_col = column_of(table, "calinski_harabasz");

    Series sil, ch;
    for (const auto& row : table.rows) {
        if (row[scored_col] != "1") continue;
        sil.xs.push_back(std::stod(row[param_col]));
        sil.ys.push_back(std::stod(row[sil_col]));
        ch.xs.push_back(std::stod(row[param_col]));
        ch.ys.push_back(std::stod(row[ch_col]));
    }

    svg::Canvas canvas(kFigWidth, kFigHeight);
    if (sil.xs.empty()) {
        svg::draw_frame(canvas, kFigWidth, kFigHeight, 0.0, 1.0, 0.0, 1.0, title, x_label,
                        "silhouette");
        canvas.text(kFigWidth / 2.0, kFigHeight / 2.0, "no scoreable clusterings", 12.0,
                    "middle");
        svg::write_svg(artifacts::join(run_dir, "report/figures/" + out_name), canvas.finish());
        return;
    }

    double x_lo = *std::min_element(sil.xs.begin(), sil.xs.end());
    double x_hi = *std::max_element(sil.xs.begin(), sil.xs.end());
    double y_lo = *std::min_element(sil.ys.begin(), sil.ys.end());
    double y_hi = *std::max_element(sil.ys.begin(), sil.ys.end());
    pad_range(x_lo, x_hi);
    pad_range(y_lo, y_hi);
    const svg::Frame frame =
        svg::draw_frame(canvas, kFigWidth, kFigHeight, x_lo, x_hi, y_lo, y_hi, title, x_label,
                        "silhouette");

    canvas.line(frame.x(chosen), frame.y.range_lo, frame.x(chosen), frame.y.range_hi,
                "#999999");

    const double ch_lo = *std::min_element(ch.ys.begin(), ch.ys.end());
    const double ch_hi = *std::max_element(ch.ys.begin(), ch.ys.end());
    std::vector<double> ch_px, ch_py;
    for (std::size_t i = 0; i < ch.xs.size(); ++i) {
        const double t = ch_hi > ch_lo ? (ch.ys[i] - ch_lo) / (ch_hi - ch_lo) : 0.5;
        ch_px.push_back(frame.x(ch.xs[i]));
        ch_py.push_back(frame.y(y_lo + t * (y_hi - y_lo)));
    }
    if (ch_px.size() > 1) canvas.polyline(ch_px, ch_py, "#e08a2e", 1.5);
    for (std::size_t i = 0; i < ch_px.size(); ++i)
        canvas.circle(ch_px[i], ch_py[i], 2.5, "#e08a2e");

    std::vector<double> sil_px, sil_py;
    for (std::size_t i = 0; i < sil.xs.size(); ++i) {
        sil_px.push_back(frame.x(sil.xs[i]));
        sil_py.push_back(frame.y(sil.ys[i]));
    }
    if (sil_px.size() > 1) canvas.polyline(sil_px, sil_py, "#1f6fb2", 2.0);
    for (std::size_t i = 0; i < sil_px.size(); ++i)
        canvas.circle(sil_px[i], sil_py[i], 2.5, "#1f6fb2");

    canvas.text(frame.x.range_hi - 4.0, 46.0, "silhouette", 10.0, "end", "#1f6fb2");
    canvas.text(frame.x.range_hi - 4.0, 60.0, "Calinski-Harabasz (rescaled)", 10.0, "end",
                "#e08a2e");
    svg::write_svg(artifacts::join(run_dir, "report/figures/" + out_name), canvas.finish());
}

void kdist_figure(const std::string& run_dir, const json& selection) {
    const csv::Table table = read_artifact(run_dir, "select/kdist.csv", "select");
    std::vector<double> distances;
    for (const auto& row : table.rows) distances.push_back(std::stod(row[1]));
    if (distances.empty()) return;

    const Index knee = selection.at("dbscan").at("knee_index").get<Index>();
    const double eps = selection.at("dbscan").at("eps").get<double>();
    const int kdist_k = selection.at("dbscan").at("kdist_k").get<int>();

    double y_lo = distances.front(), y_hi = distances.back();
    pad_range(y_lo, y_hi);
    svg::Canvas canvas(kFigWidth, kFigHeight);
    const svg::Frame frame = svg::draw_frame(
        canvas, kFigWidth, kFigHeight, 0.0, static_cast<double>(distances.size() - 1), y_lo,
        y_hi, "Sorted " + std::to_string(kdist_k) + "-distance curve", "sample rank",
        "distance");

    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < distances.size(); ++i) {
        xs.push_back(frame.x(static_cast<double>(i)));
        ys.push_back(frame.y(distances[i]));
    }
    canvas.polyline(xs, ys, "#1f6fb2", 1.5);
    canvas.line(frame.x(static_cast<double>(knee)), frame.y.range_lo,
                frame.x(static_cast<double>(knee)), frame.y.range_hi, "#c23b3b");
    canvas.text(frame.x(static_cast<double>(knee)) + 6.0, frame.y(eps) - 8.0,
                "knee: eps = " + number_label(eps), 10.0, "start", "#c23b3b");
    svg::write_svg(artifacts::join(run_dir, "report/figures/kdist_knee.svg"), canvas.finish());
}

void pdp_ice_figure(const std::string& run_dir, const std::string& algorithm,
                    const std::string& feature, const std::vector<double>& grid,
                    const std::vector<double>& pd, int ice_plot_lines) {
    const csv::Table ice_table =
        read_artifact(run_dir, "explain/ice_" + algorithm + "_" + feature + ".csv", "explain");
    const std::size_t points = ice_table.header.size() - 1;
    std::size_t lines = ice_table.rows.size();
    if (ice_plot_lines > 0) lines = std::min<std::size_t>(lines, ice_plot_lines);

    double y_lo = pd.empty() ? 0.0 : *std::min_element(pd.begin(), pd.end());
    double y_hi = pd.empty() ? 1.0 : *std::max_element(pd.begin(), pd.end());
    std::vector<std::vector<double>> ice_lines(lines, std::vector<double>(points));
    for (std::size_t r = 0; r < lines; ++r)
        for (std::size_t g = 0; g < points; ++g) {
            const double v = std::stod(ice_table.rows[r][g + 1]);
            ice_lines[r][g] = v;
            y_lo = std::min(y_lo, v);
            y_hi = std::max(y_hi, v);
        }
    pad_range(y_lo, y_hi);

    double x_lo = grid.front(), x_hi = grid.back();
    pad_range(x_lo, x_hi);
    svg::Canvas canvas(kFigWidth, kFigHeight);
    const svg::Frame frame =
        svg::draw_frame(canvas, kFigWidth, kFigHeight, x_lo, x_hi, y_lo, y_hi,
                        algorithm + ": partial dependence on " + feature, feature,
                        "P(cluster 2)");

    std::vector<double> xs(points);
    for (std::size_t g = 0; g < points; ++g) xs[g] = frame.x(grid[g]);
    for (std::size_t r = 0; r < lines; ++r) {
        std::vector<double> ys(points);
        for (std::size_t g = 0; g < points; ++g) ys[g] = frame.y(ice_lines[r][g]);
        canvas.polyline(xs, ys, "#9aa5b1", 0.6, 0.35);
    }
    std::vector<double> pd_ys(points);
    for (std::size_t g = 0; g < points; ++g) pd_ys[g] = frame.y(pd[g]);
    canvas.polyline(xs, pd_ys, "#1f6fb2", 2.5);
    canvas.text(frame.x.range_hi - 4.0, 46.0,
                std::to_string(lines) + " ICE lines, mean in blue", 10.0, "end", "#555555");
    svg::write_svg(
        artifacts::join(run_dir, "report/figures/pdp_ice_" + algorithm + "_" + feature + ".svg"),
        canvas.finish());
}

void qpdp_figure(const std::string& run_dir, const std::string& algorithm,
                 const std::string& feature, const std::vector<double>& unit_grid,
                 const std::vector<double>& mass, const std::string& direction, Index trunc_point,
                 double min_kl) {
    Vector grid(static_cast<Index>(unit_grid.size()));
    for (std::size_t i = 0; i < unit_grid.size(); ++i) grid(static_cast<Index>(i)) = unit_grid[i];
    const StepPdf step =
        make_step_pdf(grid, direction == "rising" ? StepDirection::rising : StepDirection::falling,
                      grid(trunc_point));

    double y_hi = 0.0;
    for (double m : mass) y_hi = std::max(y_hi, m);
    y_hi = std::max(y_hi, step.mass.maxCoeff());
    double y_lo = 0.0;
    pad_range(y_lo, y_hi);

    svg::Canvas canvas(kFigWidth, kFigHeight);
    const svg::Frame frame = svg::draw_frame(
        canvas, kFigWidth, kFigHeight, -0.03, 1.03, y_lo, y_hi,
        algorithm + ": closest step fit for " + feature, "normalized " + feature, "mass");

    std::vector<double> xs, step_ys, nppd_ys;
    for (std::size_t g = 0; g < unit_grid.size(); ++g) {
        xs.push_back(frame.x(unit_grid[g]));
        step_ys.push_back(frame.y(step.mass(static_cast<Index>(g))));
        nppd_ys.push_back(frame.y(mass[g]));
    }
    canvas.polyline(xs, step_ys, "#e08a2e", 2.0);
    canvas.polyline(xs, nppd_ys, "#1f6fb2", 2.0);
    for (std::size_t g = 0; g < xs.size(); ++g)
        canvas.circle(xs[g], nppd_ys[g], 2.0, "#1f6fb2");

    canvas.text(frame.x.range_hi - 4.0, 46.0, "nppd", 10.0, "end", "#1f6fb2");
    canvas.text(frame.x.range_hi - 4.0, 60.0,
                "best step (" + direction + ", KL = " + number_label(min_kl) + ")", 10.0, "end",
                "#e08a2e");
    svg::write_svg(
        artifacts::join(run_dir, "report/figures/qpdp_fit_" + algorithm + "_" + feature + ".svg"),
        canvas.finish());
}

std::string lerp_color(double t) {
    const int from[3] = {31, 111, 178};  // blue, low feature value
    const int to[3] = {209, 59, 59};     // red, high feature value
    char buffer[8];
    std::snprintf(buffer, sizeof(buffer), "#%02x%02x%02x",
                  static_cast<int>(std::lround(from[0] + t * (to[0] - from[0]))),
                  static_cast<int>(std::lround(from[1] + t * (to[1] - from[1]))),
                  static_cast<int>(std::lround(from[2] + t * (to[2] - from[2]))));
    return buffer;
}

void shap_figure(const std::string& run_dir, const std::string& algorithm,
                 const FeatureMatrix& features) {
    const csv::Table table =
        read_artifact(run_dir, "explain/shap_values_" + algorithm + ".csv", "explain");
    const Index p = features.cols();
    const std::size_t samples = table.rows.size();
    if (samples == 0) return;

    double x_abs = 0.0;
    Matrix values(static_cast<Index>(samples), p);
    std::vector<Index> rows(samples);
    for (std::size_t r = 0; r < samples; ++r) {
        rows[r] = std::stol(table.rows[r][0]);
        for (Index f = 0; f < p; ++f) {
            values(static_cast<Index>(r), f) = std::stod(table.rows[r][static_cast<std::size_t>(f) + 2]);
            x_abs = std::max(x_abs, std::abs(values(static_cast<Index>(r), f)));
        }
    }
    if (x_abs == 0.0) x_abs = 1.0;
    x_abs *= 1.08;

    constexpr double left = 96.0, right = 20.0, top = 34.0, bottom = 40.0;
    const double band = (kFigHeight - top - bottom) / static_cast<double>(p);
    svg::Canvas canvas(kFigWidth, kFigHeight);
    const svg::LinearScale x_scale{-x_abs, x_abs, left, kFigWidth - right};

    canvas.text(kFigWidth / 2.0, 20.0, algorithm + ": Shapley value summary", 13.0, "middle");
    canvas.text(kFigWidth / 2.0, kFigHeight - 8.0, "Shapley value (P(cluster 2))", 11.0,
                "middle");
    canvas.line(x_scale(0.0), top, x_scale(0.0), kFigHeight - bottom, "#bbbbbb");
    canvas.line(left, kFigHeight - bottom, kFigWidth - right, kFigHeight - bottom, "#444444");
    for (double v : {-x_abs / 1.08, -x_abs / 2.16, 0.0, x_abs / 2.16, x_abs / 1.08}) {
        canvas.line(x_scale(v), kFigHeight - bottom, x_scale(v), kFigHeight - bottom + 4.0,
                    "#444444");
        canvas.text(x_scale(v), kFigHeight - bottom + 17.0, number_label(v), 10.0, "middle");
    }

    for (Index f = 0; f < p; ++f) {
        const double y_center = top + band * (static_cast<double>(f) + 0.5);
        canvas.text(left - 8.0, y_center + 3.5,
                    features.feature_names[static_cast<std::size_t>(f)], 10.0, "end");
        if (f > 0) canvas.line(left, top + band * f, kFigWidth - right, top + band * f,
                               "#eeeeee");

        double v_lo = features.values(rows[0], f), v_hi = v_lo;
        for (Index r : rows) {
            v_lo = std::min(v_lo, features.values(r, f));
            v_hi = std::max(v_hi, features.values(r, f));
        }
        Rng jitter(derive_seed(0x5caf'f01d, static_cast<std::uint64_t>(f)));
        for (std::size_t r = 0; r < samples; ++r) {
            const double value = features.values(rows[r], f);
            const double t = v_hi > v_lo ? (value - v_lo) / (v_hi - v_lo) : 0.5;
            const double dy = (jitter.next_double() - 0.5) * band * 0.7;
            canvas.circle(x_scale(values(static_cast<Index>(r), f)), y_center + dy, 1.8,
                          lerp_color(t), 0.65);
        }
    }
    canvas.text(kFigWidth - right, top - 6.0, "blue = low feature value, red = high", 9.0,
                "end", "#555555");
    svg::write_svg(
        artifacts::join(run_dir, "report/figures/shap_summary_" + algorithm + ".svg"),
        canvas.finish());
}

}  // namespace

void emit_figures(const std::string& run_dir, int ice_plot_lines) {
    const FeatureMatrix features = artifacts::load_features(run_dir);
    const json selection =
        artifacts::load_json(artifacts::join(run_dir, "select/selection.json"), "select");
    artifacts::ensure_dir(artifacts::join(run_dir, "report/figures"));

    sweep_figure(run_dir, "select/sweep_kmeans.csv", "sweep_kmeans.svg",
                 "k-means validity sweep", "clusters (k)",
                 selection.at("kmeans").at("k").get<double>());
    sweep_figure(run_dir, "select/sweep_agglomerative.csv", "sweep_agglomerative.svg",
                 "Ward agglomerative validity sweep", "clusters (k)",
                 selection.at("agglomerative").at("k").get<double>());
    sweep_figure(run_dir, "select/sweep_birch.csv", "sweep_birch.svg", "BIRCH validity sweep",
                 "clusters (k)", selection.at("birch").at("k").get<double>());
    sweep_figure(run_dir, "select/sweep_dbscan.csv", "sweep_dbscan.svg", "DBSCAN min_pts sweep",
                 "min_pts", selection.at("dbscan").at("min_pts").get<double>());
    sweep_figure(run_dir, "select/sweep_bandwidth.csv", "sweep_bandwidth.svg",
                 "Mean shift bandwidth sweep", "bandwidth",
                 selection.at("mean_shift").at("bandwidth").get<double>());
    kdist_figure(run_dir, selection);

    for (const auto& algorithm : artifacts::kAlgorithms) {
        const csv::Table pd_table =
            read_artifact(run_dir, "explain/pdp_" + algorithm + ".csv", "explain");
        const std::size_t feature_col = column_of(pd_table, "feature");
        const std::size_t value_col = column_of(pd_table, "value");
        const std::size_t pd_col = column_of(pd_table, "pd");
        std::map<std::string, Series> curves;
        for (const auto& row : pd_table.rows) {
            Series& series = curves[row[feature_col]];
            series.xs.push_back(std::stod(row[value_col]));
            series.ys.push_back(std::stod(row[pd_col]));
        }

        const csv::Table nppd_table =
            read_artifact(run_dir, "explain/nppd_" + algorithm + ".csv", "explain");
        std::map<std::string, Series> nppds;
        for (const auto& row : nppd_table.rows) {
            Series& series = nppds[row[column_of(nppd_table, "feature")]];
            series.xs.push_back(std::stod(row[column_of(nppd_table, "unit_value")]));
            series.ys.push_back(std::stod(row[column_of(nppd_table, "mass")]));
        }
        const csv::Table qpdp_table =
            read_artifact(run_dir, "explain/qpdp_" + algorithm + ".csv", "explain");

        for (const auto& feature : features.feature_names) {
            const Series& curve = curves.at(feature);
            pdp_ice_figure(run_dir, algorithm, feature, curve.xs, curve.ys, ice_plot_lines);
        }
        for (const auto& row : qpdp_table.rows) {
            const std::string& feature = row[column_of(qpdp_table, "feature")];
            const Series& nppd = nppds.at(feature);
            qpdp_figure(run_dir, algorithm, feature, nppd.xs, nppd.ys,
                        row[column_of(qpdp_table, "kl_direction")],
                        std::stol(row[column_of(qpdp_table, "kl_point")]),
                        std::stod(row[column_of(qpdp_table, "min_kl")]));
        }
        shap_figure(run_dir, algorithm, features);
    }
}

}  // namespace clustex
