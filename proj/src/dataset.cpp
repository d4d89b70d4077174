#include "clustex/dataset.hpp"

#include "clustex/csv.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace clustex {

using nlohmann::json;

void FactorSchema::validate() const {
    if (factors.empty()) throw std::invalid_argument("schema: no factors defined");
    std::set<std::string> factor_names;
    std::set<std::string> claimed_items;
    for (const auto& f : factors) {
        if (f.items.empty())
            throw std::invalid_argument("schema: factor '" + f.name + "' has no items");
        if (!factor_names.insert(f.name).second)
            throw std::invalid_argument("schema: duplicate factor name '" + f.name + "'");
        for (const auto& it : f.items) {
            if (!claimed_items.insert(it.item).second)
                throw std::invalid_argument("schema: item '" + it.item +
                                            "' appears in more than one factor");
        }
    }
    if (scale_min >= scale_max) throw std::invalid_argument("schema: scale_min must be < scale_max");
}

FactorSchema schema_from_json(const std::string& text) {
    json doc = json::parse(text);
    FactorSchema schema;
    schema.scale_min = doc.value("scale_min", 1);
    schema.scale_max = doc.value("scale_max", 5);
    for (const auto& f : doc.at("factors")) {
        Factor factor;
        factor.name = f.at("name").get<std::string>();
        for (const auto& it : f.at("items")) {
            FactorItem item;
            if (it.is_string()) {
                item.item = it.get<std::string>();
            } else {
                item.item = it.at("item").get<std::string>();
                item.reverse_coded = it.value("reverse_coded", false);
            }
            factor.items.push_back(std::move(item));
        }
        schema.factors.push_back(std::move(factor));
    }
    schema.validate();
    return schema;
}

FactorSchema load_schema(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("schema: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return schema_from_json(buf.str());
}

std::string schema_to_json(const FactorSchema& schema) {
    json doc;
    doc["scale_min"] = schema.scale_min;
    doc["scale_max"] = schema.scale_max;
    doc["factors"] = json::array();
    for (const auto& f : schema.factors) {
        json jf;
        jf["name"] = f.name;
        jf["items"] = json::array();
        for (const auto& it : f.items)
            jf["items"].push_back({{"item", it.item}, {"reverse_coded", it.reverse_coded}});
        doc["factors"].push_back(jf);
    }
    return doc.dump(2) + "\n";
}

FactorSchema default_schema() {
    FactorSchema schema;
    const char* names[6] = {"OSC1", "OSC2", "OSC3", "GSC1", "GSC2", "GSC3"};
    for (const char* name : names) {
        Factor f;
        f.name = name;
        for (int i = 1; i <= 3; ++i)
            f.items.push_back({std::string(name) + "_item" + std::to_string(i), false});
        schema.factors.push_back(std::move(f));
    }
    schema.validate();
    return schema;
}

SurveyTable load_survey(const std::string& path, const std::string& missing_token) {
    csv::Table raw = csv::read_file(path);
    if (raw.header.size() < 2)
        throw std::runtime_error("survey: need an id column plus at least one item column");
    if (raw.rows.empty()) throw std::runtime_error("survey: no data rows in " + path);

    SurveyTable table;
    table.item_names.assign(raw.header.begin() + 1, raw.header.end());
    {
        std::set<std::string> unique(table.item_names.begin(), table.item_names.end());
        if (unique.size() != table.item_names.size())
            throw std::runtime_error("survey: duplicate item names in header");
    }

    std::set<std::string> seen_ids;
    for (const auto& row : raw.rows) {
        if (!seen_ids.insert(row[0]).second)
            throw std::runtime_error("survey: duplicate respondent id '" + row[0] + "'");
        table.respondent_ids.push_back(row[0]);
        std::vector<std::optional<int>> cells;
        cells.reserve(row.size() - 1);
        for (std::size_t c = 1; c < row.size(); ++c) {
            const std::string& text = row[c];
            if (text == missing_token || text.empty()) {
                cells.push_back(std::nullopt);
                continue;
            }
            int value = 0;
            const auto* begin = text.data();
            const auto* end = text.data() + text.size();
            auto res = std::from_chars(begin, end, value);
            if (res.ec != std::errc() || res.ptr != end) {
                cells.push_back(std::nullopt);
                ++table.out_of_range_count;
            } else if (value < table.scale_min || value > table.scale_max) {
                cells.push_back(std::nullopt);
                ++table.out_of_range_count;
            } else {
                cells.push_back(value);
            }
        }
        table.items.push_back(std::move(cells));
    }
    return table;
}

FilterReport filter_incomplete(const SurveyTable& table, double threshold) {
    if (threshold <= 0.0 || threshold >= 1.0)
        throw std::invalid_argument("filter_incomplete: threshold must be in (0,1)");
    FilterReport report;
    report.table.item_names = table.item_names;
    report.table.scale_min = table.scale_min;
    report.table.scale_max = table.scale_max;
    const double n_items = static_cast<double>(table.item_count());
    for (Index r = 0; r < table.rows(); ++r) {
        const double missing_fraction = static_cast<double>(table.missing_in_row(r)) / n_items;
        if (missing_fraction <= threshold) {
            report.table.respondent_ids.push_back(table.respondent_ids[static_cast<std::size_t>(r)]);
            report.table.items.push_back(table.items[static_cast<std::size_t>(r)]);
            ++report.retained;
        } else {
            ++report.dropped;
        }
    }
    if (report.retained == 0)
        throw std::runtime_error("filter_incomplete: every row exceeds the missing threshold");
    return report;
}

int lower_median(std::vector<int> values) {
    if (values.empty()) throw std::invalid_argument("lower_median: empty input");
    std::sort(values.begin(), values.end());
    return values[(values.size() - 1) / 2];
}

SurveyTable impute_median(const SurveyTable& table) {
    SurveyTable out = table;
    for (Index c = 0; c < table.item_count(); ++c) {
        std::vector<int> present;
        for (Index r = 0; r < table.rows(); ++r) {
            const auto& cell = table.items[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
            if (cell.has_value()) present.push_back(*cell);
        }
        if (present.empty())
            throw std::runtime_error("impute_median: item '" +
                                     table.item_names[static_cast<std::size_t>(c)] +
                                     "' has no observed values");
        const int median = lower_median(std::move(present));
        for (Index r = 0; r < table.rows(); ++r) {
            auto& cell = out.items[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
            if (!cell.has_value()) cell = median;
        }
    }
    return out;
}

FeatureMatrix score_factors(const SurveyTable& table, const FactorSchema& schema) {
    schema.validate();
    std::vector<std::vector<std::pair<Index, bool>>> factor_columns;  // (column, reversed)
    for (const auto& factor : schema.factors) {
        std::vector<std::pair<Index, bool>> columns;
        for (const auto& it : factor.items) {
            auto pos = std::find(table.item_names.begin(), table.item_names.end(), it.item);
            if (pos == table.item_names.end())
                throw std::runtime_error("score_factors: schema references unknown item '" +
                                         it.item + "'");
            columns.emplace_back(pos - table.item_names.begin(), it.reverse_coded);
        }
        factor_columns.push_back(std::move(columns));
    }

    FeatureMatrix features;
    features.respondent_ids = table.respondent_ids;
    for (const auto& factor : schema.factors) features.feature_names.push_back(factor.name);
    features.values.resize(table.rows(), static_cast<Index>(schema.factors.size()));

    const int flip = schema.scale_min + schema.scale_max;
    for (Index r = 0; r < table.rows(); ++r) {
        for (std::size_t f = 0; f < factor_columns.size(); ++f) {
            double sum = 0.0;
            for (const auto& [col, reversed] : factor_columns[f]) {
                const auto& cell = table.items[static_cast<std::size_t>(r)][static_cast<std::size_t>(col)];
                if (!cell.has_value())
                    throw std::runtime_error("score_factors: missing cell, impute first");
                sum += reversed ? flip - *cell : *cell;
            }
            features.values(r, static_cast<Index>(f)) =
                sum / static_cast<double>(factor_columns[f].size());
        }
    }
    return features;
}

FeatureMatrix features_from_csv(const std::string& path) {
    csv::Table raw = csv::read_file(path);
    if (raw.header.size() < 2) throw std::runtime_error("features: need id plus feature columns");
    FeatureMatrix features;
    features.feature_names.assign(raw.header.begin() + 1, raw.header.end());
    features.values.resize(static_cast<Index>(raw.rows.size()),
                           static_cast<Index>(features.feature_names.size()));
    for (std::size_t r = 0; r < raw.rows.size(); ++r) {
        features.respondent_ids.push_back(raw.rows[r][0]);
        for (std::size_t c = 1; c < raw.rows[r].size(); ++c) {
            try {
                features.values(static_cast<Index>(r), static_cast<Index>(c - 1)) =
                    std::stod(raw.rows[r][c]);
            } catch (const std::exception&) {
                throw std::runtime_error("features: non-numeric cell '" + raw.rows[r][c] +
                                         "' at row " + std::to_string(r + 1));
            }
        }
    }
    return features;
}

void features_to_csv(const FeatureMatrix& features, const std::string& path) {
    csv::Table out;
    out.header.push_back("id");
    for (const auto& name : features.feature_names) out.header.push_back(name);
    for (Index r = 0; r < features.rows(); ++r) {
        std::vector<std::string> row;
        row.push_back(features.respondent_ids[static_cast<std::size_t>(r)]);
        for (Index c = 0; c < features.cols(); ++c)
            row.push_back(csv::format_fixed(features.values(r, c)));
        out.rows.push_back(std::move(row));
    }
    csv::write_file(path, out);
}

void canonicalize_labels(Labeling& labeling) {
    std::vector<int> remap;
    int next = 0;
    for (std::size_t i = 0; i < labeling.labels.size(); ++i) {
        if (labeling.noise[i]) continue;
        const int old = labeling.labels[i];
        if (old >= static_cast<int>(remap.size())) remap.resize(static_cast<std::size_t>(old) + 1, 0);
        if (remap[static_cast<std::size_t>(old)] == 0) remap[static_cast<std::size_t>(old)] = ++next;
        labeling.labels[i] = remap[static_cast<std::size_t>(old)];
    }
    for (std::size_t i = 0; i < labeling.labels.size(); ++i)
        if (labeling.noise[i]) labeling.labels[i] = kNoiseLabel;
}

}  // namespace clustex
