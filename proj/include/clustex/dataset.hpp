#pragma once

#include "clustex/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace clustex {

/// Raw Likert responses, one row per respondent. Missing cells are empty
/// optionals; present responses are always within [scale_min, scale_max].
struct SurveyTable {
    std::vector<std::string> respondent_ids;
    std::vector<std::string> item_names;
    std::vector<std::vector<std::optional<int>>> items;  // rows x items
    int scale_min = 1;
    int scale_max = 5;
    long out_of_range_count = 0;  // cells coerced to missing while loading

    Index rows() const { return static_cast<Index>(items.size()); }
    Index item_count() const { return static_cast<Index>(item_names.size()); }

    Index missing_in_row(Index r) const {
        Index m = 0;
        for (const auto& cell : items[static_cast<std::size_t>(r)])
            if (!cell.has_value()) ++m;
        return m;
    }
};

struct FactorItem {
    std::string item;
    bool reverse_coded = false;
};

struct Factor {
    std::string name;
    std::vector<FactorItem> items;
};

/// Item-to-factor map with reverse-coding flags, user supplied as JSON.
struct FactorSchema {
    std::vector<Factor> factors;
    int scale_min = 1;
    int scale_max = 5;

    /// Throws std::invalid_argument when an item is claimed by two factors,
    /// a factor is empty, or factor names collide.
    void validate() const;
};

FactorSchema schema_from_json(const std::string& text);
FactorSchema load_schema(const std::string& path);
std::string schema_to_json(const FactorSchema& schema);

/// Bundled 6-factor schema (OSC1-3, GSC1-3) with three placeholder items per
/// factor; real studies supply their own item lists.
FactorSchema default_schema();

/// Reads a survey CSV (header row: id column then item columns). Cells equal
/// to missing_token, unparseable cells and out-of-range responses are
/// recorded as missing.
SurveyTable load_survey(const std::string& path, const std::string& missing_token = "");

struct FilterReport {
    SurveyTable table;
    Index dropped = 0;
    Index retained = 0;
};

/// Keeps rows whose missing fraction is <= threshold (rows strictly above
/// the threshold are dropped). Throws when nothing survives.
FilterReport filter_incomplete(const SurveyTable& table, double threshold = 0.10);

/// Replaces each missing cell with the per-item lower median of the present
/// values, so imputed values stay valid Likert integers. Throws if an item
/// is missing in every row.
SurveyTable impute_median(const SurveyTable& table);

/// Scores items into per-factor means. Reverse-coded responses map
/// r -> scale_min + scale_max - r before averaging. Requires a complete
/// (imputed) table.
FeatureMatrix score_factors(const SurveyTable& table, const FactorSchema& schema);

FeatureMatrix features_from_csv(const std::string& path);
void features_to_csv(const FeatureMatrix& features, const std::string& path);

/// Lower median: for an even count the lower of the two middle values.
int lower_median(std::vector<int> values);

}  // namespace clustex
