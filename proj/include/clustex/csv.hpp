#pragma once

#include <string>
#include <vector>

namespace clustex::csv {

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

/// Parses a UTF-8 CSV file with a header row. Handles quoted fields with
/// embedded commas, quotes and newlines. Throws std::runtime_error on
/// unreadable files or ragged rows.
Table read_file(const std::string& path);

Table parse(const std::string& text);

/// Writes rows with minimal quoting (fields containing , " or newline).
void write_file(const std::string& path, const Table& table);

std::string escape(const std::string& field);

/// Fixed-point value with the given number of decimals, used for all
/// emitted tables so outputs are byte-stable.
std::string format_fixed(double value, int decimals = 6);

}  // namespace clustex::csv
