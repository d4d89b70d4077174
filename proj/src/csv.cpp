#include "clustex/csv.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace clustex::csv {

namespace {

std::vector<std::vector<std::string>> parse_records(const std::string& text) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;

    auto end_field = [&] {
        record.push_back(field);
        field.clear();
        field_started = false;
    };
    auto end_record = [&] {
        end_field();
        // skip blank lines
        if (record.size() > 1 || !record[0].empty()) records.push_back(record);
        record.clear();
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"' && !field_started) {
            in_quotes = true;
            field_started = true;
        } else if (c == ',') {
            end_field();
        } else if (c == '\n') {
            if (!field.empty() && field.back() == '\r') field.pop_back();
            end_record();
        } else {
            field.push_back(c);
            field_started = true;
        }
    }
    if (!field.empty() && field.back() == '\r') field.pop_back();
    if (!field.empty() || !record.empty()) end_record();
    if (in_quotes) throw std::runtime_error("csv: unterminated quoted field");
    return records;
}

}  // namespace

Table parse(const std::string& text) {
    auto records = parse_records(text);
    if (records.empty()) throw std::runtime_error("csv: empty table");
    Table t;
    t.header = std::move(records.front());
    for (std::size_t r = 1; r < records.size(); ++r) {
        if (records[r].size() != t.header.size()) {
            throw std::runtime_error("csv: row " + std::to_string(r) + " has " +
                                     std::to_string(records[r].size()) + " fields, expected " +
                                     std::to_string(t.header.size()));
        }
        t.rows.push_back(std::move(records[r]));
    }
    return t;
}

Table read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("csv: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

std::string escape(const std::string& field) {
    if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out.push_back('"');
    return out;
}

void write_file(const std::string& path, const Table& table) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("csv: cannot write " + path);
    auto write_row = [&out](const std::vector<std::string>& row) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out << ',';
            out << escape(row[i]);
        }
        out << '\n';
    };
    write_row(table.header);
    for (const auto& row : table.rows) write_row(row);
}

std::string format_fixed(double value, int decimals) {
    if (std::isnan(value)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, value);
    return buf;
}

}  // namespace clustex::csv
