#pragma once

#include <cstddef>
#include <filesystem>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace remtime::csv {

struct Row {
    std::size_t line = 0;  // 1-based physical line where the record starts
    std::vector<std::string> fields;
};

struct Table {
    std::vector<std::string> header;
    std::vector<Row> rows;

    /// Column position, or npos.
    std::size_t column(std::string_view name) const;
};

/// RFC 4180 style reader: quoted fields may contain delimiters, doubled
/// quotes and newlines. A UTF-8 byte-order mark on the header is dropped.
Table parse(std::string_view text, char delimiter = ',');
Table read_file(const std::filesystem::path& path, char delimiter = ',');

/// Shortest representation that round-trips the double exactly.
std::string format_double(double v);

/// Writes one field, quoting when needed.
void write_field(std::ostream& os, std::string_view field, char delimiter = ',');
void write_row(std::ostream& os, const std::vector<std::string>& fields, char delimiter = ',');

}  // namespace remtime::csv
