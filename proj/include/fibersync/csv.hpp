#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace fibersync::csv {

/// Shortest decimal text that round-trips to the same double.
std::string number(double value);

/// Numeric table read from a CSV file with a header row.
struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    /// Index of a named column; throws IoError when absent.
    std::size_t column(std::string_view name) const;
};

/// Empty cells read as NaN. Throws IoError on unreadable files or
/// non-numeric cells.
Table read_table(const std::string& path);

}  // namespace fibersync::csv
