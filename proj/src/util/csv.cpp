#include "fibersync/csv.hpp"

#include <charconv>
#include <fstream>
#include <limits>
#include <sstream>

#include "fibersync/error.hpp"

namespace fibersync::csv {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (true) {
        const auto comma = line.find(',', pos);
        out.push_back(trim(line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos)));
        if (comma == std::string_view::npos) {
            break;
        }
        pos = comma + 1;
    }
    return out;
}

}  // namespace

std::string number(double value) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

std::size_t Table::column(std::string_view name) const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (columns[i] == name) {
            return i;
        }
    }
    throw IoError("csv: missing column '" + std::string(name) + "'");
}

Table read_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("csv: cannot open " + path);
    }
    Table table;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto view = trim(line);
        if (view.empty() || view.front() == '#') {
            continue;
        }
        const auto cells = split(view);
        if (table.columns.empty()) {
            for (auto c : cells) {
                table.columns.emplace_back(c);
            }
            continue;
        }
        if (cells.size() != table.columns.size()) {
            throw IoError("csv: " + path + ":" + std::to_string(line_no) + ": expected " +
                          std::to_string(table.columns.size()) + " cells");
        }
        std::vector<double> row;
        row.reserve(cells.size());
        for (auto c : cells) {
            double v = std::numeric_limits<double>::quiet_NaN();
            if (c.empty()) {
                row.push_back(v);
                continue;
            }
            const auto res = std::from_chars(c.data(), c.data() + c.size(), v);
            if (res.ec != std::errc{} || res.ptr != c.data() + c.size()) {
                throw IoError("csv: " + path + ":" + std::to_string(line_no) + ": non-numeric cell '" +
                              std::string(c) + "'");
            }
            row.push_back(v);
        }
        table.rows.push_back(std::move(row));
    }
    if (table.columns.empty()) {
        throw IoError("csv: " + path + " has no header row");
    }
    return table;
}

}  // namespace fibersync::csv
