#include "gridshare/report.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "text_util.hpp"

namespace gridshare {

using detail::trim;

std::string format_double(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    if (ec != std::errc()) throw std::logic_error("format_double: to_chars failed");
    return std::string(buf, ptr);
}

MetricTable MetricTable::read_csv(std::istream& in, const std::string& source_name) {
    MetricTable table;
    std::string line;
    std::size_t line_no = 0;
    bool saw_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        std::vector<std::string_view> cells = detail::split(line, ',');
        if (!saw_header) {
            if (cells.size() < 2) {
                throw DataError(source_name + ": line " + std::to_string(line_no) +
                                ": header needs a label column and at least one metric");
            }
            table.corner = std::string(trim(cells.front()));
            for (std::size_t i = 1; i < cells.size(); ++i) {
                table.columns.emplace_back(trim(cells[i]));
            }
            saw_header = true;
            continue;
        }
        if (cells.size() != table.columns.size() + 1) {
            throw DataError(source_name + ": line " + std::to_string(line_no) + ": expected " +
                            std::to_string(table.columns.size() + 1) + " cells, got " +
                            std::to_string(cells.size()));
        }
        table.rows.emplace_back(trim(cells.front()));
        std::vector<std::string> row;
        for (std::size_t i = 1; i < cells.size(); ++i) row.emplace_back(trim(cells[i]));
        table.cells.push_back(std::move(row));
    }
    if (!saw_header) throw DataError(source_name + ": empty table");
    return table;
}

MetricTable MetricTable::read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError(path + ": cannot open");
    return read_csv(in, path);
}

std::string MetricTable::to_csv() const {
    std::ostringstream out;
    out << corner;
    for (const std::string& col : columns) out << ',' << col;
    out << '\n';
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out << rows[i];
        for (const std::string& cell : cells[i]) out << ',' << cell;
        out << '\n';
    }
    return out.str();
}

void MetricTable::write_csv(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError(path + ": cannot open for writing");
    out << to_csv();
    if (!out) throw DataError(path + ": write failed");
}

namespace {

bool is_na(const std::string& cell) { return cell == "N/A"; }

double parse_cell(const std::string& cell, const std::string& where) {
    double v;
    if (!detail::parse_double(cell, v)) {
        throw ParseError(where + ": cell '" + cell + "' is neither a number nor N/A");
    }
    return v;
}

} // namespace

std::vector<CellDiff> compare_tables(const MetricTable& actual, const MetricTable& expected,
                                     double relative_tolerance) {
    if (actual.columns != expected.columns) {
        throw DataError("table comparison: column labels differ");
    }
    if (actual.rows != expected.rows) {
        throw DataError("table comparison: row labels differ");
    }
    std::vector<CellDiff> diffs;
    for (std::size_t i = 0; i < actual.rows.size(); ++i) {
        for (std::size_t jx = 0; jx < actual.columns.size(); ++jx) {
            CellDiff d;
            d.row = actual.rows[i];
            d.column = actual.columns[jx];
            d.actual = actual.cells[i][jx];
            d.expected = expected.cells[i][jx];
            if (is_na(d.actual) || is_na(d.expected)) {
                d.ok = d.actual == d.expected;
            } else {
                const std::string where = d.row + "/" + d.column;
                const double av = parse_cell(d.actual, where);
                const double ev = parse_cell(d.expected, where);
                const double scale = std::max(std::fabs(av), std::fabs(ev));
                d.relative_error = scale == 0.0 ? 0.0 : std::fabs(av - ev) / scale;
                d.ok = d.relative_error <= relative_tolerance;
            }
            diffs.push_back(std::move(d));
        }
    }
    return diffs;
}

} // namespace gridshare
