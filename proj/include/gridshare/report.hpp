#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "gridshare/types.hpp"

namespace gridshare {

/// A labeled cell grid backing the comparison workflow: first column holds
/// row labels, the header row holds column labels, cells are numbers or
/// "N/A". Everything is kept as text so reference tables round-trip exactly.
struct MetricTable {
    std::string corner; // header of the label column, e.g. "strategy"
    std::vector<std::string> columns;
    std::vector<std::string> rows;
    std::vector<std::vector<std::string>> cells; // [row][column]

    static MetricTable read_csv(const std::string& path);
    static MetricTable read_csv(std::istream& in, const std::string& source_name);
    void write_csv(const std::string& path) const;
    std::string to_csv() const;
};

struct CellDiff {
    std::string row;
    std::string column;
    std::string actual;
    std::string expected;
    double relative_error = 0.0;
    bool ok = false;
};

/// Cell-wise comparison under a relative tolerance. "N/A" matches only
/// "N/A". Mismatched labels or shapes throw DataError; a non-numeric cell
/// that is not "N/A" throws ParseError.
std::vector<CellDiff> compare_tables(const MetricTable& actual, const MetricTable& expected,
                                     double relative_tolerance);

/// Shortest-round-trip decimal text for a double (the one number format used
/// in exported tables).
std::string format_double(double value);

} // namespace gridshare
