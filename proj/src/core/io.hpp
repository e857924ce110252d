#pragma once

#include "types.hpp"

#include <istream>
#include <string>
#include <vector>

namespace enz::io {

/// Shortest decimal that round-trips to the same double, '.' separator,
/// independent of the global locale. Non-finite values print as inf/-inf/nan.
std::string format_double(double v);

/// Reads a numeric table: fields split on commas or whitespace, blank lines
/// and '#' comments skipped, and a leading non-numeric header row ignored.
std::vector<std::vector<double>> read_numeric_table(std::istream& in);
std::vector<std::vector<double>> read_numeric_table_file(const std::string& path);

/// Flattens a table into a vector (row-major).
Vector flatten(const std::vector<std::vector<double>>& table);

/// Rectangular table to matrix; throws Parse on ragged rows.
Matrix to_matrix(const std::vector<std::vector<double>>& table);

}  // namespace enz::io
