#pragma once

#include <Eigen/Dense>
#include <string>

namespace facov {

/// Shortest round-trip decimal form of a double (parse(format(x)) == x).
std::string format_double(double value);
double parse_double(const std::string& text, const std::string& context);

/// Reads a rectangular CSV of numbers; rows are observations.  With
/// has_header the first line is skipped.  Errors name the offending
/// row/column.
Eigen::MatrixXd read_csv_matrix(const std::string& path, bool has_header = false);

/// Writes a matrix as plain comma-separated rows, no header.
void write_csv_matrix(const std::string& path, const Eigen::MatrixXd& m);

}  // namespace facov
