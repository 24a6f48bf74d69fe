#include "facov/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <vector>

#include "facov/errors.hpp"

namespace facov {

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc())
    throw Error(errc::io_error, "format_double: conversion failed");
  return std::string(buf, ptr);
}

double parse_double(const std::string& text, const std::string& context) {
  double value = 0.0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  while (ptr < end && (*ptr == ' ' || *ptr == '\t' || *ptr == '\r')) ++ptr;
  if (ec != std::errc() || ptr != end)
    throw Error(errc::io_error, "malformed number '" + text + "' at " + context);
  return value;
}

Eigen::MatrixXd read_csv_matrix(const std::string& path, bool has_header) {
  std::ifstream in(path);
  if (!in) throw Error(errc::io_error, "cannot open '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (has_header && line_no == 1) continue;
    if (line.empty() || line == "\r") continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    std::size_t col = 0;
    while (std::getline(ss, cell, ',')) {
      ++col;
      row.push_back(parse_double(cell, path + ":" + std::to_string(line_no) + " column " +
                                           std::to_string(col)));
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw Error(errc::io_error, path + ":" + std::to_string(line_no) +
                                      ": ragged row (expected " +
                                      std::to_string(rows.front().size()) + " columns)");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(errc::io_error, path + ": no data rows");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(rows.front().size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  return m;
}

void write_csv_matrix(const std::string& path, const Eigen::MatrixXd& m) {
  std::ofstream out(path);
  if (!out) throw Error(errc::io_error, "cannot write '" + path + "'");
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j > 0) out << ',';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
  if (!out) throw Error(errc::io_error, "write failed for '" + path + "'");
}

}  // namespace facov
