#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "kquantiles/types.hpp"

namespace kq {

/// Comma-separated numeric table with an optional header row. The first row is
/// treated as a header when any of its cells is not a number.
struct CsvTable {
  std::vector<std::string> header;
  Matrix<double> values;

  /// Column index by header name, or by 1-based position when `key` is an integer.
  Index column_index(const std::string& key) const;
};

CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::string& path);

/// Shortest decimal representation that round-trips exactly.
std::string format_double(double v);

void write_csv(std::ostream& out, const Matrix<double>& values,
               const std::vector<std::string>& header = {});
void write_csv_file(const std::string& path, const Matrix<double>& values,
                    const std::vector<std::string>& header = {});

/// Single-column label file, labels written as given.
void write_labels_file(const std::string& path, const Labels& labels, const std::string& header = "label");

}  // namespace kq
