#include "kquantiles/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <system_error>

namespace kq {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    cells.push_back(trim(std::string_view(line).substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return cells;
}

bool parse_number(const std::string& cell, double& out) {
  if (cell.empty()) return false;
  const char* first = cell.data();
  const char* last = first + cell.size();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

}  // namespace

Index CsvTable::column_index(const std::string& key) const {
  for (std::size_t j = 0; j < header.size(); ++j)
    if (header[j] == key) return static_cast<Index>(j);
  double numeric = 0.0;
  if (parse_number(key, numeric) && numeric == std::floor(numeric) && numeric >= 1 &&
      numeric <= static_cast<double>(values.cols()))
    return static_cast<Index>(numeric) - 1;
  throw std::invalid_argument("no column named '" + key + "'");
}

CsvTable read_csv(std::istream& in) {
  CsvTable table;
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_line(line);
    std::vector<double> row(cells.size());
    bool numeric = true;
    std::size_t bad = 0;
    for (std::size_t j = 0; j < cells.size(); ++j) {
      if (!parse_number(cells[j], row[j])) {
        numeric = false;
        bad = j;
        break;
      }
    }
    if (first) {
      first = false;
      width = cells.size();
      if (!numeric) {
        table.header = cells;
        continue;
      }
    }
    if (!numeric)
      throw DataError("non-numeric value '" + cells[bad] + "' at line " + std::to_string(line_no) +
                      ", column " + std::to_string(bad + 1));
    if (cells.size() != width)
      throw DataError("line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                      " fields, expected " + std::to_string(width));
    for (std::size_t j = 0; j < row.size(); ++j)
      if (!std::isfinite(row[j]))
        throw DataError("non-finite value at line " + std::to_string(line_no) + ", column " +
                        std::to_string(j + 1));
    rows.push_back(std::move(row));
  }
  table.values.resize(static_cast<Index>(rows.size()), static_cast<Index>(width));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < width; ++j)
      table.values(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
  return table;
}

CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return read_csv(in);
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw std::runtime_error("number formatting failed");
  return std::string(buf, ptr);
}

void write_csv(std::ostream& out, const Matrix<double>& values, const std::vector<std::string>& header) {
  if (!header.empty()) {
    for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
    out << '\n';
  }
  for (Index i = 0; i < values.rows(); ++i) {
    for (Index j = 0; j < values.cols(); ++j) out << (j ? "," : "") << format_double(values(i, j));
    out << '\n';
  }
}

void write_csv_file(const std::string& path, const Matrix<double>& values, const std::vector<std::string>& header) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  write_csv(out, values, header);
}

void write_labels_file(const std::string& path, const Labels& labels, const std::string& header) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << header << '\n';
  for (Index i = 0; i < labels.size(); ++i) out << labels[i] << '\n';
}

}  // namespace kq
