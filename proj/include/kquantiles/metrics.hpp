#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "kquantiles/types.hpp"

namespace kq {

/// Cross-tabulation of two labelings. Labels may be arbitrary integers; rows and
/// columns follow the order of first appearance.
class ContingencyTable {
 public:
  ContingencyTable(std::span<const int> a, std::span<const int> b);

  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }
  std::int64_t total() const noexcept { return total_; }
  std::int64_t count(int r, int c) const { return counts_[static_cast<std::size_t>(r * cols_ + c)]; }
  const std::vector<std::int64_t>& row_sums() const noexcept { return row_sums_; }
  const std::vector<std::int64_t>& col_sums() const noexcept { return col_sums_; }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::int64_t total_ = 0;
  std::vector<std::int64_t> counts_;
  std::vector<std::int64_t> row_sums_;
  std::vector<std::int64_t> col_sums_;
};

/// Hubert-Arabie adjusted Rand index. Pair counts are exact (128-bit) up to the
/// final division. Two identical trivial partitions score 1.
double adjusted_rand_index(std::span<const int> a, std::span<const int> b);

inline double adjusted_rand_index(const Labels& a, const Labels& b) {
  return adjusted_rand_index(std::span<const int>(a.data(), static_cast<std::size_t>(a.size())),
                             std::span<const int>(b.data(), static_cast<std::size_t>(b.size())));
}

}  // namespace kq
