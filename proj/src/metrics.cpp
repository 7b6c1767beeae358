#include "kquantiles/metrics.hpp"

#include <stdexcept>
#include <unordered_map>

namespace kq {

namespace {

std::vector<int> compact(std::span<const int> labels, int& distinct) {
  std::unordered_map<int, int> ids;
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto [it, inserted] = ids.try_emplace(labels[i], static_cast<int>(ids.size()));
    out[i] = it->second;
  }
  distinct = static_cast<int>(ids.size());
  return out;
}

using Wide = __int128;

Wide pairs(std::int64_t m) { return static_cast<Wide>(m) * (m - 1) / 2; }

}  // namespace

ContingencyTable::ContingencyTable(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw std::invalid_argument("label vectors differ in length");
  const auto ca = compact(a, rows_);
  const auto cb = compact(b, cols_);
  counts_.assign(static_cast<std::size_t>(rows_) * static_cast<std::size_t>(cols_), 0);
  row_sums_.assign(static_cast<std::size_t>(rows_), 0);
  col_sums_.assign(static_cast<std::size_t>(cols_), 0);
  for (std::size_t i = 0; i < ca.size(); ++i) {
    ++counts_[static_cast<std::size_t>(ca[i] * cols_ + cb[i])];
    ++row_sums_[static_cast<std::size_t>(ca[i])];
    ++col_sums_[static_cast<std::size_t>(cb[i])];
  }
  total_ = static_cast<std::int64_t>(a.size());
}

double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw std::invalid_argument("label vectors differ in length");
  if (a.size() < 2) throw std::invalid_argument("ARI needs at least two observations");
  const ContingencyTable table(a, b);

  Wide index = 0;
  for (int r = 0; r < table.rows(); ++r)
    for (int c = 0; c < table.cols(); ++c) index += pairs(table.count(r, c));
  Wide sum_a = 0;
  for (auto m : table.row_sums()) sum_a += pairs(m);
  Wide sum_b = 0;
  for (auto m : table.col_sums()) sum_b += pairs(m);
  const Wide total = pairs(table.total());

  // ARI = (index - sa*sb/N) / ((sa+sb)/2 - sa*sb/N), multiplied through by 2N.
  const Wide numerator = 2 * (total * index - sum_a * sum_b);
  const Wide denominator = total * (sum_a + sum_b) - 2 * sum_a * sum_b;
  if (denominator == 0) return 1.0;
  return static_cast<double>(numerator) / static_cast<double>(denominator);
}

}  // namespace kq
