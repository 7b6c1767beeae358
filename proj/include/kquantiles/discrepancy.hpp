#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "kquantiles/types.hpp"

namespace kq {

/// Asymmetric absolute deviation of x from xi: theta * (x - xi) above xi and
/// (1 - theta) * (xi - x) below. At theta = 0.5 this is half the L1 distance.
template <typename Scalar>
constexpr Scalar quantile_discrepancy(Scalar x, Scalar theta, Scalar xi) noexcept {
  const Scalar d = x - xi;
  return d >= Scalar(0) ? theta * d : (theta - Scalar(1)) * d;
}

/// Coefficient-wise discrepancy of an array expression against a scalar barycenter.
template <typename Derived>
auto quantile_discrepancy(const Eigen::ArrayBase<Derived>& x, typename Derived::Scalar theta,
                          typename Derived::Scalar xi) {
  using Scalar = typename Derived::Scalar;
  const auto d = x - xi;
  return (d >= Scalar(0)).select(theta * d, (theta - Scalar(1)) * d);
}

/// Sum over variables of lambda_j * Q(x_j, theta_j, xi_j).
template <typename DX, typename DT, typename DXi, typename DL>
typename DX::Scalar multivariate_discrepancy(const Eigen::MatrixBase<DX>& x,
                                             const Eigen::MatrixBase<DT>& theta,
                                             const Eigen::MatrixBase<DXi>& xi,
                                             const Eigen::MatrixBase<DL>& lambda) {
  using Scalar = typename DX::Scalar;
  const Index p = x.size();
  if (theta.size() != p || xi.size() != p || lambda.size() != p)
    throw std::invalid_argument("multivariate_discrepancy: dimension mismatch");
  Scalar total(0);
  for (Index j = 0; j < p; ++j)
    total += lambda(j) * quantile_discrepancy<Scalar>(x(j), theta(j), xi(j));
  return total;
}

namespace detail {

/// 1-based rank of the smallest order statistic whose empirical CDF reaches theta.
/// A relative slack of 1e-12 absorbs rounding in theta * n when it should be integral.
inline Index quantile_rank(Index n, double theta) {
  const double target = theta * static_cast<double>(n);
  auto rank = static_cast<Index>(std::ceil(target - 1e-12 * static_cast<double>(n)));
  return std::clamp<Index>(rank, 1, n);
}

}  // namespace detail

/// Empirical theta-quantile in the inf sense: the smallest sample value whose
/// empirical CDF is at least theta. Always returns one of the sample values.
/// Reorders `scratch` in place.
template <typename Scalar>
Scalar empirical_quantile_inplace(std::vector<Scalar>& scratch, Scalar theta) {
  if (scratch.empty()) throw std::invalid_argument("empty cluster sample");
  const Index rank = detail::quantile_rank(static_cast<Index>(scratch.size()),
                                           static_cast<double>(theta));
  auto nth = scratch.begin() + (rank - 1);
  std::nth_element(scratch.begin(), nth, scratch.end());
  return *nth;
}

template <typename Derived>
typename Derived::Scalar empirical_quantile(const Eigen::DenseBase<Derived>& sample,
                                            typename Derived::Scalar theta) {
  using Scalar = typename Derived::Scalar;
  std::vector<Scalar> scratch(sample.size());
  for (Index i = 0; i < sample.size(); ++i) scratch[static_cast<std::size_t>(i)] = sample(i);
  return empirical_quantile_inplace(scratch, theta);
}

/// Quantile of an ascending-sorted sample (no copy).
template <typename Scalar>
Scalar sorted_quantile(const std::vector<Scalar>& sorted, Scalar theta) {
  if (sorted.empty()) throw std::invalid_argument("empty cluster sample");
  const Index rank = detail::quantile_rank(static_cast<Index>(sorted.size()),
                                           static_cast<double>(theta));
  return sorted[static_cast<std::size_t>(rank - 1)];
}

}  // namespace kq
