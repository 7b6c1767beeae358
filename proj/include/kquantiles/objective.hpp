#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "kquantiles/discrepancy.hpp"
#include "kquantiles/types.hpp"

namespace kq {

namespace detail {

template <typename Scalar>
void check_dimensions(const Dataset<Scalar>& data, const ModelParams<Scalar>& params,
                      const Assignment& assignment) {
  const Index p = data.p();
  if (params.theta.size() != p || params.lambda.size() != p || params.barycenters.cols() != p)
    throw std::invalid_argument("parameter dimensions do not match the data");
  if (assignment.n() != data.n()) throw std::invalid_argument("assignment length does not match the data");
  if (assignment.k() != params.k()) throw std::invalid_argument("assignment K does not match barycenters");
}

template <typename Scalar>
Scalar effective_lambda(const ModelParams<Scalar>& params, Index j) {
  return scaled(params.variant) ? params.lambda[j] : Scalar(1);
}

}  // namespace detail

/// Unweighted per-variable discrepancy sums: out[j] = sum_i Q(x_ij, theta_j, xi_{C(i)j}).
template <typename Scalar>
Vector<Scalar> column_discrepancies(const Dataset<Scalar>& data, const Vector<Scalar>& theta,
                                    const Matrix<Scalar>& barycenters, const Labels& labels) {
  const auto& x = data.values();
  Vector<Scalar> out(data.p());
  for (Index j = 0; j < data.p(); ++j) {
    Scalar s(0);
    for (Index i = 0; i < data.n(); ++i)
      s += quantile_discrepancy<Scalar>(x(i, j), theta[j], barycenters(labels[i], j));
    out[j] = s;
  }
  return out;
}

/// -n * sum_j log(lambda_j * theta_j * (1 - theta_j)), natural log.
template <typename Scalar>
Scalar penalty_term(Index n, const ModelParams<Scalar>& params) {
  Scalar s(0);
  for (Index j = 0; j < params.p(); ++j) {
    const Scalar t = params.theta[j];
    s += std::log(detail::effective_lambda(params, j) * t * (Scalar(1) - t));
  }
  return -static_cast<Scalar>(n) * s;
}

/// Penalized negative log-likelihood of the fixed-partition asymmetric Laplace model:
///   sum_i sum_j lambda_j Q(x_ij, theta_j, xi_{C(i)j}) - n sum_j log(lambda_j theta_j (1 - theta_j)).
/// Unscaled variants use lambda = 1 regardless of the stored vector.
template <typename Scalar>
Scalar objective_value(const Dataset<Scalar>& data, const ModelParams<Scalar>& params,
                       const Assignment& assignment) {
  detail::check_dimensions(data, params, assignment);
  const Vector<Scalar> sums =
      column_discrepancies(data, params.theta, params.barycenters, assignment.labels);
  Scalar fit(0);
  for (Index j = 0; j < data.p(); ++j) fit += detail::effective_lambda(params, j) * sums[j];
  return fit + penalty_term(data.n(), params);
}

struct ProfilePoint {
  double theta;
  double value;
};

/// D_n(theta) = sum_i Q(x_i, theta, q_n(theta)) over a grid of theta values, with the
/// barycenter at the empirical theta-quantile. With `penalized`, -n log(theta(1-theta))
/// is added (lambda = 1).
template <typename Derived>
std::vector<ProfilePoint> dispersion_profile(const Eigen::DenseBase<Derived>& sample,
                                             const std::vector<double>& grid, bool penalized) {
  using Scalar = typename Derived::Scalar;
  if (grid.empty()) throw std::invalid_argument("empty theta grid");
  if (sample.size() == 0) throw std::invalid_argument("empty sample");
  std::vector<Scalar> sorted(sample.size());
  for (Index i = 0; i < sample.size(); ++i) sorted[static_cast<std::size_t>(i)] = sample(i);
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<double>(sorted.size());

  std::vector<ProfilePoint> out;
  out.reserve(grid.size());
  for (double theta : grid) {
    if (!(theta > 0.0 && theta < 1.0)) throw std::invalid_argument("grid values must lie in (0,1)");
    const auto t = static_cast<Scalar>(theta);
    const Scalar xi = sorted_quantile(sorted, t);
    Scalar d(0);
    for (Scalar v : sorted) d += quantile_discrepancy(v, t, xi);
    double value = static_cast<double>(d);
    if (penalized) value -= n * std::log(theta * (1.0 - theta));
    out.push_back({theta, value});
  }
  return out;
}

/// Equispaced interior grid of `size` points: i / (size + 1), i = 1..size.
inline std::vector<double> uniform_theta_grid(int size) {
  if (size < 1) throw std::invalid_argument("grid size must be >= 1");
  std::vector<double> g(static_cast<std::size_t>(size));
  for (int i = 0; i < size; ++i) g[static_cast<std::size_t>(i)] = (i + 1.0) / (size + 1.0);
  return g;
}

inline ProfilePoint profile_argmin(const std::vector<ProfilePoint>& profile) {
  if (profile.empty()) throw std::invalid_argument("empty profile");
  return *std::min_element(profile.begin(), profile.end(),
                           [](const ProfilePoint& a, const ProfilePoint& b) { return a.value < b.value; });
}

}  // namespace kq
