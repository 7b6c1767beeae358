#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

#include "kquantiles/discrepancy.hpp"
#include "kquantiles/types.hpp"

namespace kq {

// Asymmetric Laplace law with density
//   f(x) = lambda * theta * (1 - theta) * exp(-lambda * Q(x, theta, xi)),
// whose theta-quantile is xi. Left tail decays at rate lambda * (1 - theta),
// right tail at rate lambda * theta.

namespace detail {
template <typename Scalar>
void check_ald(Scalar theta, Scalar lambda) {
  if (!(theta > Scalar(0) && theta < Scalar(1))) throw std::invalid_argument("theta must lie in (0,1)");
  if (!(lambda > Scalar(0))) throw std::invalid_argument("lambda must be positive");
}
}  // namespace detail

template <typename Scalar>
Scalar ald_density(Scalar x, Scalar theta, Scalar xi, Scalar lambda) {
  detail::check_ald(theta, lambda);
  return lambda * theta * (Scalar(1) - theta) *
         std::exp(-lambda * quantile_discrepancy(x, theta, xi));
}

template <typename Scalar>
Scalar ald_cdf(Scalar x, Scalar theta, Scalar xi, Scalar lambda) {
  detail::check_ald(theta, lambda);
  if (x < xi) return theta * std::exp(lambda * (Scalar(1) - theta) * (x - xi));
  return Scalar(1) - (Scalar(1) - theta) * std::exp(-lambda * theta * (x - xi));
}

/// Inverse CDF; u must lie in (0,1).
template <typename Scalar>
Scalar ald_quantile(Scalar u, Scalar theta, Scalar xi, Scalar lambda) {
  detail::check_ald(theta, lambda);
  if (!(u > Scalar(0) && u < Scalar(1))) throw std::invalid_argument("u must lie in (0,1)");
  if (u < theta) return xi + std::log(u / theta) / (lambda * (Scalar(1) - theta));
  return xi - std::log((Scalar(1) - u) / (Scalar(1) - theta)) / (lambda * theta);
}

template <typename Scalar, typename Rng>
Vector<Scalar> ald_sample(Index count, Scalar theta, Scalar xi, Scalar lambda, Rng& rng) {
  detail::check_ald(theta, lambda);
  if (count < 0) throw std::invalid_argument("count must be non-negative");
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Vector<Scalar> out(count);
  for (Index i = 0; i < count; ++i) {
    double u;
    do u = unif(rng);
    while (u <= 0.0);
    out[i] = ald_quantile(static_cast<Scalar>(u), theta, xi, lambda);
  }
  return out;
}

template <typename Scalar>
Vector<Scalar> ald_sample(Index count, Scalar theta, Scalar xi, Scalar lambda,
                          std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return ald_sample<Scalar>(count, theta, xi, lambda, rng);
}

}  // namespace kq
