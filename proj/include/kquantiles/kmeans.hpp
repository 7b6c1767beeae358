#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

#include "kquantiles/parallel.hpp"
#include "kquantiles/seeding.hpp"
#include "kquantiles/types.hpp"

namespace kq {

template <typename Scalar>
struct KMeansResult {
  Matrix<Scalar> centroids;  // K x p
  Labels labels;
  Scalar within_ss{};
  int iterations = 0;
  bool converged = false;
};

struct KMeansConfig {
  int k = 2;
  int restarts = 30;
  int max_iter = 1000;
  std::uint64_t seed = 0;
  unsigned threads = 0;
};

/// Sum over points of squared Euclidean distance to the assigned centroid.
template <typename Scalar>
Scalar within_sum_of_squares(const Dataset<Scalar>& data, const Matrix<Scalar>& centroids,
                             const Labels& labels) {
  Scalar total(0);
  for (Index i = 0; i < data.n(); ++i)
    total += (data.values().row(i) - centroids.row(labels[i])).squaredNorm();
  return total;
}

namespace detail {

template <typename Scalar>
KMeansResult<Scalar> lloyd_once(const Dataset<Scalar>& data, int k, int max_iter, std::uint64_t seed) {
  const auto& x = data.values();
  const Index n = data.n();
  std::mt19937_64 rng(seed);

  // k distinct rows chosen uniformly without replacement (partial Fisher-Yates).
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  for (int c = 0; c < k; ++c) {
    std::uniform_int_distribution<Index> pick(c, n - 1);
    std::swap(order[static_cast<std::size_t>(c)], order[static_cast<std::size_t>(pick(rng))]);
  }
  Matrix<Scalar> centroids(k, data.p());
  for (int c = 0; c < k; ++c) centroids.row(c) = x.row(order[static_cast<std::size_t>(c)]);

  Labels labels = Labels::Constant(n, -1);
  Vector<Scalar> dist(n);
  KMeansResult<Scalar> result;
  int iteration = 0;
  bool converged = false;
  while (iteration < max_iter) {
    ++iteration;
    bool changed = false;
    for (Index i = 0; i < n; ++i) {
      int best = 0;
      Scalar best_d = (x.row(i) - centroids.row(0)).squaredNorm();
      for (int c = 1; c < k; ++c) {
        const Scalar d = (x.row(i) - centroids.row(c)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      dist[i] = best_d;
      if (labels[i] != best) {
        labels[i] = best;
        changed = true;
      }
    }

    Eigen::VectorXi sizes = Eigen::VectorXi::Zero(k);
    for (Index i = 0; i < n; ++i) ++sizes[labels[i]];
    // Empty clusters take the point farthest from its centroid.
    for (int c = 0; c < k; ++c) {
      if (sizes[c] != 0) continue;
      Index far = -1;
      for (Index i = 0; i < n; ++i)
        if (sizes[labels[i]] > 1 && (far < 0 || dist[i] > dist[far])) far = i;
      --sizes[labels[far]];
      labels[far] = c;
      sizes[c] = 1;
      dist[far] = Scalar(0);
      changed = true;
    }

    if (!changed && iteration > 1) {
      converged = true;
      break;
    }
    centroids.setZero();
    for (Index i = 0; i < n; ++i) centroids.row(labels[i]) += x.row(i);
    for (int c = 0; c < k; ++c) centroids.row(c) /= static_cast<Scalar>(sizes[c]);
  }
  result.centroids = std::move(centroids);
  result.labels = std::move(labels);
  result.within_ss = within_sum_of_squares(data, result.centroids, result.labels);
  result.iterations = iteration;
  result.converged = converged;
  return result;
}

}  // namespace detail

/// Lloyd's algorithm: nearest-centroid assignment alternated with mean updates
/// until the labels stop changing, repeated from `restarts` random starts.
template <typename Scalar>
KMeansResult<Scalar> kmeans_fit(const Dataset<Scalar>& data, const KMeansConfig& config) {
  if (config.k < 1) throw std::invalid_argument("k must be >= 1");
  if (config.restarts < 1) throw std::invalid_argument("restarts must be >= 1");
  if (data.n() < config.k) throw std::invalid_argument("fewer points than clusters");
  const auto count = static_cast<std::size_t>(config.restarts);
  std::vector<KMeansResult<Scalar>> runs(count);
  parallel_for(count, config.threads, [&](std::size_t r) {
    runs[r] = detail::lloyd_once(data, config.k, config.max_iter, derive_seed(config.seed, r));
  });
  std::size_t best = 0;
  for (std::size_t r = 1; r < count; ++r)
    if (runs[r].within_ss < runs[best].within_ss) best = r;
  return std::move(runs[best]);
}

template <typename Scalar>
KMeansResult<Scalar> kmeans_fit(const Dataset<Scalar>& data, int k, int restarts, int max_iter,
                                std::uint64_t seed) {
  return kmeans_fit(data, KMeansConfig{k, restarts, max_iter, seed, 0});
}

}  // namespace kq
