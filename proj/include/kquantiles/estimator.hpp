#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

#include "kquantiles/discrepancy.hpp"
#include "kquantiles/objective.hpp"
#include "kquantiles/parallel.hpp"
#include "kquantiles/seeding.hpp"
#include "kquantiles/types.hpp"

namespace kq {

enum class Step { Initialize, Assign, Theta, Lambda, Barycenters };

template <typename Scalar>
struct SolverState {
  ModelParams<Scalar> params;
  Assignment assignment;
  Scalar objective = std::numeric_limits<Scalar>::quiet_NaN();
  int iteration = 0;
};

/// Called after every sub-step of fit_once. `reseeded` marks an assignment step
/// in which an empty cluster was reseeded.
template <typename Scalar>
using StepObserver = std::function<void(Step, const SolverState<Scalar>&, bool reseeded)>;

// ---------------------------------------------------------------------------
// Assignment

/// n x K matrix of lambda-weighted discrepancies of each point to each barycenter.
template <typename Scalar>
Matrix<Scalar> assignment_costs(const Dataset<Scalar>& data, const ModelParams<Scalar>& params) {
  if (params.p() != data.p() || params.barycenters.cols() != data.p())
    throw std::invalid_argument("parameter dimensions do not match the data");
  const int k = params.k();
  Matrix<Scalar> cost = Matrix<Scalar>::Zero(data.n(), k);
  for (Index j = 0; j < data.p(); ++j) {
    const Scalar lam = detail::effective_lambda(params, j);
    const auto col = data.column(j).array();
    for (int c = 0; c < k; ++c)
      cost.col(c).array() += lam * quantile_discrepancy(col, params.theta[j], params.barycenters(c, j));
  }
  return cost;
}

/// Each point goes to the barycenter with the smallest weighted discrepancy; ties
/// go to the lowest cluster index. The penalty is constant in k and is left out.
template <typename Scalar>
Assignment assign(const Dataset<Scalar>& data, const ModelParams<Scalar>& params) {
  if (params.k() < 1) throw std::invalid_argument("need at least one barycenter");
  const Matrix<Scalar> cost = assignment_costs(data, params);
  Labels labels(data.n());
  for (Index i = 0; i < data.n(); ++i) {
    int best = 0;
    for (int c = 1; c < params.k(); ++c)
      if (cost(i, c) < cost(i, best)) best = c;
    labels[i] = best;
  }
  return make_assignment(std::move(labels), params.k());
}

/// Empty-cluster policy: each empty cluster takes over the point (from a cluster
/// with at least two members) that is farthest from its current barycenter, and
/// its barycenter row moves onto that point. Returns true if anything changed.
template <typename Scalar>
bool reseed_empty_clusters(const Dataset<Scalar>& data, ModelParams<Scalar>& params,
                           Assignment& assignment) {
  if (!assignment.has_empty_cluster()) return false;
  const auto& x = data.values();
  Vector<Scalar> dist(data.n());
  for (Index i = 0; i < data.n(); ++i) {
    Scalar d(0);
    for (Index j = 0; j < data.p(); ++j)
      d += detail::effective_lambda(params, j) *
           quantile_discrepancy<Scalar>(x(i, j), params.theta[j],
                                        params.barycenters(assignment.labels[i], j));
    dist[i] = d;
  }
  for (int c = 0; c < assignment.k(); ++c) {
    if (assignment.cluster_sizes[c] != 0) continue;
    Index pick = -1;
    for (Index i = 0; i < data.n(); ++i) {
      if (assignment.cluster_sizes[assignment.labels[i]] < 2) continue;
      if (pick < 0 || dist[i] > dist[pick]) pick = i;
    }
    if (pick < 0) throw std::invalid_argument("fewer points than clusters");
    --assignment.cluster_sizes[assignment.labels[pick]];
    assignment.labels[pick] = c;
    assignment.cluster_sizes[c] = 1;
    params.barycenters.row(c) = x.row(pick);
    dist[pick] = Scalar(0);
  }
  return true;
}

// ---------------------------------------------------------------------------
// Closed-form parameter updates

/// Root in (0,1) of  T theta^2 - (2m + T) theta + m = 0, the stationarity condition of
///   theta * T - m * log(theta (1 - theta))
/// where T is the (lambda-weighted) sum of residuals x - xi and m the number of terms.
/// Both roots are formed without cancellation and the admissible one is picked by an
/// interval test.
template <typename Scalar>
Scalar solve_theta_quadratic(Scalar m, Scalar weighted_residual_sum) {
  if (!(m > Scalar(0))) throw std::invalid_argument("theta update needs at least one observation");
  const Scalar t = weighted_residual_sum;
  if (!std::isfinite(t)) throw NumericError("theta root out of range");
  if (t == Scalar(0)) return Scalar(0.5);
  const Scalar b = -(Scalar(2) * m + t);
  const Scalar root_disc = std::hypot(Scalar(2) * m, t);  // sqrt(b^2 - 4 t m)
  const Scalar q = Scalar(-0.5) * (b + (b >= Scalar(0) ? root_disc : -root_disc));
  const Scalar r1 = q / t;
  const Scalar r2 = m / q;
  auto inside = [](Scalar r) { return r > Scalar(0) && r < Scalar(1); };
  if (inside(r1)) return r1;
  if (inside(r2)) return r2;
  throw NumericError("theta root out of range");
}

template <typename Scalar>
Scalar clamp_theta(Scalar theta, double theta_min) {
  return std::clamp(theta, static_cast<Scalar>(theta_min), static_cast<Scalar>(1.0 - theta_min));
}

/// Per-variable theta given barycenters, assignment and lambda.
template <typename DX, typename DXi>
typename DX::Scalar update_theta(const Eigen::MatrixBase<DX>& column,
                                 const Eigen::MatrixBase<DXi>& xi_of,
                                 typename DX::Scalar lambda, double theta_min = 1e-4) {
  using Scalar = typename DX::Scalar;
  if (column.size() != xi_of.size()) throw std::invalid_argument("update_theta: size mismatch");
  const Scalar s = (column - xi_of).sum();
  return clamp_theta(solve_theta_quadratic(static_cast<Scalar>(column.size()), lambda * s), theta_min);
}

/// Per-variable lambda = n / sum_i Q(x_i, theta, xi_{C(i)}), clamped to [lambda_min, lambda_max].
template <typename DX, typename DXi>
typename DX::Scalar update_lambda(const Eigen::MatrixBase<DX>& column,
                                  const Eigen::MatrixBase<DXi>& xi_of,
                                  typename DX::Scalar theta, double lambda_min = 1e-8,
                                  double lambda_max = 1e8) {
  using Scalar = typename DX::Scalar;
  if (column.size() != xi_of.size()) throw std::invalid_argument("update_lambda: size mismatch");
  if (column.size() == 0) throw std::invalid_argument("update_lambda needs at least one observation");
  const Scalar total = quantile_discrepancy(column.array() - xi_of.array(), theta, Scalar(0)).sum();
  if (!(total > Scalar(0))) return static_cast<Scalar>(lambda_max);
  const Scalar lam = static_cast<Scalar>(column.size()) / total;
  return std::clamp(lam, static_cast<Scalar>(lambda_min), static_cast<Scalar>(lambda_max));
}

namespace detail {

/// sum_i (x_ij - xi_{C(i)j}) for every variable j.
template <typename Scalar>
Vector<Scalar> residual_sums(const Dataset<Scalar>& data, const Matrix<Scalar>& barycenters,
                             const Labels& labels) {
  const auto& x = data.values();
  Vector<Scalar> s(data.p());
  for (Index j = 0; j < data.p(); ++j) {
    Scalar acc(0);
    for (Index i = 0; i < data.n(); ++i) acc += x(i, j) - barycenters(labels[i], j);
    s[j] = acc;
  }
  return s;
}

template <typename Scalar>
Vector<Scalar> gather_barycenters(const Matrix<Scalar>& barycenters, const Labels& labels, Index j) {
  Vector<Scalar> out(labels.size());
  for (Index i = 0; i < labels.size(); ++i) out[i] = barycenters(labels[i], j);
  return out;
}

inline std::vector<std::vector<Index>> cluster_members(const Assignment& a) {
  std::vector<std::vector<Index>> members(static_cast<std::size_t>(a.k()));
  for (int c = 0; c < a.k(); ++c) members[static_cast<std::size_t>(c)].reserve(static_cast<std::size_t>(a.cluster_sizes[c]));
  for (Index i = 0; i < a.n(); ++i) members[static_cast<std::size_t>(a.labels[i])].push_back(i);
  return members;
}

}  // namespace detail

/// Common theta shared by all variables: the pooled stationarity condition with
/// m = n * p and T = sum_j lambda_j S_j.
template <typename Scalar>
Scalar update_common_theta(const Dataset<Scalar>& data, const Assignment& assignment,
                           const Matrix<Scalar>& barycenters, const Vector<Scalar>& lambda,
                           double theta_min = 1e-4) {
  const Vector<Scalar> s = detail::residual_sums(data, barycenters, assignment.labels);
  const Scalar t = lambda.dot(s);
  const auto m = static_cast<Scalar>(data.n() * data.p());
  return clamp_theta(solve_theta_quadratic(m, t), theta_min);
}

/// K x p matrix of within-cluster empirical theta_j-quantiles. Every cluster must be nonempty.
template <typename Scalar>
Matrix<Scalar> update_barycenters(const Dataset<Scalar>& data, const Assignment& assignment,
                                  const Vector<Scalar>& theta) {
  if (assignment.n() != data.n() || theta.size() != data.p())
    throw std::invalid_argument("update_barycenters: dimension mismatch");
  if (assignment.has_empty_cluster()) throw std::invalid_argument("empty cluster sample");
  const auto members = detail::cluster_members(assignment);
  const auto& x = data.values();
  Matrix<Scalar> xi(assignment.k(), data.p());
  std::vector<Scalar> scratch;
  for (Index j = 0; j < data.p(); ++j) {
    for (int c = 0; c < assignment.k(); ++c) {
      const auto& idx = members[static_cast<std::size_t>(c)];
      scratch.resize(idx.size());
      for (std::size_t t = 0; t < idx.size(); ++t) scratch[t] = x(idx[t], j);
      xi(c, j) = empirical_quantile_inplace(scratch, theta[j]);
    }
  }
  return xi;
}

// ---------------------------------------------------------------------------
// Initialization

/// Quantile level of the initial barycenter of cluster c (0-based) out of k:
/// c / (2(k-1)) + theta / 2, or theta itself when k = 1.
template <typename Scalar>
Scalar initial_level(int c, int k, Scalar theta) {
  if (k == 1) return theta;
  return static_cast<Scalar>(c) / static_cast<Scalar>(2 * (k - 1)) + theta / Scalar(2);
}

/// Random theta (one shared draw for common-theta variants), barycenters at the
/// equispaced column quantiles theta*_kj = (k-1)/(2(K-1)) + theta_j/2 (theta_j when K = 1),
/// and lambda = 1 unless config.lambda_init asks for the dispersion-based start.
template <typename Scalar, typename Rng>
ModelParams<Scalar> initialize(const Dataset<Scalar>& data, const VariantConfig& config, Rng& rng) {
  config.validate();
  const Index p = data.p();
  const int k = config.k;
  std::uniform_real_distribution<double> unif(config.theta_min, 1.0 - config.theta_min);

  ModelParams<Scalar> params;
  params.variant = config.variant;
  params.theta.resize(p);
  if (common_theta(config.variant)) {
    params.theta.setConstant(static_cast<Scalar>(unif(rng)));
  } else {
    for (Index j = 0; j < p; ++j) params.theta[j] = static_cast<Scalar>(unif(rng));
  }

  params.barycenters.resize(k, p);
  params.lambda = Vector<Scalar>::Ones(p);
  std::vector<Scalar> sorted(static_cast<std::size_t>(data.n()));
  for (Index j = 0; j < p; ++j) {
    for (Index i = 0; i < data.n(); ++i) sorted[static_cast<std::size_t>(i)] = data.values()(i, j);
    std::sort(sorted.begin(), sorted.end());
    const Scalar th = params.theta[j];
    for (int c = 0; c < k; ++c) params.barycenters(c, j) = sorted_quantile(sorted, initial_level(c, k, th));
    if (config.lambda_init == LambdaInit::Dispersion && scaled(config.variant)) {
      const Scalar centre = sorted_quantile(sorted, th);
      Scalar total(0);
      for (Scalar v : sorted) total += quantile_discrepancy(v, th, centre);
      params.lambda[j] = total > Scalar(0)
                             ? std::clamp(static_cast<Scalar>(data.n()) / total,
                                          static_cast<Scalar>(config.lambda_min),
                                          static_cast<Scalar>(config.lambda_max))
                             : static_cast<Scalar>(config.lambda_max);
    }
  }
  return params;
}

// ---------------------------------------------------------------------------
// Greedy descent

/// One run of the alternating scheme from the initialization drawn with `seed`.
/// Each iteration assigns points, then updates theta, lambda (scaled variants only)
/// and the barycenters. Stops once the labels repeat between consecutive iterations
/// (and, if config.objective_tol is set, the objective has stopped decreasing), or
/// after max_iter iterations.
template <typename Scalar>
FitResult<Scalar> fit_once(const Dataset<Scalar>& data, const VariantConfig& config,
                           std::uint64_t seed, const StepObserver<Scalar>& observer = {}) {
  config.validate();
  if (data.n() < config.k) throw std::invalid_argument("fewer points than clusters");

  std::mt19937_64 rng(seed);
  SolverState<Scalar> state;
  state.params = initialize(data, config, rng);
  if (observer) observer(Step::Initialize, state, false);

  auto notify = [&](Step step, bool reseeded) {
    if (!observer) return;
    state.objective = objective_value(data, state.params, state.assignment);
    observer(step, state, reseeded);
  };

  const Variant variant = config.variant;
  Labels previous_labels;
  Scalar previous_objective = std::numeric_limits<Scalar>::infinity();
  bool converged = false;
  int iteration = 0;

  while (iteration < config.max_iter) {
    ++iteration;
    state.iteration = iteration;

    state.assignment = assign(data, state.params);
    const bool reseeded = reseed_empty_clusters(data, state.params, state.assignment);
    notify(Step::Assign, reseeded);

    auto& params = state.params;
    const Labels& labels = state.assignment.labels;
    if (common_theta(variant)) {
      const Vector<Scalar> weights = scaled(variant) ? params.lambda : Vector<Scalar>::Ones(data.p());
      params.theta.setConstant(
          update_common_theta(data, state.assignment, params.barycenters, weights, config.theta_min));
    } else {
      for (Index j = 0; j < data.p(); ++j) {
        const Scalar lam = scaled(variant) ? params.lambda[j] : Scalar(1);
        params.theta[j] = update_theta(data.column(j),
                                       detail::gather_barycenters(params.barycenters, labels, j), lam,
                                       config.theta_min);
      }
    }
    notify(Step::Theta, false);

    if (scaled(variant)) {
      for (Index j = 0; j < data.p(); ++j)
        params.lambda[j] = update_lambda(data.column(j),
                                         detail::gather_barycenters(params.barycenters, labels, j),
                                         params.theta[j], config.lambda_min, config.lambda_max);
      notify(Step::Lambda, false);
    }

    params.barycenters = update_barycenters(data, state.assignment, params.theta);
    state.objective = objective_value(data, params, state.assignment);
    if (observer) observer(Step::Barycenters, state, false);

    const bool same_labels = previous_labels.size() == labels.size() && previous_labels == labels;
    bool settled = same_labels;
    if (settled && config.objective_tol) {
      const Scalar scale = std::max(Scalar(1), std::abs(state.objective));
      settled = previous_objective - state.objective <= static_cast<Scalar>(*config.objective_tol) * scale;
    }
    if (settled) {
      converged = true;
      break;
    }
    previous_labels = labels;
    previous_objective = state.objective;
  }

  FitResult<Scalar> result;
  result.params = std::move(state.params);
  result.assignment = std::move(state.assignment);
  result.objective = state.objective;
  result.iterations = iteration;
  result.converged = converged;
  return result;
}

/// Best of config.restarts independent runs. Restart r starts from
/// derive_seed(config.seed, r); the smallest objective wins, ties to the lowest r.
template <typename Scalar>
FitResult<Scalar> fit(const Dataset<Scalar>& data, const VariantConfig& config) {
  config.validate();
  if (data.n() < config.k) throw std::invalid_argument("fewer points than clusters");
  const auto count = static_cast<std::size_t>(config.restarts);
  std::vector<FitResult<Scalar>> runs(count);
  parallel_for(count, config.threads, [&](std::size_t r) {
    runs[r] = fit_once(data, config, derive_seed(config.seed, r));
    runs[r].restart_index = static_cast<int>(r);
  });
  std::size_t best = 0;
  for (std::size_t r = 1; r < count; ++r)
    if (runs[r].objective < runs[best].objective) best = r;
  return std::move(runs[best]);
}

}  // namespace kq
