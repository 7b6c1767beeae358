#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <vector>

#include "kquantiles/kquantiles.hpp"
#include "oracles.hpp"

using namespace kq;

namespace {

constexpr Variant kVariants[] = {Variant::CU, Variant::CS, Variant::VU, Variant::VS};

ModelParams<double> make_params(Variant v, double theta, const Matrix<double>& xi) {
  ModelParams<double> m;
  m.variant = v;
  m.theta = Vector<double>::Constant(xi.cols(), theta);
  m.lambda = Vector<double>::Ones(xi.cols());
  m.barycenters = xi;
  return m;
}

Matrix<double> col(std::initializer_list<double> v) {
  Matrix<double> m(static_cast<Index>(v.size()), 1);
  Index i = 0;
  for (double x : v) m(i++, 0) = x;
  return m;
}

bool same_partition(const Labels& a, const Labels& b) {
  std::map<int, int> ab;
  std::map<int, int> ba;
  if (a.size() != b.size()) return false;
  for (Index i = 0; i < a.size(); ++i) {
    if (ab.emplace(a[i], b[i]).first->second != b[i]) return false;
    if (ba.emplace(b[i], a[i]).first->second != a[i]) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("assign examples") {
  const Dataset<double> one(col({3.0, -1.0, 8.0}));
  CHECK((assign(one, make_params(Variant::VS, 0.5, col({0.0}))).labels.array() == 0).all());

  Matrix<double> xi(2, 1);
  xi << 0.0, 10.0;
  const Dataset<double> x3(col({3.0}));
  CHECK(assign(x3, make_params(Variant::VS, 0.5, xi)).labels[0] == 0);

  xi << 0.0, 4.0;
  CHECK(assign(x3, make_params(Variant::VS, 0.2, xi)).labels[0] == 0);
  CHECK(assign(x3, make_params(Variant::VS, 0.8, xi)).labels[0] == 1);

  xi << 2.0, 4.0;  // equal costs at theta = 0.5
  CHECK(assign(x3, make_params(Variant::VS, 0.5, xi)).labels[0] == 0);
}

TEST_CASE("theta update examples") {
  CHECK(solve_theta_quadratic(5.0, 0.0) == 0.5);
  CHECK(update_theta(col({1.0, 2.0, 3.0}), col({2.0, 2.0, 2.0}), 1.0) == 0.5);

  const double t1 = update_theta(col({2.0}), col({0.0}), 1.0);
  CHECK(t1 == doctest::Approx(1.0 - 1.0 / std::sqrt(2.0)).epsilon(1e-14));
  CHECK(std::abs(t1 - oracle::theta_by_grid({2.0}, {0.0}, 1.0)) <= 2e-6);

  const double t2 = update_theta(col({-1.0, -1.0}), col({0.0, 0.0}), 1.0);
  CHECK(t2 == doctest::Approx((std::sqrt(5.0) - 1.0) / 2.0).epsilon(1e-14));
  CHECK(std::abs(t2 - oracle::theta_by_grid({-1.0, -1.0}, {0.0, 0.0}, 1.0)) <= 2e-6);
}

TEST_CASE("theta update matches the grid oracle") {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> size(1, 30);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> lam(0.1, 5.0);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = size(rng);
    std::vector<double> x(static_cast<std::size_t>(n));
    std::vector<double> xi(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = z(rng) + (trial % 2 ? std::exp(z(rng)) : 0.0);
      xi[i] = 0.3 * z(rng);
    }
    const double l = lam(rng);
    const double got = update_theta(Eigen::Map<Vector<double>>(x.data(), n), Eigen::Map<Vector<double>>(xi.data(), n), l);
    CHECK(std::abs(got - oracle::theta_by_grid(x, xi, l)) <= 2e-6);
  }
}

TEST_CASE("theta root satisfies the quadratic") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> e(-6.0, 6.0);
  std::uniform_int_distribution<int> n(1, 1000);
  for (int trial = 0; trial < 5000; ++trial) {
    const double m = n(rng);
    const double sign = trial % 2 ? 1.0 : -1.0;
    const double t = sign * std::pow(10.0, e(rng)) * m;
    if (std::abs(t) >= 2.0 * m * 1e6) continue;
    const double th = solve_theta_quadratic(m, t);
    CHECK(th > 0.0);
    CHECK(th < 1.0);
    const double residual = t * th * th - (2.0 * m + t) * th + m;
    CHECK(std::abs(residual) / (std::abs(t) + 2.0 * m) <= 1e-10);
  }
  CHECK_THROWS_WITH_AS(solve_theta_quadratic(1.0, std::numeric_limits<double>::infinity()),
                       "theta root out of range", NumericError);
  CHECK(clamp_theta(solve_theta_quadratic(1.0, 1e15), 1e-4) == 1e-4);
  CHECK(clamp_theta(solve_theta_quadratic(1.0, -1e15), 1e-4) == 1.0 - 1e-4);
}

TEST_CASE("common theta matches the pooled grid oracle") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix<double> x = oracle::random_data(rng, 15, 3, 2);
    const Dataset<double> data(x);
    Labels lab(15);
    for (int i = 0; i < 15; ++i) lab[i] = i % 2;
    const Assignment a = make_assignment(lab, 2);
    const Matrix<double> xi = x.topRows(2);
    Vector<double> lam(3);
    lam << 0.5, 1.0, 3.0;
    Matrix<double> xi_of(15, 3);
    for (int i = 0; i < 15; ++i) xi_of.row(i) = xi.row(lab[i]);
    const double got = update_common_theta(data, a, xi, lam);
    CHECK(std::abs(got - oracle::common_theta_by_grid(x, xi_of, lam)) <= 2e-6);
  }
}

TEST_CASE("lambda update examples") {
  // n = 4 with sum Q = 2 at theta = 0.5: |x - xi| sums to 4.
  CHECK(update_lambda(col({1, -1, 1, -1}), col({0, 0, 0, 0}), 0.5) == doctest::Approx(2.0));
  CHECK(update_lambda(col({1, 2}), col({1, 2}), 0.3) == 1e8);
  CHECK(update_lambda(col({1, 2}), col({1, 2}), 0.3, 1e-8, 50.0) == 50.0);
  const double l = update_lambda(col({0, 1, 5}), col({1, 1, 1}), 0.3);
  CHECK(l == doctest::Approx(30.0 / 19.0).epsilon(1e-14));
  CHECK(l == doctest::Approx(oracle::lambda_by_grid(1.9, 3.0)).epsilon(2e-6));
  CHECK(update_lambda(col({0, 1e12}), col({0, 0}), 0.5) == 1e-8);
}

TEST_CASE("lambda update matches the grid oracle") {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> z(0.0, 3.0);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 5 + trial;
    Vector<double> x(n);
    for (Index i = 0; i < n; ++i) x[i] = z(rng);
    const Vector<double> xi = Vector<double>::Constant(n, 0.1);
    const double th = 0.1 + 0.04 * trial;
    double sq = 0.0;
    for (Index i = 0; i < n; ++i) sq += oracle::Q(x[i], th, 0.1);
    const double got = update_lambda(x, xi, th);
    CHECK(std::abs(got - oracle::lambda_by_grid(sq, n)) <= 2e-6 * std::max(1.0, got));
  }
}

TEST_CASE("barycenter update") {
  const Dataset<double> d(col({3, 1, 2}));
  CHECK(update_barycenters<double>(d, make_assignment(Labels::Zero(3), 1), Vector<double>::Constant(1, 0.5))(0, 0) == 2.0);

  Matrix<double> x(2, 2);
  x << 1, 2, 3, 4;
  Labels lab(2);
  lab << 1, 0;
  const Matrix<double> xi = update_barycenters<double>(Dataset<double>(x), make_assignment(lab, 2), Vector<double>::Constant(2, 0.3));
  CHECK(xi(0, 0) == 3.0);
  CHECK(xi(0, 1) == 4.0);
  CHECK(xi(1, 0) == 1.0);
  CHECK(xi(1, 1) == 2.0);

  Labels empty(2);
  empty << 0, 0;
  CHECK_THROWS_AS(update_barycenters<double>(Dataset<double>(x), make_assignment(empty, 2), Vector<double>::Constant(2, 0.3)),
                  std::invalid_argument);
}

TEST_CASE("barycenters minimize the within-cluster discrepancy") {
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<double> t(0.02, 0.98);
  for (int trial = 0; trial < 30; ++trial) {
    const Matrix<double> x = oracle::random_data(rng, 10, 2, 2);
    Labels lab(10);
    for (int i = 0; i < 10; ++i) lab[i] = (i * 7 + trial) % 3 == 0 ? 1 : 0;
    lab[0] = 0;
    lab[1] = 1;
    Vector<double> th(2);
    th << t(rng), t(rng);
    const Matrix<double> xi = update_barycenters(Dataset<double>(x), make_assignment(lab, 2), th);
    for (int c = 0; c < 2; ++c)
      for (int j = 0; j < 2; ++j) {
        auto total = [&](double centre) {
          double s = 0.0;
          for (int i = 0; i < 10; ++i)
            if (lab[i] == c) s += oracle::Q(x(i, j), th[j], centre);
          return s;
        };
        const double best = total(xi(c, j));
        for (int i = 0; i < 10; ++i) CHECK(best <= total(x(i, j)) + 1e-12);
        for (int g = -50; g <= 50; ++g) CHECK(best <= total(xi(c, j) + 0.05 * g) + 1e-12);
      }
  }
}

TEST_CASE("initial quantile levels") {
  const double th = 0.37;
  CHECK(initial_level(0, 2, th) == doctest::Approx(th / 2));
  CHECK(initial_level(1, 2, th) == doctest::Approx(0.5 + th / 2));
  CHECK(initial_level(0, 3, 0.5) == doctest::Approx(0.25));
  CHECK(initial_level(1, 3, 0.5) == doctest::Approx(0.5));
  CHECK(initial_level(2, 3, 0.5) == doctest::Approx(0.75));
  CHECK(initial_level(0, 1, th) == th);
}

TEST_CASE("initialization") {
  std::mt19937_64 data_rng(6);
  const Matrix<double> x = oracle::random_data(data_rng, 40, 4, 3);
  const Dataset<double> data(x);
  for (Variant v : kVariants) {
    VariantConfig config;
    config.variant = v;
    config.k = 3;
    std::mt19937_64 rng(10);
    const auto params = initialize(data, config, rng);
    CHECK((params.lambda.array() == 1.0).all());
    CHECK(params.barycenters.rows() == 3);
    if (common_theta(v)) CHECK((params.theta.array() == params.theta[0]).all());
    CHECK((params.theta.array() >= config.theta_min).all());
    CHECK((params.theta.array() <= 1.0 - config.theta_min).all());
    for (int c = 0; c < 3; ++c)
      for (Index j = 0; j < 4; ++j)
        CHECK(params.barycenters(c, j) == empirical_quantile(x.col(j), initial_level(c, 3, params.theta[j])));
  }
  VariantConfig vs;
  vs.variant = Variant::VS;
  vs.lambda_init = LambdaInit::Dispersion;
  std::mt19937_64 rng(1);
  const auto disp = initialize(data, vs, rng);
  for (Index j = 0; j < 4; ++j) {
    const double q = empirical_quantile(x.col(j), disp.theta[j]);
    double s = 0.0;
    for (Index i = 0; i < 40; ++i) s += oracle::Q(x(i, j), disp.theta[j], q);
    CHECK(disp.lambda[j] == doctest::Approx(40.0 / s).epsilon(1e-12));
  }
}

TEST_CASE("single cluster reaches the closed-form fixed point in two iterations") {
  std::mt19937_64 rng(19);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix<double> x = oracle::random_data(rng, 25, 3, 1);
    const Dataset<double> data(x);
    VariantConfig config;
    config.variant = Variant::CU;
    config.k = 1;
    Matrix<double> xi_before_theta;
    auto observer = [&](Step step, const SolverState<double>& s, bool) {
      if (step == Step::Assign) xi_before_theta = s.params.barycenters;
    };
    const auto r = fit_once<double>(data, config, 100 + trial, observer);
    CHECK(r.converged);
    CHECK(r.iterations <= 2);
    CHECK((r.assignment.labels.array() == 0).all());
    const double th = r.params.theta[0];
    double s = 0.0;
    for (Index j = 0; j < 3; ++j)
      for (Index i = 0; i < 25; ++i) s += x(i, j) - xi_before_theta(0, j);
    const double root = solve_theta_quadratic(75.0, s);
    CHECK(th == doctest::Approx(root).epsilon(1e-14));
    CHECK(std::abs(th - oracle::common_theta_by_grid(x, xi_before_theta.replicate(25, 1), Vector<double>::Ones(3))) <= 2e-6);
    for (Index j = 0; j < 3; ++j) CHECK(r.params.barycenters(0, j) == empirical_quantile(x.col(j), th));
  }
}

TEST_CASE("well separated groups are recovered") {
  const Dataset<double> d(col({0.0, 0.1, 0.2, 100.0, 100.1}));
  Labels truth(5);
  truth << 0, 0, 0, 1, 1;
  for (Variant v : kVariants) {
    VariantConfig config;
    config.variant = v;
    config.k = 2;
    config.seed = 3;
    const auto r = fit(d, config);
    CHECK(adjusted_rand_index(truth, r.assignment.labels) == 1.0);
  }
}

TEST_CASE("fit_once rejects more clusters than points") {
  VariantConfig config;
  config.k = 4;
  CHECK_THROWS_WITH_AS(fit_once(Dataset<double>(col({1, 2, 3})), config, 1), "fewer points than clusters",
                       std::invalid_argument);
  CHECK_THROWS_AS(fit(Dataset<double>(col({1, 2, 3})), config), std::invalid_argument);
}

TEST_CASE("every sub-step is non-increasing") {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> kk(1, 4);
  std::uniform_int_distribution<int> pp(1, 5);
  int checked = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const int k = kk(rng);
    const int n = std::uniform_int_distribution<int>(k, 50)(rng);
    const Matrix<double> x = oracle::random_data(rng, n, pp(rng), std::max(k, 2));
    const Dataset<double> data(x);
    for (Variant v : kVariants) {
      VariantConfig config;
      config.variant = v;
      config.k = k;
      double last = std::numeric_limits<double>::quiet_NaN();
      auto observer = [&](Step step, const SolverState<double>& s, bool reseeded) {
        if (step == Step::Initialize) return;
        if (!std::isnan(last) && !reseeded) {
          CHECK(s.objective <= last + 1e-9 * std::max(1.0, std::abs(last)));
          ++checked;
        }
        last = s.objective;
      };
      const auto r = fit_once<double>(data, config, static_cast<std::uint64_t>(trial), observer);
      CHECK(r.objective == doctest::Approx(objective_value(data, r.params, r.assignment)).epsilon(1e-9));
    }
  }
  CHECK(checked > 1000);
}

TEST_CASE("runs terminate before the iteration cap") {
  std::mt19937_64 rng(88);
  for (int trial = 0; trial < 12; ++trial) {
    const int n = 20 + 15 * trial;
    const Matrix<double> x = oracle::random_data(rng, n, 3, 3);
    for (Variant v : kVariants) {
      VariantConfig config;
      config.variant = v;
      config.k = 3;
      const auto r = fit_once(Dataset<double>(x), config, static_cast<std::uint64_t>(trial));
      CHECK(r.converged);
      CHECK(r.iterations < config.max_iter);
    }
  }
}

TEST_CASE("parameter invariants of a fit") {
  std::mt19937_64 rng(9);
  const Matrix<double> x = oracle::random_data(rng, 60, 4, 3);
  for (Variant v : kVariants) {
    VariantConfig config;
    config.variant = v;
    config.k = 3;
    config.restarts = 5;
    const auto r = fit(Dataset<double>(x), config);
    if (common_theta(v)) CHECK((r.params.theta.array() == r.params.theta[0]).all());
    if (!scaled(v)) CHECK((r.params.lambda.array() == 1.0).all());
    CHECK((r.params.theta.array() >= config.theta_min).all());
    CHECK((r.params.theta.array() <= 1 - config.theta_min).all());
    CHECK((r.params.lambda.array() >= config.lambda_min).all());
    CHECK((r.params.lambda.array() <= config.lambda_max).all());
    CHECK(r.params.barycenters.allFinite());
    CHECK(r.assignment.cluster_sizes.sum() == 60);
  }
}

TEST_CASE("empty clusters are reseeded with the farthest point") {
  Matrix<double> x(5, 1);
  x << 0.0, 0.1, 0.2, 0.3, 9.0;
  const Dataset<double> data(x);
  Matrix<double> xi(2, 1);
  xi << 0.1, 50.0;
  auto params = make_params(Variant::VS, 0.5, xi);
  params.barycenters(1, 0) = -100.0;
  Assignment a = assign(data, params);
  REQUIRE(a.cluster_sizes[1] == 0);
  CHECK(reseed_empty_clusters(data, params, a));
  CHECK(a.labels[4] == 1);
  CHECK(params.barycenters(1, 0) == 9.0);
  CHECK(a.cluster_sizes[0] == 4);
  CHECK(a.cluster_sizes[1] == 1);
  CHECK_FALSE(reseed_empty_clusters(data, params, a));

  // Duplicated points force empty clusters; the fit must still complete.
  Matrix<double> dup(6, 2);
  dup << 1, 1, 1, 1, 1, 1, 1, 1, 2, 2, 2, 2;
  VariantConfig config;
  config.k = 3;
  for (Variant v : kVariants) {
    config.variant = v;
    const auto r = fit(Dataset<double>(dup), config);
    CHECK(r.assignment.cluster_sizes.minCoeff() >= 1);
  }
}

TEST_CASE("restart selection and determinism") {
  std::mt19937_64 rng(123);
  const Matrix<double> x = oracle::random_data(rng, 80, 3, 3);
  const Dataset<double> data(x);
  VariantConfig config;
  config.variant = Variant::VS;
  config.k = 3;
  config.seed = 2024;

  config.restarts = 1;
  const auto single = fit(data, config);
  const auto direct = fit_once(data, config, derive_seed(config.seed, 0));
  CHECK(single.objective == direct.objective);
  CHECK(single.assignment.labels == direct.assignment.labels);

  config.restarts = 30;
  const auto a = fit(data, config);
  const auto b = fit(data, config);
  CHECK(a.objective == b.objective);
  CHECK(a.assignment.labels == b.assignment.labels);
  CHECK(a.params.theta == b.params.theta);
  CHECK(a.params.lambda == b.params.lambda);
  CHECK(a.params.barycenters == b.params.barycenters);
  CHECK(a.restart_index == b.restart_index);
  CHECK(a.objective <= single.objective);

  config.threads = 4;
  const auto threaded = fit(data, config);
  CHECK(threaded.objective == a.objective);
  CHECK(threaded.assignment.labels == a.assignment.labels);
  CHECK(threaded.restart_index == a.restart_index);

  std::vector<double> runs;
  for (int r = 0; r < 30; ++r) runs.push_back(fit_once(data, config, derive_seed(config.seed, r)).objective);
  std::vector<double> shuffled = runs;
  std::shuffle(shuffled.begin(), shuffled.end(), std::mt19937_64(5));
  CHECK(*std::min_element(shuffled.begin(), shuffled.end()) == a.objective);
  CHECK(runs[static_cast<std::size_t>(a.restart_index)] == a.objective);
}

TEST_CASE("objective tolerance keeps iterating until the objective settles") {
  std::mt19937_64 rng(55);
  const Matrix<double> x = oracle::random_data(rng, 50, 3, 2);
  VariantConfig config;
  config.variant = Variant::VS;
  const auto loose = fit_once(Dataset<double>(x), config, 9);
  config.objective_tol = 0.0;
  const auto tight = fit_once(Dataset<double>(x), config, 9);
  CHECK(tight.iterations >= loose.iterations);
  CHECK(tight.objective <= loose.objective);
  config.objective_tol = -1.0;
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);
}

TEST_CASE("small instances reach the optimal assignment") {
  std::mt19937_64 rng(2718);
  std::normal_distribution<double> z(0.0, 1.0);
  int hits = 0;
  const int instances = 10;
  for (int trial = 0; trial < instances; ++trial) {
    Matrix<double> x(8, 2);
    for (Index i = 0; i < 8; ++i)
      for (Index j = 0; j < 2; ++j) x(i, j) = (i < 4 ? 0.0 : 2.0) + std::exp(z(rng));
    VariantConfig config;
    config.variant = Variant::VS;
    config.restarts = 30;
    config.seed = static_cast<std::uint64_t>(trial);
    const auto r = fit(Dataset<double>(x), config);
    const double best = oracle::exhaustive_optimum_k2(x, oracle::Form::VS);
    const std::vector<int> labels(r.assignment.labels.begin(), r.assignment.labels.end());
    const double reached = oracle::partition_optimum(x, labels, 2, oracle::Form::VS);
    CHECK(r.objective >= best - 1e-9 * std::max(1.0, std::abs(best)));
    if (std::abs(reached - best) <= 1e-9 * std::max(1.0, std::abs(best))) ++hits;
  }
  CHECK(hits >= 8);
}

TEST_CASE("scaled variants are equivariant under positive column scaling") {
  std::mt19937_64 rng(31415);
  std::uniform_real_distribution<double> logc(-2.0, 2.0);
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix<double> x = oracle::random_data(rng, 40, 3, 2);
    Vector<double> c(3);
    for (Index j = 0; j < 3; ++j) c[j] = std::pow(10.0, logc(rng));
    const Matrix<double> y = x * c.asDiagonal();
    for (Variant v : {Variant::CS, Variant::VS}) {
      VariantConfig config;
      config.variant = v;
      config.restarts = 3;
      config.seed = static_cast<std::uint64_t>(trial);
      config.lambda_init = LambdaInit::Dispersion;
      const auto a = fit(Dataset<double>(x), config);
      const auto b = fit(Dataset<double>(y), config);
      CHECK(same_partition(a.assignment.labels, b.assignment.labels));
      for (Index j = 0; j < 3; ++j) {
        CHECK(std::abs(a.params.theta[j] - b.params.theta[j]) <= 1e-9);
        CHECK(b.params.lambda[j] * c[j] == doctest::Approx(a.params.lambda[j]).epsilon(1e-9));
      }
      CHECK(std::abs((b.objective - a.objective) - 40.0 * c.array().log().sum()) <= 1e-6);
    }
  }
}
