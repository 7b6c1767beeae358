#include "kquantiles/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "kquantiles/seeding.hpp"

namespace kq {

namespace {

// Independent streams derived from the spec seed.
constexpr std::uint64_t kCorrelationStream = 1;
constexpr std::uint64_t kDataStream = 2;

constexpr int kMaxBetaDraws = 10'000'000;

bool valid_k(int k) { return k == 2 || k == 3 || k == 5; }

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

double standard_normal(std::mt19937_64& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }

double student_t3(std::mt19937_64& rng) { return std::student_t_distribution<double>(3.0)(rng); }

double transform(int block, double w) {
  switch (block) {
    case 0: return w;
    case 1: return std::exp(w);
    case 2: return std::log(std::abs(w));
    case 3: return w * w;
    default: return std::sqrt(std::abs(w));
  }
}

// Block (0..4) of column `j` among `count` columns split into five balanced blocks.
int block_of(Index j, Index count) {
  return static_cast<int>((5 * j) / std::max<Index>(count, 1));
}

BetaParams beta_uniform(std::mt19937_64& rng, double alo, double ahi, double blo, double bhi) {
  return {uniform(rng, alo, ahi), uniform(rng, blo, bhi)};
}

// One class's parameters under the skewed scheme. With K = 3 the third class
// has its own range.
BetaParams beta_skew_draw(int k, int cls, std::mt19937_64& rng) {
  if (k == 5) {
    switch (std::uniform_int_distribution<int>(0, 4)(rng)) {
      case 0: return beta_uniform(rng, 0.1, 1.0, 1.0, 5.0);
      case 1: return beta_uniform(rng, 1.0, 5.0, 0.1, 1.0);
      case 2: return beta_uniform(rng, 1.0, 3.0, 5.0, 10.0);
      case 3: return beta_uniform(rng, 5.0, 10.0, 1.0, 3.0);
      default: return beta_uniform(rng, 1.0, 3.0, 1.0, 3.0);
    }
  }
  if (k == 3 && cls == 2) return beta_uniform(rng, 1.0, 3.0, 5.0, 10.0);
  if (std::bernoulli_distribution(0.5)(rng)) return beta_uniform(rng, 0.1, 1.0, 1.0, 10.0);
  return beta_uniform(rng, 1.0, 10.0, 0.1, 1.0);
}

BetaParams beta_noise_params(Scenario scenario, int k, std::mt19937_64& rng) {
  if (scenario == Scenario::BetaMild) return beta_uniform(rng, 1.0, 10.0, 1.0, 10.0);
  return beta_skew_draw(k, 0, rng);
}

}  // namespace

Scenario scenario_from_int(int id) {
  if (id < 1 || id > 5) throw std::invalid_argument("scenario must be 1..5, got " + std::to_string(id));
  return static_cast<Scenario>(id);
}

std::string_view to_string(Scenario s) noexcept {
  switch (s) {
    case Scenario::TShift: return "t_shift";
    case Scenario::ExpShift: return "exp_shift";
    case Scenario::MixedTransforms: return "mixed_transforms";
    case Scenario::BetaMild: return "beta_mild";
    case Scenario::BetaSkew: return "beta_skew";
  }
  return "?";
}

void ScenarioSpec::validate() const {
  if (!valid_k(k)) throw std::invalid_argument("k must be 2, 3 or 5 for the simulation scenarios");
  if (n < k) throw std::invalid_argument("n must be at least k");
  if (p < 1) throw std::invalid_argument("p must be >= 1");
  if (!(relevant_fraction > 0.0 && relevant_fraction <= 1.0))
    throw std::invalid_argument("relevant fraction must lie in (0, 1]");
  if (dependent && static_cast<int>(scenario) > 3)
    throw std::invalid_argument("dependent variables are only defined for scenarios 1-3");
  if (!weights.empty()) {
    if (static_cast<int>(weights.size()) != k) throw std::invalid_argument("need one weight per class");
    for (double w : weights)
      if (!(w > 0.0) || !std::isfinite(w)) throw std::invalid_argument("class weights must be positive");
  }
}

Index ScenarioSpec::relevant_count() const {
  const auto r = static_cast<Index>(std::llround(relevant_fraction * static_cast<double>(p)));
  return std::clamp<Index>(r, 1, p);
}

std::vector<Index> class_sizes(Index n, int k, const std::vector<double>& weights) {
  std::vector<Index> sizes(static_cast<std::size_t>(k));
  if (weights.empty()) {
    for (int c = 0; c < k; ++c) sizes[static_cast<std::size_t>(c)] = n / k + (c < n % k ? 1 : 0);
    return sizes;
  }
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  Index assigned = 0;
  for (int c = 0; c < k; ++c) {
    const auto share = static_cast<Index>(std::floor(static_cast<double>(n) * weights[static_cast<std::size_t>(c)] / total));
    sizes[static_cast<std::size_t>(c)] = share;
    assigned += share;
  }
  for (int c = 0; assigned < n; c = (c + 1) % k, ++assigned) ++sizes[static_cast<std::size_t>(c)];
  return sizes;
}

double sample_beta(double a, double b, std::mt19937_64& rng) {
  std::gamma_distribution<double> ga(a, 1.0);
  std::gamma_distribution<double> gb(b, 1.0);
  for (;;) {
    const double x = ga(rng);
    const double y = gb(rng);
    if (x + y > 0.0) return x / (x + y);
  }
}

Matrix<double> random_correlation_matrix(Index p, std::mt19937_64& rng) {
  if (p < 1) throw std::invalid_argument("correlation matrix needs p >= 1");
  Matrix<double> r = Matrix<double>::Identity(p, p);
  if (p == 1) return r;

  double beta = 1.0 + static_cast<double>(p - 2) / 2.0;
  const double r12 = 2.0 * sample_beta(beta, beta, rng) - 1.0;
  r(0, 1) = r(1, 0) = r12;

  for (Index m = 2; m < p; ++m) {
    beta -= 0.5;
    const double y = sample_beta(static_cast<double>(m) / 2.0, beta, rng);
    Vector<double> u(m);
    for (Index i = 0; i < m; ++i) u[i] = standard_normal(rng);
    u.normalize();
    const Vector<double> w = std::sqrt(y) * u;
    const Eigen::LLT<Matrix<double>> chol(r.topLeftCorner(m, m));
    const Vector<double> z = chol.matrixL() * w;
    r.block(0, m, m, 1) = z;
    r.block(m, 0, 1, m) = z.transpose();
  }
  return r;
}

Matrix<double> random_correlation_matrix(Index p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return random_correlation_matrix(p, rng);
}

Matrix<double> dependence_matrix(const ScenarioSpec& spec) {
  const Index r = spec.relevant_count();
  if (!spec.dependent) return Matrix<double>::Identity(r, r);
  std::mt19937_64 rng(derive_seed(spec.seed, kCorrelationStream));
  return random_correlation_matrix(r, rng);
}

double beta_mean_gap_bound(Scenario scenario) {
  switch (scenario) {
    case Scenario::BetaMild: return 0.2;
    case Scenario::BetaSkew: return 0.1;
    default: throw std::invalid_argument("mean-gap bound only applies to the Beta scenarios");
  }
}

std::vector<BetaParams> draw_beta_class_parameters(Scenario scenario, int k, std::mt19937_64& rng) {
  const double bound = beta_mean_gap_bound(scenario);
  std::vector<BetaParams> params(static_cast<std::size_t>(k));
  for (int attempt = 0; attempt < kMaxBetaDraws; ++attempt) {
    for (int c = 0; c < k; ++c)
      params[static_cast<std::size_t>(c)] = scenario == Scenario::BetaMild
                                                ? beta_uniform(rng, 1.0, 10.0, 1.0, 10.0)
                                                : beta_skew_draw(k, c, rng);
    double lo = params[0].mean();
    double hi = lo;
    for (const auto& bp : params) {
      lo = std::min(lo, bp.mean());
      hi = std::max(hi, bp.mean());
    }
    if (hi - lo <= bound) return params;
  }
  throw NumericError("could not draw Beta parameters within the class mean-gap bound");
}

std::vector<double> shift_pattern(int k) {
  switch (k) {
    case 2: return {0.0, 1.0};
    case 3: return {0.0, 1.0, -1.0};
    case 5: return {0.0, 1.0, 2.0, -1.0, -2.0};
    default: throw std::invalid_argument("k must be 2, 3 or 5");
  }
}

LabeledDataset generate(const ScenarioSpec& spec) {
  spec.validate();
  const Index n = spec.n;
  const Index p = spec.p;
  const Index r = spec.relevant_count();
  const int k = spec.k;

  const auto sizes = class_sizes(n, k, spec.weights);
  if (*std::min_element(sizes.begin(), sizes.end()) == 0)
    throw std::invalid_argument("class weights leave a class without observations");
  Labels labels(n);
  {
    Index row = 0;
    for (int c = 0; c < k; ++c)
      for (Index t = 0; t < sizes[static_cast<std::size_t>(c)]; ++t) labels[row++] = c;
  }

  std::mt19937_64 rng(derive_seed(spec.seed, kDataStream));
  Matrix<double> x(n, p);

  const bool gaussian_base = spec.scenario == Scenario::ExpShift || spec.scenario == Scenario::MixedTransforms;
  if (spec.scenario == Scenario::TShift || gaussian_base) {
    // Latent base variables for the relevant block, optionally correlated.
    // Multivariate normal with the scenario correlation; for scenario 1 each row
    // is divided by one shared sqrt(chi2_3 / 3), giving a multivariate t3.
    Matrix<double> w(n, r);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < r; ++j) w(i, j) = standard_normal(rng);
    if (spec.dependent) {
      const Matrix<double> lower = Eigen::LLT<Matrix<double>>(dependence_matrix(spec)).matrixL();
      w = (w * lower.transpose()).eval();
    }
    if (spec.scenario == Scenario::TShift) {
      std::chi_squared_distribution<double> chi(3.0);
      for (Index i = 0; i < n; ++i) w.row(i) /= std::sqrt(chi(rng) / 3.0);
    }

    const auto pattern = shift_pattern(k);
    for (Index i = 0; i < n; ++i) {
      const int c = labels[i];
      for (Index j = 0; j < r; ++j) {
        switch (spec.scenario) {
          case Scenario::TShift: x(i, j) = w(i, j) + pattern[static_cast<std::size_t>(c)]; break;
          case Scenario::ExpShift: x(i, j) = std::exp(w(i, j)) + 0.6 * pattern[static_cast<std::size_t>(c)]; break;
          default: x(i, j) = transform(block_of(j, r), w(i, j) + 0.7 * c); break;
        }
      }
    }
    // Irrelevant columns: independent draws from the base distribution.
    for (Index j = r; j < p; ++j) {
      const int block = block_of(j - r, p - r);
      for (Index i = 0; i < n; ++i) {
        switch (spec.scenario) {
          case Scenario::TShift: x(i, j) = student_t3(rng); break;
          case Scenario::ExpShift: x(i, j) = std::exp(standard_normal(rng)); break;
          default: x(i, j) = transform(block, standard_normal(rng)); break;
        }
      }
    }
  } else {
    for (Index j = 0; j < r; ++j) {
      const auto params = draw_beta_class_parameters(spec.scenario, k, rng);
      for (Index i = 0; i < n; ++i) {
        const auto& bp = params[static_cast<std::size_t>(labels[i])];
        x(i, j) = sample_beta(bp.a, bp.b, rng);
      }
    }
    for (Index j = r; j < p; ++j) {
      const BetaParams bp = beta_noise_params(spec.scenario, k, rng);
      for (Index i = 0; i < n; ++i) x(i, j) = sample_beta(bp.a, bp.b, rng);
    }
  }

  return LabeledDataset{Dataset<double>(std::move(x)), make_assignment(std::move(labels), k), spec};
}

}  // namespace kq
