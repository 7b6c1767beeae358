#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "kquantiles/types.hpp"

namespace kq {

/// Simulation scenarios, numbered 1..5:
///  1 TShift           Student t3 variables, unit location shifts between classes
///  2 ExpShift         exp(Gaussian) variables, shifts of 0.6
///  3 MixedTransforms  Gaussian shifted by multiples of 0.7, then one of five transforms
///                     (identity, exp, log|.|, square, sqrt|.|) per balanced block of variables
///  4 BetaMild         Beta(a,b) per class with a,b ~ U(1,10), class means within 0.2
///  5 BetaSkew         Beta with skew-inducing parameter ranges, class means within 0.1
enum class Scenario { TShift = 1, ExpShift = 2, MixedTransforms = 3, BetaMild = 4, BetaSkew = 5 };

Scenario scenario_from_int(int id);
std::string_view to_string(Scenario s) noexcept;

struct ScenarioSpec {
  Scenario scenario = Scenario::TShift;
  int k = 2;
  Index n = 100;
  Index p = 50;
  double relevant_fraction = 1.0;
  bool dependent = false;
  std::uint64_t seed = 0;
  // Optional class proportions; empty means balanced.
  std::vector<double> weights;

  void validate() const;
  /// Number of leading columns that carry class structure: round(fraction * p), at least 1.
  Index relevant_count() const;
};

struct LabeledDataset {
  Dataset<double> data;
  Assignment truth;
  ScenarioSpec spec;
};

struct BetaParams {
  double a = 1.0;
  double b = 1.0;
  double mean() const noexcept { return a / (a + b); }
};

/// Class sizes summing to n: balanced with the remainder on the lowest classes,
/// or proportional to `weights` with the same remainder rule.
std::vector<Index> class_sizes(Index n, int k, const std::vector<double>& weights = {});

/// Uniform draw over p x p positive definite correlation matrices (onion method);
/// each off-diagonal entry is marginally Beta(p/2, p/2) rescaled to (-1, 1).
Matrix<double> random_correlation_matrix(Index p, std::mt19937_64& rng);
Matrix<double> random_correlation_matrix(Index p, std::uint64_t seed);

/// Correlation of the relevant columns: identity unless spec.dependent.
Matrix<double> dependence_matrix(const ScenarioSpec& spec);

/// Per-class Beta parameters for one relevant variable of scenario 4 or 5, redrawn
/// jointly until every pair of class means differs by at most the scenario's bound.
std::vector<BetaParams> draw_beta_class_parameters(Scenario scenario, int k, std::mt19937_64& rng);

/// Largest admissible gap between class means for the Beta scenarios.
double beta_mean_gap_bound(Scenario scenario);

double sample_beta(double a, double b, std::mt19937_64& rng);

/// Class-wise location shifts for scenarios 1 and 2, in units of the scenario step:
/// K=2 {0,1}; K=3 {0,1,-1}; K=5 {0,1,2,-1,-2}.
std::vector<double> shift_pattern(int k);

LabeledDataset generate(const ScenarioSpec& spec);

}  // namespace kq
