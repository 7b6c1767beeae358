#pragma once

#include <cctype>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace kq {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Index = Eigen::Index;

/// Cluster labels are stored 0-based; the CLI writes them 1-based.
using Labels = Eigen::VectorXi;

/// Raised when a numerical routine leaves its admissible domain.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised for malformed input data (parse failures, non-finite values).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Common vs variable-wise theta, crossed with unscaled vs scaled variables.
enum class Variant { CU, CS, VU, VS };

constexpr bool common_theta(Variant v) noexcept {
  return v == Variant::CU || v == Variant::CS;
}

constexpr bool scaled(Variant v) noexcept {
  return v == Variant::CS || v == Variant::VS;
}

inline std::string_view to_string(Variant v) noexcept {
  switch (v) {
    case Variant::CU: return "CU";
    case Variant::CS: return "CS";
    case Variant::VU: return "VU";
    case Variant::VS: return "VS";
  }
  return "?";
}

inline Variant parse_variant(std::string_view s) {
  std::string up(s);
  for (auto& c : up) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (up == "CU") return Variant::CU;
  if (up == "CS") return Variant::CS;
  if (up == "VU") return Variant::VU;
  if (up == "VS") return Variant::VS;
  throw std::invalid_argument("unknown variant: " + std::string(s));
}

/// How lambda is set before the first assignment.
///  - Unit: lambda_j = 1 for every variable.
///  - Dispersion: for scaled variants, lambda_j = n / sum_i Q(x_ij, theta_j, q_j(theta_j)),
///    the reciprocal mean discrepancy around the pooled column quantile. This makes
///    the whole iteration scale equivariant; unscaled variants keep lambda = 1.
enum class LambdaInit { Unit, Dispersion };

struct VariantConfig {
  Variant variant = Variant::VS;
  int k = 2;
  int restarts = 30;
  int max_iter = 1000;
  std::uint64_t seed = 0;
  double theta_min = 1e-4;
  double lambda_max = 1e8;
  double lambda_min = 1e-8;
  // When set, an iteration with unchanged labels only counts as converged if the
  // relative objective decrease is also at most this value. Unset: labels alone.
  std::optional<double> objective_tol;
  LambdaInit lambda_init = LambdaInit::Unit;
  // 0 selects std::thread::hardware_concurrency().
  unsigned threads = 0;

  void validate() const {
    if (k < 1) throw std::invalid_argument("k must be >= 1");
    if (restarts < 1) throw std::invalid_argument("restarts must be >= 1");
    if (max_iter < 1) throw std::invalid_argument("max_iter must be >= 1");
    if (!(theta_min > 0.0 && theta_min < 0.5))
      throw std::invalid_argument("theta_min must lie in (0, 0.5)");
    if (!(lambda_min > 0.0 && lambda_min < lambda_max))
      throw std::invalid_argument("require 0 < lambda_min < lambda_max");
    if (objective_tol && !(*objective_tol >= 0.0))
      throw std::invalid_argument("objective_tol must be >= 0");
  }
};

/// An n x p matrix of finite observations, one row per observation.
template <typename Scalar>
class Dataset {
 public:
  Dataset() = default;

  explicit Dataset(Matrix<Scalar> values) : values_(std::move(values)) {
    if (values_.rows() < 1 || values_.cols() < 1)
      throw std::invalid_argument("dataset needs at least one row and one column");
    if (!values_.allFinite()) throw DataError("dataset contains non-finite values");
  }

  const Matrix<Scalar>& values() const noexcept { return values_; }
  Index n() const noexcept { return values_.rows(); }
  Index p() const noexcept { return values_.cols(); }
  auto column(Index j) const { return values_.col(j); }

 private:
  Matrix<Scalar> values_;
};

struct Assignment {
  Labels labels;
  Eigen::VectorXi cluster_sizes;

  Index n() const noexcept { return labels.size(); }
  int k() const noexcept { return static_cast<int>(cluster_sizes.size()); }

  bool has_empty_cluster() const { return k() > 0 && cluster_sizes.minCoeff() == 0; }
};

inline Assignment make_assignment(Labels labels, int k) {
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  Eigen::VectorXi sizes = Eigen::VectorXi::Zero(k);
  for (Index i = 0; i < labels.size(); ++i) {
    const int c = labels[i];
    if (c < 0 || c >= k) throw std::invalid_argument("label out of range");
    ++sizes[c];
  }
  return Assignment{std::move(labels), std::move(sizes)};
}

template <typename Scalar>
struct ModelParams {
  Vector<Scalar> theta;        // length p
  Vector<Scalar> lambda;       // length p
  Matrix<Scalar> barycenters;  // K x p
  Variant variant = Variant::VS;

  Index p() const noexcept { return theta.size(); }
  int k() const noexcept { return static_cast<int>(barycenters.rows()); }
};

template <typename Scalar>
struct FitResult {
  ModelParams<Scalar> params;
  Assignment assignment;
  Scalar objective{};
  int iterations = 0;
  int restart_index = 0;
  bool converged = false;
};

}  // namespace kq
