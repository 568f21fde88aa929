#pragma once

#include "concpos/types.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <string>

namespace concpos {

enum class NormKind { lp, polytope, linear_image, sum_max, section, smoothed, sum, custom };

std::string to_string(NormKind kind);

/// Evaluation and subgradient oracle for a norm on R^n.
///
/// Implementations are immutable after construction, so a single instance can be
/// shared by concurrent sampling workers.
class Norm {
 public:
  explicit Norm(Index dim) : dim_(dim) {}
  virtual ~Norm() = default;

  Index dim() const { return dim_; }

  virtual double value(VecRef x) const = 0;

  /// Writes a subgradient at x into g (size dim) and returns the value at x.
  /// Among several maximizing functionals the lowest index wins.
  virtual double value_and_subgradient(VecRef x, VecOut g) const = 0;

  virtual NormKind kind() const = 0;
  virtual std::string describe() const = 0;

  /// Rows u_j with value(x) = max_j |<u_j, x>| when such a finite description is known.
  virtual std::optional<Matrix> functionals() const { return std::nullopt; }

  Vector subgradient(VecRef x) const;
  double operator()(VecRef x) const { return value(x); }

 private:
  Index dim_;
};

using NormPtr = std::shared_ptr<const Norm>;

NormPtr make_lp_norm(Index n, double p);
NormPtr make_linf_norm(Index n);

/// max_j |<u_j, x>|. Throws DegenerateNormError when the rows do not span R^n.
NormPtr make_polytope_norm(const Matrix& U);

/// max_i w_i |x_i| with positive weights.
NormPtr make_weighted_sup_norm(const Vector& weights);

/// x -> X(Tx). Nested compositions are flattened into a single matrix product.
NormPtr compose_linear(const NormPtr& X, const Matrix& T);

/// (x; z) -> max{X(x), |z|_2} on R^{n+m}.
NormPtr direct_sum_max(const NormPtr& X, Index m);

/// alpha -> X(E alpha) for E with orthonormal columns.
NormPtr restrict_to_subspace(const NormPtr& X, const Matrix& E);

double default_smoothing_delta(Index m);

/// (sum_j |<u_j,x>|^p)^(1/p) with p = ceil(log(2J) / log(1 + delta)).
/// X must expose functionals().
NormPtr smooth(const NormPtr& X, double delta);

/// wx * X(x) + wy * Y(x).
NormPtr make_sum_norm(const NormPtr& X, const NormPtr& Y, double wx = 1.0, double wy = 1.0);

/// Wraps user callbacks without validation; intended for tests and degenerate inputs.
NormPtr make_custom_norm(Index n, std::function<double(VecRef)> value,
                         std::function<void(VecRef, VecOut)> subgradient, std::string name);

/// Subgradient at x != 0; throws UndefinedGradientError at the origin.
Vector gradient(const Norm& X, VecRef x);

/// Condition number of the matrix of a linear-image norm, or nullopt for other kinds.
std::optional<double> condition_number(const Norm& X);

/// Exponent of a smoothed norm, or nullopt for other kinds.
std::optional<double> smoothing_exponent(const Norm& X);

}  // namespace concpos
