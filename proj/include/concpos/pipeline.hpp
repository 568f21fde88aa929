#pragma once

#include "concpos/balancing.hpp"
#include "concpos/linf_structure.hpp"
#include "concpos/positions.hpp"
#include "concpos/sections.hpp"

#include <string>
#include <vector>

namespace concpos {

enum class Branch { euclidean, cube };
std::string to_string(Branch b);

struct TwoLevelFit {
  double c1 = 0.0;  // -log p ~ c1 t log n on t <= 1
  double c2 = 0.0;  // -log p ~ c2 t^2 log n on t >= 1
  double crossover = 0.0;  // c1 / c2
  LineFit linear;
  LineFit quadratic;
  double quadratic_all = 0.0;  // c2-type coefficient fitted on all usable points
  bool partial = false;        // a regime had fewer than 4 usable points
  bool super_logarithmic = false;  // quadratic_all > 10: effective exponent far above log n
};

/// Least-squares fits through the origin on grid points with at least kMinFitCount exceedances.
TwoLevelFit two_level_fit(const TailCurve& tail, Index n);

struct Lift {
  Matrix T_sub;  // W_sigma Lambda W_sigma^T
  Matrix S;      // T_sub + lambda (I - W_sigma W_sigma^T)
  double lambda = 0.0;
  double lambda_formula = 0.0;  // before the diagnostic scale
  double M_TZ = 0.0;
  double M_TZ_stderr = 0.0;
  double M_W = 0.0;
  double M_W_stderr = 0.0;
  bool trivial = false;  // F is the whole space
};

/// Builds S(x, y) = T x + lambda y on F + F^perp with F spanned by the orthonormal columns of W_sigma and
/// T = Lambda in that basis. lambda = lambda_scale * E|TZ| / (E|W|_2 log n), both means measured.
Lift build_lift(const NormPtr& Y, const Matrix& W_sigma, const Vector& Lambda, const SampleConfig& cfg,
                double lambda_scale = 1.0);

struct SandwichCheck {
  bool applicable = false;
  double M_TZ = 0.0;
  double M_SG = 0.0;
  double lower_gap = 0.0;  // E(|SG| - |TZ|), paired
  double lower_stderr = 0.0;
  double upper_gap = 0.0;  // E(|SG| - (1 + 1/log n)|TZ|), paired
  double upper_stderr = 0.0;
  bool lower_ok = false;
  bool upper_ok = false;
  bool passed = false;
};

/// E|TZ| <= E|SG| <= (1 + 1/log n) E|TZ| within 3 stderr, with Z = W_sigma^T G (paired samples).
SandwichCheck lift_mean_sandwich_check(const NormPtr& Y, const Matrix& W_sigma, const Lift& lift,
                                       const SampleConfig& cfg);

/// Balancing settings used by the positions below: L1 partials, residual target 0.25.
BalanceOptions position_balance_options();

struct PipelineOptions {
  double delta = 0.2;
  double min_ratio = 0.5;
  double john_tol = 1e-4;
  double lambda_scale = 1.0;  // diagnostic: scales the lift coefficient
  BalanceOptions balance = position_balance_options();
  std::vector<double> t_grid = linear_grid(0.05, 2.0, 40);
  bool run_tail = true;
};

struct PipelineReport {
  bool ok = false;
  std::string failure_stage;  // empty when ok
  std::string failure_message;
  Branch branch = Branch::euclidean;
  Index n = 0;
  double delta = 0.0;
  double threshold = 0.0;  // n^(1/2 - delta)
  double k_measured = 0.0;
  double k_stderr = 0.0;
  JohnResult john;
  NormPtr positioned;  // X o A
  ConcStats stats;     // of the positioned norm

  // cube branch
  DRBasis dr;
  JohnsonBasis johnson;
  CubeEmbeddingCertificate cube;
  Matrix W_sigma;
  bool smoothed = false;
  BalancedDiagonal balance;
  Vector Lambda;
  Lift lift;

  Matrix S;      // in positioned coordinates
  Matrix T_total;  // A S, acting on the original coordinates
  NormPtr final_norm;  // X o A o S
  TailCurve tail;
  TwoLevelFit fit;
};

/// Dichotomy: euclidean when k + 3 se(k) >= n^(1/2 - delta), otherwise the cube route with a lift.
/// Failures are reported in the returned report; no stage falls back silently.
PipelineReport good_position(const NormPtr& X, const SampleConfig& cfg, const PipelineOptions& opts = {});

/// Sandwich check for a pipeline report (not applicable on the euclidean branch).
SandwichCheck lift_mean_sandwich_check(const PipelineReport& report, const SampleConfig& cfg);

struct RudPosition {
  Matrix T;  // basis Lambda
  Vector Lambda;
  RudEstimate rud;
  bool smoothed = false;
  BalancedDiagonal balance;
  ConcStats stats;  // of X o T
  double k_lambda = 0.0;
  double bound_value = 0.0;  // k log(e + n / (L^2 k))
  TailCurve tail;
};

/// Balances X in the given basis (smoothing polytopal norms first) and measures the tail of X o T.
RudPosition rud_position(const NormPtr& X, const Matrix& basis, const SampleConfig& cfg,
                         const std::vector<double>& t_grid = linear_grid(0.05, 2.0, 40),
                         const BalanceOptions& opts = position_balance_options());

}  // namespace concpos
