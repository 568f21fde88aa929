#pragma once

#include "concpos/gauss_mc.hpp"

namespace concpos {

struct DiagonalPartials {
  Vector rho;     // |d_i (f o Lambda)|_{L_q} = lambda_i |(d_i f) o Lambda|_{L_q}
  Vector raw;     // |(d_i f) o Lambda|_{L_q}
  Vector stderr_rho;
  std::int64_t n = 0;
};

/// L_q norms (q in {1,2}) of the partial derivatives of f o diag(lambda) under the Gaussian measure.
DiagonalPartials diagonal_partials(const Norm& f, const Vector& lambda, int q, const SampleConfig& cfg);

struct BalanceOptions {
  int q = 2;
  double target_residual = 0.02;
  int max_iters = 200;
  double damping = 0.5;
  Vector lambda0;                   // empty: uniform
  std::int64_t check_samples = 0;   // <= 0: four times the iteration block
  int max_block_doublings = 3;
};

struct BalancedDiagonal {
  Vector lambda;  // unit Euclidean norm, entries >= 0
  int q = 2;
  Vector rho;     // on the fresh check block
  Vector rho_stderr;
  double residual = 0.0;            // (max rho - min rho) / mean rho on the check block
  double in_sample_residual = 0.0;  // same on the iteration block
  int iterations = 0;
  std::int64_t block_samples = 0;
  bool converged = false;
};

/// Fixed-point balancing lambda_i <- lambda_i (mean rho / rho_i)^eta with common random numbers; eta starts
/// at the damping and is halved whenever a step raises the in-sample residual.
/// Throws DegenerateDirectionError when some lambda_i collapses below 1e-8 with rho_i not rising.
BalancedDiagonal balance_partials(const NormPtr& f, const SampleConfig& cfg, const BalanceOptions& opts = {});

struct BalanceCheck {
  double ratio = 0.0;  // max_j m |d_j(f o Lambda)|_{L1} / a(f o Lambda)
  double ratio_stderr = 0.0;
  double a = 0.0;
  bool a_exact = false;
  double mean_l1 = 0.0;  // (1/m) sum_j |d_j(f o Lambda)|_{L1}
  double mean_l1_stderr = 0.0;
  double bound = 0.0;    // 1 + residual + 3 stderr
  bool passed = false;
  bool averaging_ok = false;  // mean_l1 <= a/m within 3 stderr
};

BalanceCheck verify_balanced(const NormPtr& f, const Vector& lambda, const SampleConfig& cfg, double residual = 0.0,
                             int a_budget = 64);

}  // namespace concpos
