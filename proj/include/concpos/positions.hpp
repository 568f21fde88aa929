#pragma once

#include "concpos/gauss_mc.hpp"
#include "concpos/norm.hpp"

#include <vector>

namespace concpos {

struct Ellipsoid {
  Matrix A;  // symmetric positive definite; the ellipsoid is A B_2^n
  double logdet = 0.0;
};

struct JohnCertificate {
  double containment_gap = 0.0;          // b(X o A) - 1
  double decomposition_residual = 0.0;   // |sum c_j u_j u_j^T - I|_F
  int n_contacts = 0;
  Matrix contacts;  // unit contact directions of X o A, one per column
  Vector weights;   // c_j >= 0
  bool complete = false;  // at least n contacts found
};

/// Minimum-volume centered ellipsoid {y : y^T Q^{-1} y <= 1} containing the rows of P and their negatives.
struct EnclosingEllipsoid {
  Vector weights;  // on the rows of P, summing to 1; Q = n sum_j w_j p_j p_j^T
  Matrix Q;
  int iterations = 0;
  double eps = 0.0;  // achieved max_j p_j^T Q^{-1} p_j - 1
  bool converged = false;
};

/// Wolfe-Atwood iteration with away steps.
EnclosingEllipsoid min_volume_enclosing(const Matrix& P, double eps = 1e-10, int max_iter = 200000);

struct JohnResult {
  Ellipsoid ellipsoid;
  JohnCertificate certificate;
  bool certified = false;  // containment gap of the relaxation reached tol
  int rounds = 0;
  std::vector<double> logdet_history;  // best feasible logdet after each round (nondecreasing)
  double relaxation_logdet = 0.0;      // upper bound on the optimal logdet
  Matrix dual_points;                  // working set of supporting functionals, one per row
};

/// Maximum-volume centered ellipsoid inside the unit ball of X by cutting planes over supporting
/// functionals. X o A is returned with (approximately) the Euclidean ball as its John ellipsoid.
JohnResult john_position(const NormPtr& X, double tol = 1e-4, int max_rounds = 400, std::uint64_t seed = 0);

/// Detects contact directions of X o A by multistart ascent and fits nonnegative weights.
JohnCertificate john_decomposition(const NormPtr& X, const Matrix& A, int n_probes = 64, double tol = 1e-4,
                                   std::uint64_t seed = 0);

struct IsotropyReport {
  Matrix C;  // E[grad f(G) G^T]
  double M = 0.0;
  double stderr_M = 0.0;
  double residual = 0.0;       // |C - (M/n) I|_op / (M/n)
  double matrix_stderr = 0.0;  // Frobenius norm of the entrywise standard errors
  double trace = 0.0;
  double trace_stderr = 0.0;
};

IsotropyReport isotropy_residual(const Norm& X, const SampleConfig& cfg);

struct MinimalMOptions {
  int steps = 2000;
  int batch = 256;
  double lr0 = 0.2;
  double decay = 0.0;  // lr_k = lr0 / (1 + k / decay); <= 0 means steps / 10
  double average_fraction = 0.5;
  Matrix T0;  // starting position; empty means identity
};

struct MinimalMResult {
  Matrix T;
  double det = 1.0;
  double M_start = 0.0;
  double M_start_stderr = 0.0;
  double M_final = 0.0;
  double M_final_stderr = 0.0;
  double isotropy_residual = 0.0;
  double matrix_stderr = 0.0;
  Matrix C;
  std::vector<double> batch_means;
  std::vector<double> batch_stderr;
};

/// Stochastic minimization of E|TG| over det T = 1. Throws ConvergenceError when a batch
/// mean exceeds ten times the starting value.
MinimalMResult minimal_m_position(const NormPtr& X, const SampleConfig& cfg, const MinimalMOptions& opts = {});

/// Symmetric inverse square root of a positive-definite matrix.
Matrix inverse_sqrt_spd(const Matrix& Q);

}  // namespace concpos
