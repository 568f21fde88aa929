#pragma once

#include "concpos/gauss_mc.hpp"
#include "concpos/positions.hpp"
#include "concpos/stats.hpp"

#include <limits>
#include <vector>

namespace concpos {

struct SubspaceBasis {
  Matrix E;  // n x k with orthonormal columns
  std::uint64_t seed = 0;
};

/// Orthonormalized Gaussian n x k matrix; the column span is Haar distributed.
SubspaceBasis sample_subspace(Index n, Index k, std::uint64_t seed);

struct SphericalityOptions {
  int max_starts = 16;   // random starts for the maximum (plus coordinate starts)
  int min_starts = 32;   // random starts for the minimum (plus +-coordinate starts)
  int min_steps = 200;
  double abort_ratio = std::numeric_limits<double>::infinity();  // stop once max/min exceeds this
  std::uint64_t seed = 0;
};

struct SphericalityReport {
  double max_val = 0.0;  // certified lower bound on the maximum
  double min_val = 0.0;  // best value found for the minimum
  double ratio = 1.0;
  double spherical_eps = 0.0;  // ratio = (1+eps)/(1-eps)
  Vector argmax;
  Vector argmin;
  bool aborted = false;
};

double eps_from_ratio(double ratio);
double ratio_from_eps(double eps);

/// Extrema over the unit sphere of R^k of alpha -> X(E alpha).
SphericalityReport sphericality(const NormPtr& X, const Matrix& E, const SphericalityOptions& opts = {});

struct KrTrial {
  Index k = 0;
  int trials_run = 0;
  int successes = 0;
  int required = 0;  // ceil(2 trials / 3)
  bool pass = false;
  Interval ci;       // 95% Clopper-Pearson interval of the success rate on the trials run
  bool decisive = false;  // the interval excludes 2/3
};

/// Success count of (1+eps)-sphericality over `trials` Haar subspaces of dimension k.
/// Trial i uses the subspace seeded by (seed, k, i); stops once the 2/3 decision is determined.
KrTrial kr_trial(const NormPtr& X, Index k, double eps, int trials, std::uint64_t seed,
                 const SphericalityOptions& opts = {}, int workers = 0);

struct KrEstimate {
  Index k = 1;
  std::vector<KrTrial> evaluated;  // in evaluation order
};

/// Largest k passing the 2/3 rule, by binary search assuming monotone success in k.
KrEstimate estimate_kr(const NormPtr& X, double eps, int trials, std::uint64_t seed,
                       const SphericalityOptions& opts = {}, int workers = 0);

struct DRBasis {
  Matrix V;      // orthonormal columns, sorted by nonincreasing norm
  Vector norms;  // positioned norm of each column
  double worst_margin = 0.0;  // min_k |v_k| - sqrt(1 - (k-1)/n)
};

struct DROptions {
  double tol = 1e-4;
  int random_starts = 8;
  int ascents_per_step = 8;
  std::uint64_t seed = 0;
};

/// Sequential maxima of the positioned norm Y on spheres of successive orthogonal complements.
/// `contacts` (columns) are John contact directions of Y; when empty they are detected.
/// Throws CertificateError when |v_k| < sqrt(1 - (k-1)/n) - 5 tol.
DRBasis dr_basis_positioned(const NormPtr& Y, const Matrix& contacts, const DROptions& opts = {});

/// Positions X by the John ellipsoid (Y = X o A) and builds the basis for Y.
DRBasis dr_basis(const NormPtr& X, const Ellipsoid& john, const DROptions& opts = {});
DRBasis dr_basis(const NormPtr& X, const JohnResult& john, const DROptions& opts = {});

struct JohnsonBasis {
  Matrix W;
  Vector norms;
  std::vector<std::pair<Index, Index>> combined;  // 0-based index pairs that were rotated together
};

/// Pairs u_{s-i+1} with u_{s+i} (u_{s+1+i} for odd n, keeping the middle vector) and replaces each
/// pair by (u +- u')/sqrt(2) when |u'| < 1/4.
JohnsonBasis johnson_fix(const DRBasis& basis, const Norm& X_positioned);

}  // namespace concpos
