#pragma once

#include "concpos/norm.hpp"
#include "concpos/rng.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace concpos {

struct SampleConfig {
  std::uint64_t seed = 0;
  std::int64_t n_samples = 100000;
  double confidence = 0.99;
  int workers = 0;          // <= 0: default_workers()
  std::uint32_t stream = 0;  // base stream; estimators add fixed offsets from `streams`
};

struct MeanVar {
  double M = 0.0;
  double var = 0.0;
  double stderr_M = 0.0;
  double stderr_var = 0.0;
  std::int64_t n = 0;
};

MeanVar estimate_mean_var(const Norm& X, const SampleConfig& cfg);

struct TailCurve {
  Index dim = 0;
  std::int64_t n_samples = 0;
  double confidence = 0.99;
  double center = 0.0;  // the mean M the deviations are measured against
  std::vector<double> t;
  std::vector<std::int64_t> count;
  std::vector<double> p_hat;
  std::vector<double> ci_lo;
  std::vector<double> ci_hi;
  std::map<std::string, std::vector<double>> refs;
};

/// n evenly spaced points from lo to hi inclusive.
std::vector<double> linear_grid(double lo, double hi, int steps);

/// Two-pass estimate of P(|X(G) - M| > t M): the mean comes from the base stream and
/// the exceedance counts from a disjoint stream.
TailCurve estimate_tail(const Norm& X, const SampleConfig& cfg, const std::vector<double>& t_grid);

/// Same with a caller-supplied center M.
TailCurve estimate_tail_with_center(const Norm& X, const SampleConfig& cfg, const std::vector<double>& t_grid,
                                    double center);

/// Builds a curve from exceedance counts (fills p_hat and Clopper-Pearson intervals).
TailCurve tail_from_counts(Index dim, std::int64_t n_samples, double confidence, double center,
                           const std::vector<double>& t_grid, const std::vector<std::int64_t>& counts);

struct PartialDerivStats {
  Vector l1;  // E|d_i f|
  Vector l2;  // (E (d_i f)^2)^(1/2)
  Vector l1_stderr;
  Vector l2_stderr;
  double A = 0.0;  // max_i l1
  double grad_sq_mean = 0.0;  // E |grad f|_2^2
  double grad_sq_stderr = 0.0;
  double grad_l1_mean = 0.0;  // E |grad f|_1
  double euler_mean = 0.0;    // E <grad f(G), G>
  double euler_stderr = 0.0;
  std::int64_t n = 0;
};

PartialDerivStats estimate_partial_norms(const Norm& X, const SampleConfig& cfg);

struct Extremum {
  double value = 0.0;
  Vector argmax;
  bool exact = false;
};

/// Fixed-point ascent v <- grad(v)/|grad(v)|_2 on the Euclidean sphere; v is updated in place.
/// The value sequence is nondecreasing for any norm.
double sphere_ascent(const Norm& X, Vector& v, int max_iter = 2000);

/// b = max of X on the Euclidean sphere. Exact for polytopal norms, else a certified lower bound.
Extremum estimate_b(const Norm& X, int restarts = 32, std::uint64_t seed = 0);

/// a = max of X on the cube [-1,1]^n. Exact for polytopal norms and n <= 20.
Extremum estimate_a(const Norm& X, int budget = 64, std::uint64_t seed = 0);

struct ConcStats {
  Index n = 0;
  std::int64_t samples = 0;
  double M = 0.0;
  double var = 0.0;
  double stderr_M = 0.0;
  double stderr_var = 0.0;
  double b = 0.0;
  bool b_exact = false;
  double a = 0.0;
  bool a_exact = false;
  double k = 0.0;
  double stderr_k = 0.0;
  double beta = 0.0;
  double stderr_beta = 0.0;
  double sc_ratio = 0.0;  // var / E|grad f|_2^2
  double R = 0.0;         // E|grad f|_2^2 / sum_i (E|d_i f|)^2
  double A = 0.0;
  double euler_mean = 0.0;
  double euler_stderr = 0.0;
  PartialDerivStats partials;
};

ConcStats conc_stats(const Norm& X, const SampleConfig& cfg, int b_restarts = 32, int a_budget = 64);

enum class BoundId { gauss, two_level, perm, uncond };

std::string to_string(BoundId id);
BoundId bound_id_from_string(const std::string& s);

struct BoundParams {
  double b = 1.0;
  double a = 1.0;
  double A = 1.0;
  double M = 1.0;
  Index n = 1;
};

struct BoundReport {
  BoundId id = BoundId::gauss;
  bool gauss_fallback = false;  // perm form degenerated to the Gaussian one
  std::vector<double> t;
  std::vector<double> phi;        // exponent shape, the reference is C exp(-c phi)
  std::vector<double> reference;  // explicit constants for gauss, fitted constants otherwise
  std::vector<double> margin;     // ci_lo - reference
  double C_fit = 0.0;
  double c_fit = 0.0;
  double fit_r2 = 0.0;
  std::size_t fit_points = 0;
  double c_envelope = 0.0;  // largest c with C_ref exp(-c phi) >= ci_lo on the grid
  double C_ref = 2.0;
  bool passed = false;
};

/// Minimum exceedance count for a grid point to enter a constant fit.
inline constexpr std::int64_t kMinFitCount = 50;

BoundReport check_deviation_bound(const TailCurve& tail, const BoundParams& params, BoundId id);

}  // namespace concpos
