#pragma once

#include "concpos/gauss_mc.hpp"

#include <string>
#include <vector>

namespace concpos {

struct RademacherMean {
  double value = 0.0;
  double stderr_value = 0.0;
  bool exact = false;
};

/// E_eps |sum_i eps_i x_i| over the columns x_i of V. Exact for at most 16 columns.
RademacherMean rademacher_mean(const Norm& X, const Matrix& V, const SampleConfig& cfg);

struct SignMax {
  double value = 0.0;
  Vector signs;
  bool exact = false;
};

/// max_eps |sum_i eps_i x_i|. Exact for at most 16 columns, otherwise sign iteration plus
/// single-flip local search from `warm` (if given) and random restarts.
SignMax sign_max(const Norm& X, const Matrix& V, int restarts = 8, std::uint64_t seed = 0, const Vector* warm = nullptr);

struct FaceOptions {
  int starts = 8;
  int steps = 500;
  double tol = 1e-6;
  bool polish = true;  // coordinate golden-section refinement of non-certified minima
  std::uint64_t seed = 0;
};

struct FaceMinimum {
  double value = 0.0;
  Vector coeffs;  // coefficients over the columns, coeffs[fixed] = 1, others in [-1,1]
  Vector subgradient;
  bool certified = false;  // projected subgradient vanished: a KKT point of the convex problem
};

/// min |V c| over c in [-1,1]^s with c[fixed] = 1.
FaceMinimum face_minimum(const Norm& X, const Matrix& V, Index fixed, const FaceOptions& opts = {},
                         const Vector* warm = nullptr);

struct CubeBounds {
  double c_low = 0.0;
  double c_up = 0.0;
  bool c_up_exact = false;
  bool c_low_certified = false;
};

/// c_low |alpha|_inf <= |sum_{i in sigma} alpha_i x_i| <= c_up |alpha|_inf with x_i the columns of V.
CubeBounds verify_cube_equivalence(const Norm& X, const std::vector<Index>& sigma, const Matrix& V,
                                   const FaceOptions& opts = {});

struct CubeEmbeddingCertificate {
  std::vector<Index> sigma;
  double c_low = 0.0;
  double c_up = 0.0;
  bool c_up_exact = false;
  bool c_low_certified = false;
  double M_n = 0.0;
  double M_n_stderr = 0.0;
  bool M_n_exact = false;
  double min_norm = 0.0;    // min_i |x_i| over all input vectors
  double threshold = 0.0;   // acceptance level for c_low
  std::vector<double> c_low_history;
  std::vector<double> c_up_history;
  int rejected_upper = 0;   // candidates refused because c_up would exceed 4 M_n
  bool upper_ok = false;    // c_up <= 4 M_n + 1e-6
  bool banach_mazur_ok = false;  // c_up / c_low <= 32 M_n
  std::vector<std::string> notes;
};

/// Greedy growth of sigma keeping the verified c_low >= min_ratio * min_i |x_i|.
/// Requires |x_i| >= 1 for every column (throws InvalidArgument otherwise).
CubeEmbeddingCertificate find_linf_subset(const Norm& X, const Matrix& V, double min_ratio, const SampleConfig& cfg,
                                          const FaceOptions& opts = {});

struct RudEstimate {
  double L_hat = 1.0;
  int n_probes = 0;
  Vector best_probe;
  bool exact = false;  // sign max and sign mean both enumerated
};

/// Sign samples per probe for the Monte Carlo sign mean in estimate_rud (capped at cfg.n_samples).
inline constexpr std::int64_t kRudSignSamples = 20000;

/// Lower estimate of max_y sup_eps |sum eps_i y_i b_i| / E_eps |sum eps_i y_i b_i| over probes y.
RudEstimate estimate_rud(const Norm& X, const Matrix& B, const SampleConfig& cfg, int n_probes = 32);

}  // namespace concpos
