#include "concpos/gauss_mc.hpp"
#include "concpos/stats.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace concpos;

namespace {

SampleConfig config(std::int64_t n, std::uint64_t seed = 1, int workers = 1) {
  SampleConfig c;
  c.seed = seed;
  c.n_samples = n;
  c.workers = workers;
  return c;
}

}  // namespace

TEST(MeanVar, MatchesClosedForms) {
  const MeanVar l1 = estimate_mean_var(*make_lp_norm(64, 1), config(100000));
  EXPECT_NEAR(l1.M, oracle::l1_mean(64), 3 * l1.stderr_M);
  const MeanVar l2 = estimate_mean_var(*make_lp_norm(64, 2), config(100000));
  EXPECT_NEAR(l2.M, oracle::chi_mean(64), 3 * l2.stderr_M);
  EXPECT_NEAR(l2.var, 64 - std::pow(oracle::chi_mean(64), 2), 3 * l2.stderr_var);
  const MeanVar li = estimate_mean_var(*make_linf_norm(16), config(100000));
  EXPECT_NEAR(li.M, oracle::linf_mean(16), 3 * li.stderr_M);
  EXPECT_NEAR(li.var, oracle::linf_second_moment(16) - std::pow(oracle::linf_mean(16), 2), 3 * li.stderr_var);
}

TEST(MeanVar, BitIdenticalAcrossWorkers) {
  const NormPtr X = make_lp_norm(20, 3);
  const MeanVar a = estimate_mean_var(*X, config(30000, 4, 1));
  const MeanVar b = estimate_mean_var(*X, config(30000, 4, 3));
  EXPECT_EQ(a.M, b.M);
  EXPECT_EQ(a.var, b.var);
  EXPECT_EQ(a.stderr_var, b.stderr_var);
  const ConcStats s1 = conc_stats(*X, config(20000, 4, 1));
  const ConcStats s2 = conc_stats(*X, config(20000, 4, 4));
  EXPECT_EQ(s1.k, s2.k);
  EXPECT_EQ(s1.R, s2.R);
  EXPECT_EQ(s1.partials.l1, s2.partials.l1);
}

TEST(Tail, InvariantsAndZeroCount) {
  const TailCurve t = estimate_tail(*make_lp_norm(32, 2), config(20000), linear_grid(0.05, 3, 30));
  for (std::size_t i = 0; i < t.t.size(); ++i) {
    EXPECT_LE(t.ci_lo[i], t.p_hat[i]);
    EXPECT_LE(t.p_hat[i], t.ci_hi[i]);
    if (i > 0) EXPECT_LE(t.p_hat[i], t.p_hat[i - 1]);
  }
  EXPECT_EQ(t.count.back(), 0);
  EXPECT_EQ(t.p_hat.back(), 0.0);
  EXPECT_NEAR(t.ci_hi.back(), 1.0 - std::pow(1.0 - t.confidence, 1.0 / 20000.0), 1e-15);
}

TEST(Tail, RejectsUnsortedGrid) {
  EXPECT_THROW(estimate_tail(*make_lp_norm(4, 2), config(2000), {0.2, 0.1}), InvalidArgument);
}

TEST(Tail, Euclidean256BelowGaussBound) {
  const TailCurve t = estimate_tail(*make_lp_norm(256, 2), config(100000), {0.2});
  EXPECT_LE(t.ci_lo[0], 2 * std::exp(-0.5 * 0.04 * 256));
}

TEST(Tail, SupNormLogLinearOnMidRange) {
  const TailCurve t = estimate_tail(*make_linf_norm(1024), config(100000), linear_grid(0.3, 1.0, 15));
  std::vector<double> x, y;
  for (std::size_t i = 0; i < t.t.size(); ++i) {
    if (t.count[i] < kMinFitCount) continue;
    x.push_back(t.t[i]);
    y.push_back(std::log(t.p_hat[i]));
  }
  ASSERT_GE(x.size(), 4u);
  EXPECT_GE(fit_line(x, y).r2, 0.9);
}

TEST(Partials, SymmetricNorms) {
  const PartialDerivStats l2 = estimate_partial_norms(*make_lp_norm(6, 2), config(50000));
  for (Index i = 0; i < 6; ++i) EXPECT_NEAR(l2.l2[i] * l2.l2[i], 1.0 / 6.0, 6 * l2.l2[i] * l2.l2_stderr[i]);
  const PartialDerivStats l1 = estimate_partial_norms(*make_lp_norm(5, 1), config(10000));
  for (Index i = 0; i < 5; ++i) {
    EXPECT_DOUBLE_EQ(l1.l1[i], 1.0);
    EXPECT_DOUBLE_EQ(l1.l2[i], 1.0);
  }
  const PartialDerivStats li = estimate_partial_norms(*make_linf_norm(8), config(80000));
  for (Index i = 0; i < 8; ++i) EXPECT_NEAR(li.l1[i], 0.125, 3 * li.l1_stderr[i]);
}

TEST(Partials, CauchySchwarzAndCubeBound) {
  for (const NormPtr& X : {make_lp_norm(7, 3), make_linf_norm(7), make_weighted_sup_norm(Vector::LinSpaced(7, 1, 2))}) {
    const PartialDerivStats s = estimate_partial_norms(*X, config(20000));
    for (Index i = 0; i < 7; ++i) EXPECT_LE(s.l1[i], s.l2[i] * (1 + 1e-12));
    const Extremum a = estimate_a(*X);
    EXPECT_LE(s.l1.sum(), a.value * (1 + 1e-9));
    EXPECT_DOUBLE_EQ(s.A, s.l1.maxCoeff());
  }
}

TEST(Extrema, LipschitzConstants) {
  const Extremum bi = estimate_b(*make_linf_norm(9));
  EXPECT_DOUBLE_EQ(bi.value, 1.0);
  EXPECT_TRUE(bi.exact);
  EXPECT_NEAR(estimate_b(*make_lp_norm(9, 1)).value, 3.0, 1e-6);
  EXPECT_NEAR(estimate_b(*make_lp_norm(9, 2)).value, 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(estimate_a(*make_linf_norm(9)).value, 1.0);
  EXPECT_DOUBLE_EQ(estimate_a(*make_lp_norm(9, 1)).value, 9.0);
  EXPECT_NEAR(estimate_a(*make_lp_norm(9, 2)).value, 3.0, 1e-12);
  EXPECT_NEAR(estimate_a(*make_lp_norm(30, 1)).value, 30.0, 1e-12);
}

TEST(ConcStats, CriticalDimensions) {
  const ConcStats l1 = conc_stats(*make_lp_norm(64, 1), config(100000));
  EXPECT_NEAR(l1.k, 2 * 64 / std::numbers::pi, 0.05 * 2 * 64 / std::numbers::pi);
  const ConcStats li = conc_stats(*make_linf_norm(256), config(100000));
  const double ref = std::pow(oracle::linf_mean(256), 2);
  EXPECT_NEAR(li.k, ref, 0.15 * ref);
  const ConcStats l2 = conc_stats(*make_lp_norm(32, 2), config(100000));
  const double mu = oracle::chi_mean(32);
  EXPECT_NEAR(l2.beta, (32 - mu * mu) / (mu * mu), 3 * l2.stderr_beta);
}

TEST(ConcStats, GeneralInvariants) {
  for (const NormPtr& X : {make_lp_norm(12, 1.5), make_linf_norm(12), compose_linear(make_lp_norm(12, 4), Matrix::Identity(12, 12) * 2)}) {
    const ConcStats s = conc_stats(*X, config(30000));
    EXPECT_LE(s.k, 12 * (1 + 3 * s.stderr_M / s.M));
    EXPECT_GE(s.k, 0.5);
    EXPECT_GE(s.beta, 0.0);
    EXPECT_GT(s.R, 0.0);
    EXPECT_NEAR(s.euler_mean, s.M, 3 * s.euler_stderr + 1e-9 * s.M);
  }
}

TEST(ConcStats, UnconditionalLowerBound) {
  for (const NormPtr& X : {make_lp_norm(10, 1), make_linf_norm(10), make_weighted_sup_norm(Vector::LinSpaced(10, 0.5, 3))}) {
    const ConcStats s = conc_stats(*X, config(50000));
    EXPECT_GE(s.M, std::sqrt(2 / std::numbers::pi) * s.a * (1 - 3 * s.stderr_M / s.M));
  }
}

TEST(DeviationBound, GaussPassesOnEuclidean) {
  const NormPtr X = make_lp_norm(256, 2);
  const TailCurve t = estimate_tail(*X, config(100000), linear_grid(0.02, 0.5, 25));
  BoundParams p;
  p.b = 1;
  p.M = t.center;
  p.n = 256;
  const BoundReport r = check_deviation_bound(t, p, BoundId::gauss);
  EXPECT_TRUE(r.passed);
  for (double m : r.margin) EXPECT_LE(m, 0.0);
}

TEST(DeviationBound, PermDegeneratesToGauss) {
  const NormPtr X = make_lp_norm(64, 1);
  const TailCurve t = estimate_tail(*X, config(20000), linear_grid(0.01, 0.3, 20));
  BoundParams p;
  p.b = 8;
  p.a = 64;
  p.M = t.center;
  p.n = 64;
  EXPECT_TRUE(check_deviation_bound(t, p, BoundId::perm).gauss_fallback);
}

TEST(DeviationBound, TwoLevelShapeOnSupNorm) {
  const NormPtr X = make_linf_norm(1024);
  const TailCurve t = estimate_tail(*X, config(100000), linear_grid(0.3, 1.0, 15));
  BoundParams p;
  p.b = 1;
  p.a = 1;
  p.A = 1.0 / 1024;
  p.M = t.center;
  p.n = 1024;
  const BoundReport r = check_deviation_bound(t, p, BoundId::two_level);
  EXPECT_GT(r.c_fit, 0.0);
  EXPECT_GE(r.fit_r2, 0.9);
  EXPECT_THROW(check_deviation_bound(t, BoundParams{1, 1, 1, 1, 7}, BoundId::gauss), InvalidArgument);
}
