#include "concpos/balancing.hpp"
#include "concpos/rng.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace concpos;

namespace {

SampleConfig config(std::int64_t n, std::uint64_t seed = 1) {
  SampleConfig c;
  c.seed = seed;
  c.n_samples = n;
  c.workers = 1;
  return c;
}

// f(x) = smoothed max(|x1|, |2 x2|), written out by hand: (|x1|^p + |2 x2|^p)^(1/p).
struct TwoDimSmoothed {
  double p;
  double rho(int i, double l1, double l2) const {
    return oracle::circle_average([&](double c, double s) {
      const double y1 = std::abs(l1 * c), y2 = std::abs(2 * l2 * s);
      const double m = std::max(y1, y2);
      const double r1 = y1 / m, r2 = y2 / m;
      const double S = std::pow(r1, p) + std::pow(r2, p);
      const double d = (i == 0 ? std::pow(r1, p - 1) * l1 : 2 * std::pow(r2, p - 1) * l2);
      return d * std::pow(S, -(p - 1) / p);
    }, 20000);
  }
};

}  // namespace

TEST(Balance, ExchangeableNormsGiveUniformLambda) {
  for (double p : {1.0, 2.0, 4.0}) {
    SCOPED_TRACE(p);
    BalanceOptions o;
    o.q = 2;
    o.target_residual = 0.01;
    const BalancedDiagonal r = balance_partials(make_lp_norm(8, p), config(20000), o);
    ASSERT_TRUE(r.converged);
    EXPECT_LE(r.residual, 0.01);
    EXPECT_NEAR(r.lambda.norm(), 1.0, 1e-10);
    for (Index i = 0; i < 8; ++i) EXPECT_NEAR(r.lambda[i] * std::sqrt(8.0), 1.0, 0.02);
  }
}

TEST(Balance, WeightedTwoDimMatchesQuadrature) {
  Matrix U(2, 2);
  U << 1, 0, 0, 2;
  const NormPtr f = smooth(make_polytope_norm(U), 0.2);
  const TwoDimSmoothed ref{*smoothing_exponent(*f)};
  // Bisection on the circle for rho_1 = rho_2 with lambda on the unit circle.
  double lo = 0.05, hi = 1.5;
  for (int it = 0; it < 60; ++it) {
    const double th = 0.5 * (lo + hi);
    (ref.rho(0, std::cos(th), std::sin(th)) > ref.rho(1, std::cos(th), std::sin(th)) ? lo : hi) = th;
  }
  const double th = 0.5 * (lo + hi);
  for (int q : {1, 2}) {
    SCOPED_TRACE(q);
    BalanceOptions o;
    o.q = q;
    o.target_residual = 0.02;
    const BalancedDiagonal r = balance_partials(f, config(50000), o);
    ASSERT_TRUE(r.converged);
    EXPECT_LE(r.residual, 0.02);
    EXPECT_LT(r.lambda[1], r.lambda[0]);
    if (q == 1) {
      EXPECT_NEAR(r.lambda[0], std::cos(th), 0.01);
      EXPECT_NEAR(r.lambda[1], std::sin(th), 0.01);
    }
  }
  EXPECT_NEAR(std::tan(th), 0.5, 1e-6);
}

TEST(Balance, DegenerateDirection) {
  const NormPtr f = make_custom_norm(
      2, [](VecRef x) { return std::abs(x[0]); },
      [](VecRef x, VecOut g) {
        g[0] = x[0] >= 0 ? 1.0 : -1.0;
        g[1] = 0.0;
      },
      "abs_x1");
  EXPECT_THROW(balance_partials(f, config(5000)), DegenerateDirectionError);
}

TEST(Balance, NegativeStartGivesNonnegativeLambda) {
  BalanceOptions o;
  o.q = 1;
  o.target_residual = 0.05;
  o.lambda0 = -Vector::LinSpaced(4, 1, 2);
  const BalancedDiagonal r = balance_partials(make_weighted_sup_norm(Vector::LinSpaced(4, 1, 2)),
                                              config(20000), o);
  for (Index i = 0; i < 4; ++i) EXPECT_GE(r.lambda[i], 0.0);
  EXPECT_NEAR(r.lambda.norm(), 1.0, 1e-10);
}

TEST(Balance, ChainRuleIdentity) {
  const NormPtr f = make_lp_norm(5, 3);
  const Vector lam = Vector::LinSpaced(5, 0.5, 2.0);
  for (int q : {1, 2}) {
    const DiagonalPartials d = diagonal_partials(*f, lam, q, config(50000, 3));
    const NormPtr composed = compose_linear(f, lam.asDiagonal().toDenseMatrix());
    // Same Gaussian sample: the chain rule holds draw by draw.
    const PartialDerivStats same = estimate_partial_norms(*composed, config(50000, 3));
    // Independent sample: 10 comparisons, two-sided family-wise level 0.0027.
    const PartialDerivStats s = estimate_partial_norms(*composed, config(50000, 4));
    const double z = normal_quantile(1 - 0.0027 / 20);
    for (Index i = 0; i < 5; ++i) {
      EXPECT_NEAR(d.rho[i], q == 1 ? same.l1[i] : same.l2[i], 1e-10 * d.rho[i]);
      const double other = q == 1 ? s.l1[i] : s.l2[i];
      const double se = q == 1 ? s.l1_stderr[i] : s.l2_stderr[i];
      EXPECT_NEAR(d.rho[i], other, z * std::hypot(d.stderr_rho[i], se));
      EXPECT_NEAR(d.rho[i], lam[i] * d.raw[i], 1e-12 * d.rho[i]);
    }
  }
}

TEST(VerifyBalanced, CrossPolytopeIsEqualityCase) {
  const Vector lam = Vector::Constant(6, 1 / std::sqrt(6.0));
  const BalanceCheck c = verify_balanced(make_lp_norm(6, 1), lam, config(10000));
  EXPECT_NEAR(c.ratio, 1.0, 1e-12);
  EXPECT_TRUE(c.passed);
}

TEST(VerifyBalanced, EuclideanAndSmoothedCube) {
  const Vector lam = Vector::Constant(8, 1 / std::sqrt(8.0));
  const BalanceCheck e = verify_balanced(make_lp_norm(8, 2), lam, config(100000));
  EXPECT_LE(e.ratio, 1.05);
  EXPECT_TRUE(e.passed);
  const NormPtr s = smooth(make_linf_norm(8), default_smoothing_delta(8));
  BalanceOptions o;
  o.q = 1;
  o.target_residual = 0.02;
  const BalancedDiagonal b = balance_partials(s, config(50000), o);
  ASSERT_TRUE(b.converged);
  const BalanceCheck c = verify_balanced(s, b.lambda, config(200000, 9), b.residual);
  EXPECT_LE(c.ratio, 1.05);
}

TEST(VerifyBalanced, AveragingBoundForAnyDiagonal) {
  const NormPtr f = make_lp_norm(6, 1.5);
  for (int trial = 0; trial < 3; ++trial) {
    const Vector lam = (Vector::LinSpaced(6, 0.2, 1.0).array() + 0.3 * trial).matrix().normalized();
    EXPECT_TRUE(verify_balanced(f, lam, config(20000, trial)).averaging_ok);
  }
}
