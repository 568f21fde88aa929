#include "concpos/parallel.hpp"
#include "concpos/rng.hpp"
#include "concpos/stats.hpp"

#include <gtest/gtest.h>

#include <boost/math/distributions/normal.hpp>

#include <cmath>
#include <set>

using namespace concpos;

TEST(Philox, KnownAnswers) {
  using A4 = std::array<std::uint32_t, 4>;
  EXPECT_EQ(philox4x32({0, 0, 0, 0}, {0, 0}), (A4{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
  EXPECT_EQ(philox4x32({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}),
            (A4{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
  EXPECT_EQ(philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}),
            (A4{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(NormalQuantile, MatchesBoost) {
  const boost::math::normal_distribution<double> nd;
  for (double p : {1e-300, 1e-20, 1e-8, 0.001, 0.02425, 0.1, 0.3, 0.5, 0.7, 0.97575, 0.999, 1 - 1e-12}) {
    const double ref = boost::math::quantile(nd, p);
    EXPECT_NEAR(normal_quantile(p), ref, 1e-14 * std::max(1.0, std::abs(ref))) << p;
  }
}

TEST(CounterRng, PureFunctionOfAddress) {
  const CounterRng a(42, 3), b(42, 3), c(42, 4), d(43, 3);
  EXPECT_EQ(a.uniform(17, 5), b.uniform(17, 5));
  EXPECT_NE(a.uniform(17, 5), c.uniform(17, 5));
  EXPECT_NE(a.uniform(17, 5), d.uniform(17, 5));
  const Vector x = a.normals(9, 7);
  Vector y(7);
  b.normals(9, y);
  EXPECT_EQ(x, y);
}

TEST(CounterRng, UniformsInOpenIntervalAndUnbiased) {
  const CounterRng r(1, 0);
  Moments m;
  for (std::uint64_t i = 0; i < 200000; ++i) {
    const double u = r.uniform(i, i % 3);
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
    m.push(u);
  }
  EXPECT_NEAR(m.mean, 0.5, 3 * m.stderr_mean());
  EXPECT_NEAR(m.variance(), 1.0 / 12.0, 3 * m.stderr_variance());
}

TEST(CounterRng, NormalMoments) {
  const CounterRng r(2, 0);
  Moments m;
  for (std::uint64_t i = 0; i < 50000; ++i) {
    const Vector g = r.normals(i, 4);
    for (Index j = 0; j < 4; ++j) m.push(g[j]);
  }
  EXPECT_NEAR(m.mean, 0.0, 4 * m.stderr_mean());
  EXPECT_NEAR(m.variance(), 1.0, 4 * m.stderr_variance());
  EXPECT_NEAR(m.m4 / m.n / std::pow(m.m2 / m.n, 2), 3.0, 0.05);
}

TEST(CounterRng, SignsAreBalanced) {
  const CounterRng r(3, 0);
  Vector s(16);
  std::int64_t plus = 0;
  for (std::uint64_t i = 0; i < 10000; ++i) {
    r.signs(i, s);
    for (Index j = 0; j < 16; ++j) {
      ASSERT_TRUE(s[j] == 1.0 || s[j] == -1.0);
      plus += s[j] > 0;
    }
  }
  EXPECT_NEAR(static_cast<double>(plus) / 160000.0, 0.5, 4 * 0.5 / std::sqrt(160000.0));
}

TEST(DeriveSeed, DistinctLabels) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t a = 0; a < 20; ++a)
    for (std::uint64_t b = 0; b < 20; ++b) seen.insert(derive_seed(7, a, b));
  EXPECT_EQ(seen.size(), 400u);
  EXPECT_EQ(derive_seed(7, 1, 2), derive_seed(7, 1, 2));
}

TEST(ChunkedReduce, IndependentOfWorkerCount) {
  auto run = [](int workers) {
    return chunked_reduce<double>(
        100003, workers,
        [](std::int64_t b, std::int64_t e) {
          double s = 0;
          for (std::int64_t i = b; i < e; ++i) s += 1.0 / (1.0 + static_cast<double>(i));
          return s;
        },
        [](double& into, const double& from) { into += from; });
  };
  const double one = run(1);
  EXPECT_EQ(one, run(2));
  EXPECT_EQ(one, run(7));
}

TEST(Moments, MergeMatchesSequential) {
  Moments all, left, right;
  for (int i = 0; i < 1000; ++i) {
    const double x = std::sin(i * 0.37) * (1 + i % 5);
    all.push(x);
    (i < 400 ? left : right).push(x);
  }
  left.merge(right);
  EXPECT_EQ(left.n, all.n);
  EXPECT_NEAR(left.mean, all.mean, 1e-13);
  EXPECT_NEAR(left.m2, all.m2, 1e-9);
  EXPECT_NEAR(left.m4, all.m4, 1e-8);
}

TEST(ClopperPearson, ZeroCountAndInterior) {
  const Interval z = clopper_pearson(0, 1000, 0.99);
  EXPECT_EQ(z.lo, 0.0);
  EXPECT_NEAR(z.hi, 1.0 - std::pow(0.01, 1.0 / 1000.0), 1e-15);
  const Interval f = clopper_pearson(1000, 1000, 0.99);
  EXPECT_EQ(f.hi, 1.0);
  const Interval m = clopper_pearson(50, 100, 0.95);
  EXPECT_NEAR(m.lo, 0.3983, 1e-4);
  EXPECT_NEAR(m.hi, 0.6017, 1e-4);
  // Counts large enough that the exact inversion falls back to the normal approximation.
  const std::int64_t N = 1'000'000'000'000, k = 10'000'000'000;
  const Interval big = clopper_pearson(k, N, 0.99);
  const double se = std::sqrt(0.01 * 0.99 / 1e12);
  EXPECT_NEAR(big.lo, 0.01 - 2.5758293 * se, 1e-3 * se);
  EXPECT_NEAR(big.hi, 0.01 + 2.5758293 * se, 1e-3 * se);
}

TEST(FitLine, ExactData) {
  const std::vector<double> x{1, 2, 3, 4}, y{3, 5, 7, 9};
  const LineFit l = fit_line(x, y);
  EXPECT_NEAR(l.slope, 2.0, 1e-12);
  EXPECT_NEAR(l.intercept, 1.0, 1e-12);
  EXPECT_NEAR(l.r2, 1.0, 1e-12);
  EXPECT_NEAR(fit_through_origin(x, {2, 4, 6, 8}).slope, 2.0, 1e-12);
}
