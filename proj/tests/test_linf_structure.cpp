#include "concpos/linf_structure.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

using namespace concpos;

namespace {

SampleConfig config(std::int64_t n, std::uint64_t seed = 1) {
  SampleConfig c;
  c.seed = seed;
  c.n_samples = n;
  c.workers = 1;
  return c;
}

std::vector<Index> all_of(Index n) {
  std::vector<Index> s(static_cast<std::size_t>(n));
  std::iota(s.begin(), s.end(), Index{0});
  return s;
}

// max(|x|_inf on the first 8 coordinates, a polytopal stand-in for |x|_2 on the last 4)
NormPtr cube_plus_ball() {
  Matrix U = Matrix::Zero(8 + 64, 12);
  U.topLeftCorner(8, 8).setIdentity();
  // The ball block is replaced by 64 random unit functionals; only the cube block is probed.
  const CounterRng rng(3, 0);
  for (Index j = 0; j < 64; ++j) U.row(8 + j).tail(4) = rng.normals(static_cast<std::uint64_t>(j), 4).normalized();
  return make_polytope_norm(U);
}

NormPtr hand_norm() {
  Matrix U(3, 2);
  U << 1, 0, 0, 1, 1 / 1.5, 1 / 1.5;
  return make_polytope_norm(U);
}

}  // namespace

TEST(RademacherMean, StandardBases) {
  const Matrix I = Matrix::Identity(10, 10);
  const RademacherMean li = rademacher_mean(*make_linf_norm(10), I, config(1000));
  EXPECT_TRUE(li.exact);
  EXPECT_DOUBLE_EQ(li.value, 1.0);
  EXPECT_DOUBLE_EQ(rademacher_mean(*make_lp_norm(10, 1), I, config(1000)).value, 10.0);
  EXPECT_NEAR(rademacher_mean(*make_lp_norm(10, 2), I, config(1000)).value, std::sqrt(10.0), 1e-12);
  const RademacherMean big = rademacher_mean(*make_lp_norm(40, 2), Matrix::Identity(40, 40), config(5000));
  EXPECT_FALSE(big.exact);
  EXPECT_NEAR(big.value, std::sqrt(40.0), 1e-12);
}

TEST(CubeEquivalence, ClosedForms) {
  const CubeBounds li = verify_cube_equivalence(*make_linf_norm(16), all_of(16), Matrix::Identity(16, 16));
  EXPECT_NEAR(li.c_low, 1.0, 1e-6);
  EXPECT_DOUBLE_EQ(li.c_up, 1.0);
  EXPECT_TRUE(li.c_up_exact);
  const CubeBounds l1 = verify_cube_equivalence(*make_lp_norm(2, 1), all_of(2), Matrix::Identity(2, 2));
  EXPECT_NEAR(l1.c_low, 1.0, 1e-6);
  EXPECT_DOUBLE_EQ(l1.c_up, 2.0);
  const CubeBounds l2 = verify_cube_equivalence(*make_lp_norm(3, 2), all_of(3), Matrix::Identity(3, 3));
  EXPECT_NEAR(l2.c_up, std::sqrt(3.0), 1e-12);
  const double grid = oracle::grid_min_2d([](double a, double b) { return std::sqrt(1 + a * a + b * b); });
  EXPECT_NEAR(l2.c_low, grid, 1e-6);
  EXPECT_THROW(verify_cube_equivalence(*make_linf_norm(3), {}, Matrix::Identity(3, 3)), InvalidArgument);
}

TEST(FindSubset, SupNormIsFullCube) {
  const CubeEmbeddingCertificate c = find_linf_subset(*make_linf_norm(16), Matrix::Identity(16, 16), 0.5, config(2000));
  EXPECT_EQ(c.sigma.size(), 16u);
  EXPECT_NEAR(c.c_low, 1.0, 1e-6);
  EXPECT_DOUBLE_EQ(c.c_up, 1.0);
  EXPECT_TRUE(c.upper_ok);
  EXPECT_TRUE(c.banach_mazur_ok);
}

TEST(FindSubset, CrossPolytopeKeepsEverything) {
  const CubeEmbeddingCertificate c = find_linf_subset(*make_lp_norm(4, 1), Matrix::Identity(4, 4), 0.5, config(2000));
  EXPECT_EQ(c.sigma.size(), 4u);
  EXPECT_NEAR(c.c_low, 1.0, 1e-6);
  EXPECT_DOUBLE_EQ(c.c_up, 4.0);
  const CubeBounds direct = verify_cube_equivalence(*make_lp_norm(4, 1), c.sigma, Matrix::Identity(4, 4));
  EXPECT_DOUBLE_EQ(direct.c_up, c.c_up);
}

TEST(FindSubset, CubeBlockOfMixedNorm) {
  const NormPtr Y = cube_plus_ball();
  const CubeEmbeddingCertificate c = find_linf_subset(*Y, Matrix::Identity(12, 12).leftCols(8), 0.5, config(2000));
  EXPECT_EQ(c.sigma.size(), 8u);
  EXPECT_NEAR(c.c_low, 1.0, 1e-6);
  EXPECT_DOUBLE_EQ(c.c_up, 1.0);
}

TEST(FindSubset, RejectsShortVectors) {
  EXPECT_THROW(find_linf_subset(*make_linf_norm(3), 0.5 * Matrix::Identity(3, 3), 0.5, config(1000)), InvalidArgument);
}

TEST(FindSubset, CertificateSoundAndMonotone) {
  const CounterRng rng(5, 0);
  Matrix U(24, 6);
  for (Index j = 0; j < 24; ++j) U.row(j) = rng.normals(static_cast<std::uint64_t>(j), 6).transpose();
  const NormPtr X = make_polytope_norm(U);
  Matrix V = Matrix::Identity(6, 6);
  for (Index j = 0; j < 6; ++j) V.col(j) /= X->value(V.col(j));
  const CubeEmbeddingCertificate c = find_linf_subset(*X, V, 0.5, config(5000));
  ASSERT_GE(c.sigma.size(), 1u);
  EXPECT_GE(c.c_low, 0.5 * c.min_norm - 1e-9);
  EXPECT_LE(c.c_up, 4 * c.M_n + 1e-6);
  EXPECT_LE(c.c_up / c.c_low, 32 * c.M_n);
  for (std::size_t i = 1; i < c.c_low_history.size(); ++i) {
    EXPECT_LE(c.c_low_history[i], c.c_low_history[i - 1] + 1e-9);
    EXPECT_GE(c.c_up_history[i], c.c_up_history[i - 1] - 1e-9);
  }
  for (int s = 0; s < 10000; ++s) {
    Vector alpha(static_cast<Index>(c.sigma.size()));
    for (Index i = 0; i < alpha.size(); ++i) alpha[i] = 2 * rng.uniform(static_cast<std::uint64_t>(100 + s), i) - 1;
    alpha /= alpha.cwiseAbs().maxCoeff();
    Vector x = Vector::Zero(6);
    for (std::size_t i = 0; i < c.sigma.size(); ++i) x += alpha[static_cast<Index>(i)] * V.col(c.sigma[i]);
    const double v = X->value(x);
    ASSERT_GE(v, c.c_low - 1e-6);
    ASSERT_LE(v, c.c_up + 1e-6);
  }
}

TEST(FaceMinimum, FixedCoefficientAndBox) {
  const FaceMinimum f = face_minimum(*make_lp_norm(3, 2), Matrix::Identity(3, 3), 1);
  EXPECT_DOUBLE_EQ(f.coeffs[1], 1.0);
  EXPECT_NEAR(f.value, 1.0, 1e-6);
  EXPECT_LE(f.coeffs.cwiseAbs().maxCoeff(), 1.0);
}

TEST(SignMax, ExactAndLocal) {
  const SignMax s = sign_max(*make_lp_norm(5, 1), Matrix::Identity(5, 5));
  EXPECT_TRUE(s.exact);
  EXPECT_DOUBLE_EQ(s.value, 5.0);
  const SignMax l = sign_max(*make_lp_norm(20, 2), Matrix::Identity(20, 20));
  EXPECT_FALSE(l.exact);
  EXPECT_NEAR(l.value, std::sqrt(20.0), 1e-12);
}

TEST(Rud, UnconditionalBasesGiveOne) {
  const RudEstimate li = estimate_rud(*make_linf_norm(6), Matrix::Identity(6, 6), config(5000));
  EXPECT_NEAR(li.L_hat, 1.0, 1e-12);
  const RudEstimate l1 = estimate_rud(*make_lp_norm(6, 1), Matrix::Identity(6, 6), config(5000));
  EXPECT_NEAR(l1.L_hat, 1.0, 1e-12);
}

TEST(Rud, HandComputedTwoDimensional) {
  // y = (1,1): sign patterns give 4/3, 1, 1, 4/3, so the ratio is (4/3) / (7/6) = 8/7.
  const RudEstimate r = estimate_rud(*hand_norm(), Matrix::Identity(2, 2), config(5000));
  EXPECT_GE(r.L_hat, 8.0 / 7.0 - 1e-12);
  EXPECT_GE(r.L_hat, 1.0);
}
