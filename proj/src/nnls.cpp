#include "concpos/nnls.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace concpos {

namespace {

Vector solve_passive(const Matrix& A, const Vector& b, const std::vector<bool>& passive) {
  std::vector<Index> idx;
  for (Index j = 0; j < A.cols(); ++j)
    if (passive[static_cast<std::size_t>(j)]) idx.push_back(j);
  Vector z = Vector::Zero(A.cols());
  if (idx.empty()) return z;
  Matrix Ap(A.rows(), static_cast<Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) Ap.col(static_cast<Index>(k)) = A.col(idx[k]);
  const Vector zp = Ap.colPivHouseholderQr().solve(b);
  for (std::size_t k = 0; k < idx.size(); ++k) z[idx[k]] = zp[static_cast<Index>(k)];
  return z;
}

}  // namespace

NnlsResult nnls(const Matrix& A, const Vector& b, int max_iter, double tol) {
  if (A.rows() != b.size()) throw InvalidArgument("nnls: dimension mismatch");
  const Index n = A.cols();
  if (max_iter <= 0) max_iter = static_cast<int>(3 * n + 10);
  NnlsResult r;
  r.x = Vector::Zero(n);
  std::vector<bool> passive(static_cast<std::size_t>(n), false);
  const double scale = std::max(1.0, A.cwiseAbs().maxCoeff() * std::max(1.0, b.cwiseAbs().maxCoeff()));
  for (r.iterations = 0; r.iterations < max_iter; ++r.iterations) {
    const Vector w = A.transpose() * (b - A * r.x);
    Index jmax = -1;
    double wmax = tol * scale;
    for (Index j = 0; j < n; ++j) {
      if (!passive[static_cast<std::size_t>(j)] && w[j] > wmax) {
        wmax = w[j];
        jmax = j;
      }
    }
    if (jmax < 0) {
      r.converged = true;
      break;
    }
    passive[static_cast<std::size_t>(jmax)] = true;
    for (int inner = 0; inner < 3 * n + 10; ++inner) {
      Vector z = solve_passive(A, b, passive);
      double alpha = std::numeric_limits<double>::infinity();
      bool feasible = true;
      for (Index j = 0; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)] && z[j] <= 0.0) {
          feasible = false;
          const double denom = r.x[j] - z[j];
          if (denom > 0.0) alpha = std::min(alpha, r.x[j] / denom);
        }
      }
      if (feasible) {
        r.x = z;
        break;
      }
      if (!std::isfinite(alpha)) alpha = 0.0;
      r.x += alpha * (z - r.x);
      for (Index j = 0; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)] && r.x[j] <= 1e-15 * scale) {
          passive[static_cast<std::size_t>(j)] = false;
          r.x[j] = 0.0;
        }
      }
    }
  }
  r.residual = (A * r.x - b).norm();
  return r;
}

}  // namespace concpos
