#pragma once

#include "concpos/types.hpp"

namespace concpos {

struct NnlsResult {
  Vector x;
  double residual = 0.0;  // |A x - b|_2
  int iterations = 0;
  bool converged = false;
};

/// min |A x - b|_2 subject to x >= 0 (Lawson-Hanson active set).
NnlsResult nnls(const Matrix& A, const Vector& b, int max_iter = 0, double tol = 1e-12);

}  // namespace concpos
