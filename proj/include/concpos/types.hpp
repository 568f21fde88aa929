#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace concpos {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using VecRef = Eigen::Ref<const Eigen::VectorXd>;
using VecOut = Eigen::Ref<Eigen::VectorXd>;
using MatRef = Eigen::Ref<const Eigen::MatrixXd>;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid argument or violated precondition supplied by the caller.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// The requested object would not be a norm (rank-deficient functionals).
class DegenerateNormError : public Error {
 public:
  using Error::Error;
};

class SingularMatrixError : public Error {
 public:
  using Error::Error;
};

// Gradient requested at the origin.
class UndefinedGradientError : public Error {
 public:
  using Error::Error;
};

// Balancing found a coordinate along which the function is (nearly) constant.
class DegenerateDirectionError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  using Error::Error;
};

// A certificate produced by an earlier stage does not meet what a later stage needs.
class CertificateError : public Error {
 public:
  using Error::Error;
};

}  // namespace concpos
