#include "concpos/norm.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace concpos {

std::string to_string(NormKind kind) {
  switch (kind) {
    case NormKind::lp: return "lp";
    case NormKind::polytope: return "polytope";
    case NormKind::linear_image: return "linear-image";
    case NormKind::sum_max: return "sum-max";
    case NormKind::section: return "section";
    case NormKind::smoothed: return "smoothed";
    case NormKind::sum: return "sum";
    case NormKind::custom: return "custom";
  }
  return "unknown";
}

Vector Norm::subgradient(VecRef x) const {
  Vector g(dim());
  value_and_subgradient(x, g);
  return g;
}

namespace {

double sign_of(double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }

// Index of the largest |y_j|; the first one wins on ties.
Index argmax_abs(const Eigen::Ref<const Vector>& y) {
  Index best = 0;
  double bv = -1.0;
  for (Index j = 0; j < y.size(); ++j) {
    const double a = std::abs(y[j]);
    if (a > bv) {
      bv = a;
      best = j;
    }
  }
  return best;
}

void check_dim(const Norm& X, VecRef x) {
  if (x.size() != X.dim()) {
    throw InvalidArgument("vector of size " + std::to_string(x.size()) + " passed to a norm on R^" +
                          std::to_string(X.dim()));
  }
}

class LpNorm final : public Norm {
 public:
  LpNorm(Index n, double p) : Norm(n), p_(p) {}

  double value(VecRef x) const override {
    check_dim(*this, x);
    if (p_ == 1.0) return x.lpNorm<1>();
    if (p_ == 2.0) return x.norm();
    if (std::isinf(p_)) return x.size() ? x.cwiseAbs().maxCoeff() : 0.0;
    const double s = x.cwiseAbs().maxCoeff();
    if (s == 0.0) return 0.0;
    double acc = 0.0;
    for (Index i = 0; i < x.size(); ++i) acc += std::pow(std::abs(x[i]) / s, p_);
    return s * std::pow(acc, 1.0 / p_);
  }

  double value_and_subgradient(VecRef x, VecOut g) const override {
    check_dim(*this, x);
    g.setZero();
    if (p_ == 1.0) {
      for (Index i = 0; i < x.size(); ++i) g[i] = sign_of(x[i]);
      return x.lpNorm<1>();
    }
    if (std::isinf(p_)) {
      const Index j = argmax_abs(x);
      g[j] = sign_of(x[j]);
      return std::abs(x[j]);
    }
    const double v = value(x);
    if (v == 0.0) return 0.0;
    if (p_ == 2.0) {
      g = x / v;
      return v;
    }
    for (Index i = 0; i < x.size(); ++i) g[i] = sign_of(x[i]) * std::pow(std::abs(x[i]) / v, p_ - 1.0);
    return v;
  }

  NormKind kind() const override { return NormKind::lp; }

  std::string describe() const override {
    std::ostringstream os;
    os << "lp(p=" << (std::isinf(p_) ? std::string("inf") : std::to_string(p_)) << ", n=" << dim() << ")";
    return os.str();
  }

  std::optional<Matrix> functionals() const override {
    if (std::isinf(p_)) return Matrix::Identity(dim(), dim());
    return std::nullopt;
  }

 private:
  double p_;
};

bool is_identity(const Matrix& U) {
  return U.rows() == U.cols() && U == Matrix::Identity(U.rows(), U.cols());
}

class PolytopeNorm final : public Norm {
 public:
  explicit PolytopeNorm(Matrix U) : Norm(U.cols()), U_(std::move(U)), identity_(is_identity(U_)) {}

  double value(VecRef x) const override {
    check_dim(*this, x);
    if (identity_) return x.cwiseAbs().maxCoeff();
    return (U_ * x).cwiseAbs().maxCoeff();
  }

  double value_and_subgradient(VecRef x, VecOut g) const override {
    check_dim(*this, x);
    const Vector y = identity_ ? Vector(x) : Vector(U_ * x);
    const Index j = argmax_abs(y);
    g = sign_of(y[j]) * U_.row(j).transpose();
    return std::abs(y[j]);
  }

  NormKind kind() const override { return NormKind::polytope; }
  std::string describe() const override {
    return "polytope(J=" + std::to_string(U_.rows()) + ", n=" + std::to_string(dim()) + ")";
  }
  std::optional<Matrix> functionals() const override { return U_; }

 private:
  Matrix U_;
  bool identity_;
};

class LinearImageNorm final : public Norm {
 public:
  LinearImageNorm(NormPtr X, Matrix T, double cond) : Norm(T.cols()), X_(std::move(X)), T_(std::move(T)), cond_(cond) {
    if (T_.rows() == T_.cols() && T_.isDiagonal(0.0)) diag_ = T_.diagonal();
  }

  double value(VecRef x) const override {
    check_dim(*this, x);
    if (diag_.size()) return X_->value(diag_.cwiseProduct(x));
    return X_->value(T_ * x);
  }

  double value_and_subgradient(VecRef x, VecOut g) const override {
    check_dim(*this, x);
    const Vector y = diag_.size() ? Vector(diag_.cwiseProduct(x)) : Vector(T_ * x);
    Vector h(y.size());
    const double v = X_->value_and_subgradient(y, h);
    if (diag_.size()) g = diag_.cwiseProduct(h);
    else g.noalias() = T_.transpose() * h;
    return v;
  }

  NormKind kind() const override { return NormKind::linear_image; }
  std::string describe() const override { return "linear(" + X_->describe() + ")"; }
  std::optional<Matrix> functionals() const override {
    auto U = X_->functionals();
    if (!U) return std::nullopt;
    return Matrix(*U * T_);
  }

  const NormPtr& base() const { return X_; }
  const Matrix& matrix() const { return T_; }
  double condition() const { return cond_; }

 private:
  NormPtr X_;
  Matrix T_;
  Vector diag_;  // set when T is diagonal
  double cond_;
};

class SumMaxNorm final : public Norm {
 public:
  SumMaxNorm(NormPtr X, Index m) : Norm(X->dim() + m), X_(std::move(X)), m_(m) {}

  double value(VecRef x) const override {
    check_dim(*this, x);
    const Index n = X_->dim();
    return std::max(X_->value(x.head(n)), x.tail(m_).norm());
  }

  double value_and_subgradient(VecRef x, VecOut g) const override {
    check_dim(*this, x);
    const Index n = X_->dim();
    const double vx = X_->value(x.head(n));
    const double vz = x.tail(m_).norm();
    g.setZero();
    if (vx >= vz) {
      Vector h(n);
      X_->value_and_subgradient(x.head(n), h);
      g.head(n) = h;
      return vx;
    }
    g.tail(m_) = x.tail(m_) / vz;
    return vz;
  }

  NormKind kind() const override { return NormKind::sum_max; }
  std::string describe() const override {
    return "summax(" + X_->describe() + ", m=" + std::to_string(m_) + ")";
  }

 private:
  NormPtr X_;
  Index m_;
};

class SectionNorm final : public Norm {
 public:
  SectionNorm(NormPtr X, Matrix E) : Norm(E.cols()), X_(std::move(X)), E_(std::move(E)) {}

  double value(VecRef a) const override {
    check_dim(*this, a);
    return X_->value(E_ * a);
  }

  double value_and_subgradient(VecRef a, VecOut g) const override {
    check_dim(*this, a);
    const Vector y = E_ * a;
    Vector h(y.size());
    const double v = X_->value_and_subgradient(y, h);
    g.noalias() = E_.transpose() * h;
    return v;
  }

  NormKind kind() const override { return NormKind::section; }
  std::string describe() const override {
    return "section(" + X_->describe() + ", k=" + std::to_string(dim()) + ")";
  }
  std::optional<Matrix> functionals() const override {
    auto U = X_->functionals();
    if (!U) return std::nullopt;
    return Matrix(*U * E_);
  }

 private:
  NormPtr X_;
  Matrix E_;
};

class SmoothedNorm final : public Norm {
 public:
  SmoothedNorm(Matrix U, double delta, std::string base_name)
      : Norm(U.cols()), U_(std::move(U)), identity_(is_identity(U_)), delta_(delta), base_name_(std::move(base_name)) {
    const double J = static_cast<double>(U_.rows());
    p_ = std::max(1.0, std::ceil(std::log(2.0 * J) / std::log1p(delta_)));
    // Terms with r^p below e^-40 change neither the value nor the gradient in double precision.
    r_cut_ = std::exp(-40.0 / p_);
  }

  double value(VecRef x) const override {
    check_dim(*this, x);
    const Vector y = identity_ ? Vector(x) : Vector(U_ * x);
    const double s = y.cwiseAbs().maxCoeff();
    if (s == 0.0) return 0.0;
    double acc = 0.0;
    for (Index j = 0; j < y.size(); ++j) {
      const double r = std::abs(y[j]) / s;
      if (r >= r_cut_) acc += std::pow(r, p_);
    }
    return s * std::pow(acc, 1.0 / p_);
  }

  double value_and_subgradient(VecRef x, VecOut g) const override {
    check_dim(*this, x);
    const Vector y = identity_ ? Vector(x) : Vector(U_ * x);
    const double s = y.cwiseAbs().maxCoeff();
    if (s == 0.0) {
      g.setZero();
      return 0.0;
    }
    // r_j = |y_j|/s; d_j = r_j^(p-1) and S = sum r_j^p, so dv/dy_j = sign(y_j) d_j S^(-(p-1)/p).
    Vector d = Vector::Zero(y.size());
    double S = 0.0;
    for (Index j = 0; j < y.size(); ++j) {
      const double r = std::abs(y[j]) / s;
      if (r < r_cut_) continue;
      const double rp1 = std::pow(r, p_ - 1.0);
      d[j] = sign_of(y[j]) * rp1;
      S += rp1 * r;
    }
    d *= std::pow(S, -(p_ - 1.0) / p_);
    if (identity_) g = d;
    else g.noalias() = U_.transpose() * d;
    return s * std::pow(S, 1.0 / p_);
  }

  NormKind kind() const override { return NormKind::smoothed; }
  std::string describe() const override {
    std::ostringstream os;
    os << "smooth(" << base_name_ << ", delta=" << delta_ << ", p=" << p_ << ")";
    return os.str();
  }
  double exponent() const { return p_; }

 private:
  Matrix U_;
  bool identity_;
  double delta_;
  double p_;
  double r_cut_;
  std::string base_name_;
};

class SumNorm final : public Norm {
 public:
  SumNorm(NormPtr X, NormPtr Y, double wx, double wy) : Norm(X->dim()), X_(std::move(X)), Y_(std::move(Y)), wx_(wx), wy_(wy) {}

  double value(VecRef x) const override { return wx_ * X_->value(x) + wy_ * Y_->value(x); }

  double value_and_subgradient(VecRef x, VecOut g) const override {
    check_dim(*this, x);
    Vector h(dim());
    const double vx = X_->value_and_subgradient(x, g);
    const double vy = Y_->value_and_subgradient(x, h);
    g = wx_ * g + wy_ * h;
    return wx_ * vx + wy_ * vy;
  }

  NormKind kind() const override { return NormKind::sum; }
  std::string describe() const override {
    std::ostringstream os;
    os << wx_ << "*" << X_->describe() << " + " << wy_ << "*" << Y_->describe();
    return os.str();
  }

 private:
  NormPtr X_, Y_;
  double wx_, wy_;
};

class CustomNorm final : public Norm {
 public:
  CustomNorm(Index n, std::function<double(VecRef)> v, std::function<void(VecRef, VecOut)> g, std::string name)
      : Norm(n), v_(std::move(v)), g_(std::move(g)), name_(std::move(name)) {}

  double value(VecRef x) const override {
    check_dim(*this, x);
    return v_(x);
  }
  double value_and_subgradient(VecRef x, VecOut g) const override {
    check_dim(*this, x);
    g_(x, g);
    return v_(x);
  }
  NormKind kind() const override { return NormKind::custom; }
  std::string describe() const override { return name_; }

 private:
  std::function<double(VecRef)> v_;
  std::function<void(VecRef, VecOut)> g_;
  std::string name_;
};

void require_finite(const Matrix& M, const char* what) {
  if (!M.allFinite()) throw InvalidArgument(std::string(what) + " has non-finite entries");
}

double matrix_condition(const Matrix& T) {
  Eigen::BDCSVD<Matrix> svd(T);
  const auto& s = svd.singularValues();
  if (s.size() == 0) return std::numeric_limits<double>::infinity();
  const double smin = s[s.size() - 1];
  if (!(smin > 0.0)) return std::numeric_limits<double>::infinity();
  return s[0] / smin;
}

}  // namespace

NormPtr make_lp_norm(Index n, double p) {
  if (n < 1) throw InvalidArgument("dimension must be positive");
  if (std::isnan(p) || p < 1.0) throw InvalidArgument("lp norm requires p >= 1");
  return std::make_shared<LpNorm>(n, p);
}

NormPtr make_linf_norm(Index n) { return make_lp_norm(n, std::numeric_limits<double>::infinity()); }

NormPtr make_polytope_norm(const Matrix& U) {
  if (U.rows() < 1 || U.cols() < 1) throw InvalidArgument("polytope norm needs a nonempty functional matrix");
  require_finite(U, "functional matrix");
  Eigen::ColPivHouseholderQR<Matrix> qr(U);
  qr.setThreshold(1e-12);
  if (qr.rank() < U.cols()) {
    throw DegenerateNormError("functionals have rank " + std::to_string(qr.rank()) + " < " +
                              std::to_string(U.cols()) + "; the unit ball is unbounded");
  }
  return std::make_shared<PolytopeNorm>(U);
}

NormPtr make_weighted_sup_norm(const Vector& weights) {
  if (weights.size() < 1) throw InvalidArgument("weights must be nonempty");
  if ((weights.array() <= 0.0).any()) throw DegenerateNormError("weighted sup norm needs positive weights");
  return make_polytope_norm(weights.asDiagonal().toDenseMatrix());
}

NormPtr compose_linear(const NormPtr& X, const Matrix& T) {
  if (T.rows() != X->dim() || T.cols() != X->dim()) {
    throw InvalidArgument("linear map must be " + std::to_string(X->dim()) + "x" + std::to_string(X->dim()));
  }
  require_finite(T, "linear map");
  const double cond = matrix_condition(T);
  if (!(cond < 1e14)) throw SingularMatrixError("linear map is singular (condition number " + std::to_string(cond) + ")");
  if (auto inner = std::dynamic_pointer_cast<const LinearImageNorm>(X)) {
    Matrix TS = inner->matrix() * T;
    return std::make_shared<LinearImageNorm>(inner->base(), std::move(TS), matrix_condition(inner->matrix() * T));
  }
  return std::make_shared<LinearImageNorm>(X, T, cond);
}

NormPtr direct_sum_max(const NormPtr& X, Index m) {
  if (m < 1) throw InvalidArgument("direct_sum_max needs m >= 1");
  return std::make_shared<SumMaxNorm>(X, m);
}

NormPtr restrict_to_subspace(const NormPtr& X, const Matrix& E) {
  if (E.rows() != X->dim() || E.cols() < 1 || E.cols() > E.rows()) {
    throw InvalidArgument("subspace basis must be " + std::to_string(X->dim()) + "xk with 1 <= k <= n");
  }
  require_finite(E, "subspace basis");
  const double err = (E.transpose() * E - Matrix::Identity(E.cols(), E.cols())).cwiseAbs().maxCoeff();
  if (err > 1e-10) throw InvalidArgument("subspace basis is not orthonormal (max deviation " + std::to_string(err) + ")");
  return std::make_shared<SectionNorm>(X, E);
}

double default_smoothing_delta(Index m) { return 1.0 / (7.0 + std::log(static_cast<double>(m))); }

NormPtr smooth(const NormPtr& X, double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("smoothing parameter must lie in (0,1)");
  auto U = X->functionals();
  if (!U) throw InvalidArgument("smoothing needs a polytopal norm; " + X->describe() + " has no functional description");
  return std::make_shared<SmoothedNorm>(std::move(*U), delta, X->describe());
}

NormPtr make_sum_norm(const NormPtr& X, const NormPtr& Y, double wx, double wy) {
  if (X->dim() != Y->dim()) throw InvalidArgument("summands live in different dimensions");
  if (!(wx >= 0.0 && wy >= 0.0) || wx + wy <= 0.0) throw InvalidArgument("sum norm weights must be nonnegative, not both zero");
  return std::make_shared<SumNorm>(X, Y, wx, wy);
}

NormPtr make_custom_norm(Index n, std::function<double(VecRef)> value, std::function<void(VecRef, VecOut)> subgradient,
                         std::string name) {
  if (n < 1) throw InvalidArgument("dimension must be positive");
  return std::make_shared<CustomNorm>(n, std::move(value), std::move(subgradient), std::move(name));
}

Vector gradient(const Norm& X, VecRef x) {
  if (x.size() != X.dim()) throw InvalidArgument("dimension mismatch in gradient");
  if ((x.array() == 0.0).all()) throw UndefinedGradientError("the gradient of a norm is undefined at the origin");
  return X.subgradient(x);
}

std::optional<double> condition_number(const Norm& X) {
  if (auto L = dynamic_cast<const LinearImageNorm*>(&X)) return L->condition();
  return std::nullopt;
}

std::optional<double> smoothing_exponent(const Norm& X) {
  if (auto S = dynamic_cast<const SmoothedNorm*>(&X)) return S->exponent();
  return std::nullopt;
}

}  // namespace concpos
