#include "concpos/pipeline.hpp"

#include "concpos/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace concpos {

std::string to_string(Branch b) { return b == Branch::euclidean ? "euclidean" : "cube"; }

BalanceOptions position_balance_options() {
  BalanceOptions b;
  b.q = 1;
  b.target_residual = 0.25;
  return b;
}

TwoLevelFit two_level_fit(const TailCurve& tail, Index n) {
  if (n < 2) throw InvalidArgument("two_level_fit needs n >= 2");
  const double logn = std::log(static_cast<double>(n));
  std::vector<double> xl, yl, xq, yq, xa, ya;
  for (std::size_t i = 0; i < tail.t.size(); ++i) {
    if (tail.count[i] < kMinFitCount || !(tail.p_hat[i] > 0.0)) continue;
    const double t = tail.t[i];
    const double y = -std::log(tail.p_hat[i]);
    if (t <= 1.0) {
      xl.push_back(t * logn);
      yl.push_back(y);
    }
    if (t >= 1.0) {
      xq.push_back(t * t * logn);
      yq.push_back(y);
    }
    xa.push_back(t * t * logn);
    ya.push_back(y);
  }
  TwoLevelFit f;
  f.partial = xl.size() < 4 || xq.size() < 4;
  if (!xl.empty()) {
    f.linear = fit_through_origin(xl, yl);
    f.c1 = f.linear.slope;
  }
  if (!xq.empty()) {
    f.quadratic = fit_through_origin(xq, yq);
    f.c2 = f.quadratic.slope;
  }
  if (!xa.empty()) f.quadratic_all = fit_through_origin(xa, ya).slope;
  f.crossover = f.c2 > 0.0 ? f.c1 / f.c2 : 0.0;
  f.super_logarithmic = f.quadratic_all > 10.0;
  return f;
}

namespace {

struct PairMoments {
  Moments a, b, lower, upper;
};

// Means of Y(T G) and |P G|_2 over the same samples.
struct LiftMeans {
  Moments tz, w;
};

}  // namespace

Lift build_lift(const NormPtr& Yp, const Matrix& Wsig, const Vector& Lambda, const SampleConfig& cfg,
                double lambda_scale) {
  const Norm& Y = *Yp;
  const Index n = Y.dim();
  const Index s = Wsig.cols();
  if (Wsig.rows() != n || s < 1 || s > n) throw InvalidArgument("W_sigma must be n x s with 1 <= s <= n");
  if (Lambda.size() != s) throw InvalidArgument("Lambda must have one entry per column of W_sigma");
  if ((Wsig.transpose() * Wsig - Matrix::Identity(s, s)).cwiseAbs().maxCoeff() > 1e-10)
    throw InvalidArgument("W_sigma must have orthonormal columns");
  Lift L;
  L.T_sub = Wsig * Lambda.asDiagonal() * Wsig.transpose();
  const Matrix P = Matrix::Identity(n, n) - Wsig * Wsig.transpose();
  L.trivial = (s == n);
  const Matrix WL = Wsig * Lambda.asDiagonal();
  const CounterRng rng(cfg.seed, cfg.stream + streams::lift);
  const LiftMeans m = chunked_reduce<LiftMeans>(
      cfg.n_samples, cfg.workers,
      [&](std::int64_t b, std::int64_t e) {
        LiftMeans r;
        Vector G(n), z(s);
        for (std::int64_t i = b; i < e; ++i) {
          rng.normals(static_cast<std::uint64_t>(i), G);
          z.noalias() = Wsig.transpose() * G;
          r.tz.push(Y.value(WL * z));
          if (!L.trivial) r.w.push((P * G).norm());
        }
        return r;
      },
      [](LiftMeans& a, const LiftMeans& o) {
        a.tz.merge(o.tz);
        a.w.merge(o.w);
      });
  L.M_TZ = m.tz.mean;
  L.M_TZ_stderr = m.tz.stderr_mean();
  if (L.trivial) {
    L.lambda = L.lambda_formula = 0.0;
    L.S = L.T_sub;
    return L;
  }
  L.M_W = m.w.mean;
  L.M_W_stderr = m.w.stderr_mean();
  L.lambda_formula = L.M_TZ / (L.M_W * std::log(static_cast<double>(n)));
  L.lambda = lambda_scale * L.lambda_formula;
  L.S = L.T_sub + L.lambda * P;
  return L;
}

SandwichCheck lift_mean_sandwich_check(const NormPtr& Yp, const Matrix& Wsig, const Lift& L, const SampleConfig& cfg) {
  const Norm& Y = *Yp;
  const Index n = Y.dim();
  const double up = 1.0 + 1.0 / std::log(static_cast<double>(n));
  const Matrix Tz = L.T_sub * Wsig;  // Z = W^T G lives in R^s; T Z = W Lambda Z
  const CounterRng rng(cfg.seed, cfg.stream + streams::sandwich);
  const PairMoments m = chunked_reduce<PairMoments>(
      cfg.n_samples, cfg.workers,
      [&](std::int64_t b, std::int64_t e) {
        PairMoments r;
        Vector G(n);
        for (std::int64_t i = b; i < e; ++i) {
          rng.normals(static_cast<std::uint64_t>(i), G);
          const double sg = Y.value(L.S * G);
          const double tz = Y.value(Tz * (Wsig.transpose() * G));
          r.a.push(sg);
          r.b.push(tz);
          r.lower.push(sg - tz);
          r.upper.push(sg - up * tz);
        }
        return r;
      },
      [](PairMoments& a, const PairMoments& o) {
        a.a.merge(o.a);
        a.b.merge(o.b);
        a.lower.merge(o.lower);
        a.upper.merge(o.upper);
      });
  SandwichCheck c;
  c.applicable = true;
  c.M_SG = m.a.mean;
  c.M_TZ = m.b.mean;
  c.lower_gap = m.lower.mean;
  c.lower_stderr = m.lower.stderr_mean();
  c.upper_gap = m.upper.mean;
  c.upper_stderr = m.upper.stderr_mean();
  c.lower_ok = c.lower_gap >= -3.0 * c.lower_stderr - 1e-12;
  c.upper_ok = c.upper_gap <= 3.0 * c.upper_stderr + 1e-12;
  c.passed = c.lower_ok && c.upper_ok;
  return c;
}

SandwichCheck lift_mean_sandwich_check(const PipelineReport& r, const SampleConfig& cfg) {
  if (r.branch != Branch::cube || !r.ok) return SandwichCheck{};
  return lift_mean_sandwich_check(r.positioned, r.W_sigma, r.lift, cfg);
}

namespace {

// Smooths polytopal norms before balancing so the partial derivatives are continuous.
NormPtr smoothed_if_polytopal(const NormPtr& f, bool& smoothed) {
  smoothed = f->functionals().has_value();
  return smoothed ? smooth(f, default_smoothing_delta(f->dim())) : f;
}

}  // namespace

PipelineReport good_position(const NormPtr& X, const SampleConfig& cfg, const PipelineOptions& o) {
  if (!(o.delta > 0.0 && o.delta < 0.5)) throw InvalidArgument("delta must lie in (0, 1/2)");
  PipelineReport r;
  const Index n = X->dim();
  r.n = n;
  r.delta = o.delta;
  r.threshold = std::pow(static_cast<double>(n), 0.5 - o.delta);
  std::string stage;
  try {
    stage = "john";
    r.john = john_position(X, o.john_tol, 400, cfg.seed);
    if (!r.john.certified) throw CertificateError("John position not certified");
    const Matrix& A = r.john.ellipsoid.A;
    r.positioned = compose_linear(X, A);

    stage = "stats";
    r.stats = conc_stats(*r.positioned, cfg);
    r.k_measured = r.stats.k;
    r.k_stderr = r.stats.stderr_k;

    if (r.k_measured + 3.0 * r.k_stderr >= r.threshold) {
      r.branch = Branch::euclidean;
      r.S = Matrix::Identity(n, n);
    } else {
      r.branch = Branch::cube;
      stage = "dr_basis";
      r.dr = dr_basis_positioned(r.positioned, r.john.certificate.contacts, DROptions{o.john_tol, 8, 8, cfg.seed});
      stage = "johnson";
      r.johnson = johnson_fix(r.dr, *r.positioned);

      stage = "cube";
      r.cube = find_linf_subset(*r.positioned, 4.0 * r.johnson.W, o.min_ratio, cfg);
      if (r.cube.c_low < r.cube.threshold - 1e-9 || !r.cube.upper_ok || !r.cube.banach_mazur_ok)
        throw CertificateError("cube certificate fails its bounds");
      const Index s = static_cast<Index>(r.cube.sigma.size());
      r.W_sigma.resize(n, s);
      for (Index j = 0; j < s; ++j) r.W_sigma.col(j) = r.johnson.W.col(r.cube.sigma[static_cast<std::size_t>(j)]);

      stage = "balance";
      const NormPtr f = smoothed_if_polytopal(restrict_to_subspace(r.positioned, r.W_sigma), r.smoothed);
      r.balance = balance_partials(f, cfg, o.balance);
      if (!r.balance.converged)
        throw ConvergenceError("balancing residual " + std::to_string(r.balance.residual) + " above target");
      r.Lambda = r.balance.lambda / r.balance.lambda.mean();

      stage = "lift";
      r.lift = build_lift(r.positioned, r.W_sigma, r.Lambda, cfg, o.lambda_scale);
      r.S = r.lift.S;
      const Eigen::JacobiSVD<Matrix> svd(r.S);
      if (!(svd.singularValues().minCoeff() > 0.0)) throw SingularMatrixError("lift S is singular");
    }
    r.T_total = r.john.ellipsoid.A * r.S;
    r.final_norm = compose_linear(r.positioned, r.S);

    if (o.run_tail) {
      stage = "tail";
      r.tail = estimate_tail(*r.final_norm, cfg, o.t_grid);
      r.fit = two_level_fit(r.tail, n);
    }
    r.ok = true;
  } catch (const Error& e) {
    r.ok = false;
    r.failure_stage = stage;
    r.failure_message = e.what();
  }
  return r;
}

RudPosition rud_position(const NormPtr& X, const Matrix& B, const SampleConfig& cfg, const std::vector<double>& t_grid,
                         const BalanceOptions& opts) {
  const Index n = X->dim();
  if (B.rows() != n || B.cols() != n) throw InvalidArgument("basis must be n x n");
  RudPosition r;
  r.rud = estimate_rud(*X, B, cfg);
  const NormPtr XB = compose_linear(X, B);
  const NormPtr f = smoothed_if_polytopal(XB, r.smoothed);
  r.balance = balance_partials(f, cfg, opts);
  if (!r.balance.converged)
    throw ConvergenceError("balancing did not reach the target residual (" + std::to_string(r.balance.residual) + ")");
  r.Lambda = r.balance.lambda / r.balance.lambda.mean();
  r.T = B * r.Lambda.asDiagonal();
  const NormPtr XT = compose_linear(X, r.T);
  r.stats = conc_stats(*XT, cfg);
  r.k_lambda = r.stats.k;
  const double L2 = r.rud.L_hat * r.rud.L_hat;
  r.bound_value = r.k_lambda * std::log(std::exp(1.0) + static_cast<double>(n) / (L2 * r.k_lambda));
  r.tail = estimate_tail(*XT, cfg, t_grid);
  return r;
}

}  // namespace concpos
