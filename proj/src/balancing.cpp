#include "concpos/balancing.hpp"

#include "concpos/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace concpos {

namespace {

struct Part {
  Vector sq, s2q;
  std::int64_t n = 0;
};

double spread(const Vector& rho) {
  const double mean = rho.mean();
  return mean > 0.0 ? (rho.maxCoeff() - rho.minCoeff()) / mean : 0.0;
}

}  // namespace

DiagonalPartials diagonal_partials(const Norm& f, const Vector& lambda, int q, const SampleConfig& cfg) {
  if (q != 1 && q != 2) throw InvalidArgument("q must be 1 or 2");
  const Index m = f.dim();
  if (lambda.size() != m) throw InvalidArgument("lambda has the wrong length");
  const CounterRng rng(cfg.seed, cfg.stream);
  const Part p = chunked_reduce<Part>(
      cfg.n_samples, cfg.workers,
      [&](std::int64_t b, std::int64_t e) {
        Part r{Vector::Zero(m), Vector::Zero(m), e - b};
        Vector G(m), y(m), g(m);
        for (std::int64_t i = b; i < e; ++i) {
          rng.normals(static_cast<std::uint64_t>(i), G);
          y = lambda.cwiseProduct(G);
          f.value_and_subgradient(y, g);
          const Vector a = (q == 1) ? Vector(g.cwiseAbs()) : Vector(g.cwiseAbs2());
          r.sq += a;
          r.s2q += a.cwiseAbs2();
        }
        return r;
      },
      [](Part& a, const Part& o) {
        a.sq += o.sq;
        a.s2q += o.s2q;
        a.n += o.n;
      });
  DiagonalPartials d;
  const double N = static_cast<double>(p.n);
  d.n = p.n;
  const Vector mq = p.sq / N;
  const Vector se_mq = ((p.s2q / N - mq.cwiseAbs2()).cwiseMax(0.0) / N).cwiseSqrt();
  d.raw.resize(m);
  d.stderr_rho.resize(m);
  for (Index i = 0; i < m; ++i) {
    if (q == 1) {
      d.raw[i] = mq[i];
      d.stderr_rho[i] = std::abs(lambda[i]) * se_mq[i];
    } else {
      d.raw[i] = std::sqrt(mq[i]);
      d.stderr_rho[i] = d.raw[i] > 0 ? std::abs(lambda[i]) * se_mq[i] / (2.0 * d.raw[i]) : 0.0;
    }
  }
  d.rho = lambda.cwiseAbs().cwiseProduct(d.raw);
  return d;
}

BalancedDiagonal balance_partials(const NormPtr& fp, const SampleConfig& cfg, const BalanceOptions& o) {
  const Norm& f = *fp;
  const Index m = f.dim();
  if (o.q != 1 && o.q != 2) throw InvalidArgument("q must be 1 or 2");
  if (!(o.target_residual > 0.0)) throw InvalidArgument("target residual must be positive");
  Vector lambda = o.lambda0.size() ? Vector(o.lambda0.cwiseAbs()) : Vector::Ones(m);
  if (lambda.size() != m || !(lambda.norm() > 0.0)) throw InvalidArgument("invalid starting lambda");
  lambda /= lambda.norm();

  BalancedDiagonal res;
  res.q = o.q;
  SampleConfig block = cfg;
  block.stream = cfg.stream + streams::balance;
  SampleConfig check = cfg;
  check.stream = cfg.stream + streams::balance_check;
  check.n_samples = o.check_samples > 0 ? o.check_samples : 4 * cfg.n_samples;
  int doublings = 0;
  Vector prev_rho;
  // Step exponent with backtracking: under common random numbers the in-sample residual is a
  // deterministic function of lambda, so a step that raises it is undone and the exponent halved.
  // Max-type norms respond to lambda_i with elasticity far above 1 and need the small steps.
  double eta = o.damping;
  Vector accepted_lambda;
  double accepted_residual = std::numeric_limits<double>::infinity();
  Vector accepted_rho;
  for (int it = 0; it < o.max_iters; ++it) {
    res.iterations = it + 1;
    const DiagonalPartials d = diagonal_partials(f, lambda, o.q, block);
    const Vector& rho = d.rho;
    const double raw_scale = d.raw.maxCoeff();
    for (Index i = 0; i < m; ++i) {
      if (!(d.raw[i] > 1e-12 * raw_scale)) {
        throw DegenerateDirectionError("partial derivative " + std::to_string(i) +
                                       " vanishes on the sample: the function is constant along that coordinate");
      }
      const bool rising = prev_rho.size() == m && rho[i] > prev_rho[i];
      if (lambda[i] < 1e-8 && !rising) {
        throw DegenerateDirectionError("balancing collapsed coordinate " + std::to_string(i) +
                                       ": the function is (nearly) constant along some coordinate direction");
      }
    }
    const double mean = rho.mean();
    if (!(mean > 0.0)) throw DegenerateDirectionError("all partial derivatives vanish");
    const double resid = spread(rho);
    res.block_samples = block.n_samples;
    if (resid >= accepted_residual && accepted_lambda.size() == m && eta > 1e-3) {
      eta *= 0.5;
      lambda = accepted_lambda;
    } else {
      if (resid < accepted_residual) eta = std::min(o.damping, eta * 1.25);
      accepted_lambda = lambda;
      accepted_residual = resid;
      accepted_rho = rho;
      res.in_sample_residual = resid;
      if (resid <= 0.25 * o.target_residual) {
        const DiagonalPartials c = diagonal_partials(f, lambda, o.q, check);
        res.rho = c.rho;
        res.rho_stderr = c.stderr_rho;
        res.residual = spread(c.rho);
        if (res.residual <= o.target_residual) {
          res.converged = true;
          break;
        }
        if (doublings >= o.max_block_doublings) break;
        // The iteration block is too small for the target: enlarge both blocks and keep going.
        ++doublings;
        block.n_samples *= 2;
        block.stream += 1000;
        check.n_samples *= 2;
        check.stream += 1000;
        accepted_residual = std::numeric_limits<double>::infinity();
        eta = o.damping;
        prev_rho.resize(0);
        continue;
      }
      prev_rho = rho;
    }
    const double mean_acc = accepted_rho.mean();
    for (Index i = 0; i < m; ++i) {
      const double ratio = accepted_rho[i] > 0.0 ? mean_acc / accepted_rho[i] : 1e3;
      lambda[i] *= std::pow(std::clamp(ratio, 1e-3, 1e3), eta);
    }
    lambda /= lambda.norm();
  }
  if (accepted_lambda.size() == m && !res.converged) lambda = accepted_lambda;
  if (!res.converged && res.rho.size() == 0) {
    const DiagonalPartials c = diagonal_partials(f, lambda, o.q, check);
    res.rho = c.rho;
    res.rho_stderr = c.stderr_rho;
    res.residual = spread(c.rho);
  }
  res.lambda = lambda;
  return res;
}

BalanceCheck verify_balanced(const NormPtr& f, const Vector& lambda, const SampleConfig& cfg, double residual,
                             int a_budget) {
  const Index m = f->dim();
  const Vector lam = lambda.cwiseAbs();
  const DiagonalPartials d = diagonal_partials(*f, lam, 1, cfg);
  const NormPtr fl = compose_linear(f, lam.asDiagonal().toDenseMatrix());
  const Extremum a = estimate_a(*fl, a_budget, cfg.seed);
  BalanceCheck r;
  r.a = a.value;
  r.a_exact = a.exact;
  Index j = 0;
  const double md = static_cast<double>(m);
  r.ratio = md * d.rho.maxCoeff(&j) / r.a;
  r.ratio_stderr = md * d.stderr_rho[j] / r.a;
  r.mean_l1 = d.rho.mean();
  r.mean_l1_stderr = std::sqrt(d.stderr_rho.cwiseAbs2().sum()) / md;
  r.bound = 1.0 + residual + 3.0 * r.ratio_stderr;
  r.passed = r.ratio <= r.bound;
  r.averaging_ok = r.mean_l1 <= r.a / md + 3.0 * r.mean_l1_stderr + 1e-12;
  return r;
}

}  // namespace concpos
