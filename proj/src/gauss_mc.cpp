#include "concpos/gauss_mc.hpp"

#include "concpos/parallel.hpp"
#include "concpos/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace concpos {

namespace {

void check_config(const SampleConfig& cfg) {
  if (cfg.n_samples < 1) throw InvalidArgument("n_samples must be positive");
  if (!(cfg.confidence > 0.0 && cfg.confidence < 1.0)) throw InvalidArgument("confidence must lie in (0,1)");
}

struct GradPartial {
  Moments f;
  Moments grad_sq;
  Moments euler;
  Vector s1, s2, s4;
  double grad_l1 = 0.0;

  void merge(const GradPartial& o) {
    f.merge(o.f);
    grad_sq.merge(o.grad_sq);
    euler.merge(o.euler);
    s1 += o.s1;
    s2 += o.s2;
    s4 += o.s4;
    grad_l1 += o.grad_l1;
  }
};

GradPartial gradient_pass(const Norm& X, const SampleConfig& cfg) {
  check_config(cfg);
  const Index n = X.dim();
  const CounterRng rng(cfg.seed, cfg.stream + streams::mean);
  return chunked_reduce<GradPartial>(
      cfg.n_samples, cfg.workers,
      [&](std::int64_t b, std::int64_t e) {
        GradPartial p;
        p.s1 = Vector::Zero(n);
        p.s2 = Vector::Zero(n);
        p.s4 = Vector::Zero(n);
        Vector G(n), g(n);
        for (std::int64_t i = b; i < e; ++i) {
          rng.normals(static_cast<std::uint64_t>(i), G);
          const double v = X.value_and_subgradient(G, g);
          p.f.push(v);
          const double gs = g.squaredNorm();
          p.grad_sq.push(gs);
          p.euler.push(g.dot(G));
          p.s1 += g.cwiseAbs();
          const auto sq = g.array().square();
          p.s2 += sq.matrix();
          p.s4 += sq.square().matrix();
          p.grad_l1 += g.lpNorm<1>();
        }
        return p;
      },
      [](GradPartial& a, const GradPartial& o) { a.merge(o); });
}

PartialDerivStats partials_from(const GradPartial& p) {
  PartialDerivStats s;
  const double N = static_cast<double>(p.f.n);
  s.n = p.f.n;
  s.l1 = p.s1 / N;
  const Vector m2 = p.s2 / N;
  const Vector m4 = p.s4 / N;
  s.l2 = m2.cwiseSqrt();
  s.l1_stderr = ((m2 - s.l1.cwiseProduct(s.l1)).cwiseMax(0.0) / N).cwiseSqrt();
  s.l2_stderr.resize(m2.size());
  for (Index i = 0; i < m2.size(); ++i) {
    const double se_m2 = std::sqrt(std::max(0.0, m4[i] - m2[i] * m2[i]) / N);
    s.l2_stderr[i] = s.l2[i] > 0.0 ? se_m2 / (2.0 * s.l2[i]) : 0.0;
  }
  s.A = s.l1.size() ? s.l1.maxCoeff() : 0.0;
  s.grad_sq_mean = p.grad_sq.mean;
  s.grad_sq_stderr = p.grad_sq.stderr_mean();
  s.grad_l1_mean = p.grad_l1 / N;
  s.euler_mean = p.euler.mean;
  s.euler_stderr = p.euler.stderr_mean();
  return s;
}

double sign_or_keep(double g, double current) { return g > 0 ? 1.0 : (g < 0 ? -1.0 : current); }

}  // namespace

MeanVar estimate_mean_var(const Norm& X, const SampleConfig& cfg) {
  check_config(cfg);
  const Index n = X.dim();
  const CounterRng rng(cfg.seed, cfg.stream + streams::mean);
  const Moments m = chunked_reduce<Moments>(
      cfg.n_samples, cfg.workers,
      [&](std::int64_t b, std::int64_t e) {
        Moments p;
        Vector G(n);
        for (std::int64_t i = b; i < e; ++i) {
          rng.normals(static_cast<std::uint64_t>(i), G);
          p.push(X.value(G));
        }
        return p;
      },
      [](Moments& a, const Moments& o) { a.merge(o); });
  return {m.mean, m.variance(), m.stderr_mean(), m.stderr_variance(), m.n};
}

std::vector<double> linear_grid(double lo, double hi, int steps) {
  if (steps < 1) throw InvalidArgument("grid needs at least one step");
  if (steps == 1) return {lo};
  std::vector<double> t(static_cast<std::size_t>(steps));
  for (int i = 0; i < steps; ++i) t[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (steps - 1);
  return t;
}

TailCurve tail_from_counts(Index dim, std::int64_t n_samples, double confidence, double center,
                           const std::vector<double>& t_grid, const std::vector<std::int64_t>& counts) {
  if (counts.size() != t_grid.size()) throw InvalidArgument("counts and grid differ in length");
  TailCurve c;
  c.dim = dim;
  c.n_samples = n_samples;
  c.confidence = confidence;
  c.center = center;
  c.t = t_grid;
  c.count = counts;
  for (std::size_t j = 0; j < t_grid.size(); ++j) {
    const Interval ci = clopper_pearson(counts[j], n_samples, confidence);
    c.p_hat.push_back(static_cast<double>(counts[j]) / static_cast<double>(n_samples));
    c.ci_lo.push_back(std::min(ci.lo, c.p_hat.back()));
    c.ci_hi.push_back(std::max(ci.hi, c.p_hat.back()));
  }
  return c;
}

TailCurve estimate_tail_with_center(const Norm& X, const SampleConfig& cfg, const std::vector<double>& t_grid,
                                    double center) {
  check_config(cfg);
  if (t_grid.empty()) throw InvalidArgument("t grid is empty");
  for (std::size_t j = 0; j < t_grid.size(); ++j) {
    if (!(t_grid[j] > 0.0) || (j > 0 && !(t_grid[j] > t_grid[j - 1]))) {
      throw InvalidArgument("t grid must be positive and strictly ascending");
    }
  }
  if (!(center > 0.0)) throw InvalidArgument("tail center must be positive");
  const Index n = X.dim();
  const std::size_t T = t_grid.size();
  const CounterRng rng(cfg.seed, cfg.stream + streams::tail);
  // hist[c] = number of samples exceeding exactly the first c grid points.
  const auto hist = chunked_reduce<std::vector<std::int64_t>>(
      cfg.n_samples, cfg.workers,
      [&](std::int64_t b, std::int64_t e) {
        std::vector<std::int64_t> h(T + 1, 0);
        Vector G(n);
        for (std::int64_t i = b; i < e; ++i) {
          rng.normals(static_cast<std::uint64_t>(i), G);
          const double dev = std::abs(X.value(G) - center) / center;
          const auto c = std::lower_bound(t_grid.begin(), t_grid.end(), dev) - t_grid.begin();
          ++h[static_cast<std::size_t>(c)];
        }
        return h;
      },
      [](std::vector<std::int64_t>& a, const std::vector<std::int64_t>& o) {
        for (std::size_t i = 0; i < a.size(); ++i) a[i] += o[i];
      });
  std::vector<std::int64_t> counts(T, 0);
  std::int64_t acc = 0;
  for (std::size_t j = T; j-- > 0;) {
    acc += hist[j + 1];
    counts[j] = acc;
  }
  return tail_from_counts(n, cfg.n_samples, cfg.confidence, center, t_grid, counts);
}

TailCurve estimate_tail(const Norm& X, const SampleConfig& cfg, const std::vector<double>& t_grid) {
  const MeanVar mv = estimate_mean_var(X, cfg);
  return estimate_tail_with_center(X, cfg, t_grid, mv.M);
}

PartialDerivStats estimate_partial_norms(const Norm& X, const SampleConfig& cfg) {
  return partials_from(gradient_pass(X, cfg));
}

double sphere_ascent(const Norm& X, Vector& v, int max_iter) {
  const double nv = v.norm();
  if (!(nv > 0.0)) throw InvalidArgument("ascent start must be nonzero");
  v /= nv;
  Vector g(v.size());
  double val = X.value_and_subgradient(v, g);
  for (int it = 0; it < max_iter; ++it) {
    const double ng = g.norm();
    if (!(ng > 0.0)) break;
    Vector w = g / ng;
    Vector gw(v.size());
    const double wv = X.value_and_subgradient(w, gw);
    if (!(wv > val * (1.0 + 1e-15))) break;
    const double step = (w - v).norm();
    v = std::move(w);
    g = std::move(gw);
    val = wv;
    if (step < 1e-13) break;
  }
  return val;
}

Extremum estimate_b(const Norm& X, int restarts, std::uint64_t seed) {
  const Index n = X.dim();
  Extremum best;
  if (auto U = X.functionals()) {
    Index j = 0;
    best.value = U->rowwise().norm().maxCoeff(&j);
    best.argmax = U->row(j).transpose() / best.value;
    best.exact = true;
    return best;
  }
  best.value = -1.0;
  auto consider = [&](Vector v) {
    const double val = sphere_ascent(X, v);
    if (val > best.value) {
      best.value = val;
      best.argmax = v;
    }
  };
  const CounterRng rng(seed, streams::search);
  for (int r = 0; r < std::max(1, restarts); ++r) consider(rng.normals(static_cast<std::uint64_t>(r), n));
  if (n <= 512) {
    for (Index i = 0; i < n; ++i) consider(Vector::Unit(n, i));
  }
  consider(Vector::Ones(n));
  return best;
}

Extremum estimate_a(const Norm& X, int budget, std::uint64_t seed) {
  const Index n = X.dim();
  Extremum best;
  if (auto U = X.functionals()) {
    Index j = 0;
    best.value = U->rowwise().lpNorm<1>().maxCoeff(&j);
    best.argmax = U->row(j).transpose().unaryExpr([](double u) { return u >= 0 ? 1.0 : -1.0; });
    best.exact = true;
    return best;
  }
  if (n <= 20) {
    // The maximum of a convex function on the cube is attained at a vertex; fix eps_0 = +1 by symmetry.
    Vector eps = Vector::Ones(n);
    best.value = -1.0;
    const std::uint64_t total = std::uint64_t{1} << (n - 1);
    for (std::uint64_t mask = 0; mask < total; ++mask) {
      for (Index i = 1; i < n; ++i) eps[i] = ((mask >> (i - 1)) & 1u) ? -1.0 : 1.0;
      const double v = X.value(eps);
      if (v > best.value) {
        best.value = v;
        best.argmax = eps;
      }
    }
    best.exact = true;
    return best;
  }
  const CounterRng rng(seed, streams::search);
  best.value = -1.0;
  Vector g(n);
  for (int r = 0; r < std::max(1, budget); ++r) {
    Vector eps(n);
    if (r == 0) eps.setOnes();
    else rng.signs(static_cast<std::uint64_t>(r), eps);
    double val = X.value_and_subgradient(eps, g);
    // eps <- sign(grad): X(eps') >= <g, eps'> = |g|_1 >= <g, eps> = X(eps).
    for (int it = 0; it < 1000; ++it) {
      Vector next(n);
      for (Index i = 0; i < n; ++i) next[i] = sign_or_keep(g[i], eps[i]);
      if (next == eps) break;
      Vector g2(n);
      const double v2 = X.value_and_subgradient(next, g2);
      if (!(v2 > val)) break;
      eps = std::move(next);
      g = std::move(g2);
      val = v2;
    }
    if (n <= 256) {
      bool improved = true;
      while (improved) {
        improved = false;
        for (Index i = 0; i < n; ++i) {
          eps[i] = -eps[i];
          const double v2 = X.value(eps);
          if (v2 > val * (1.0 + 1e-14)) {
            val = v2;
            improved = true;
          } else {
            eps[i] = -eps[i];
          }
        }
      }
    }
    if (val > best.value) {
      best.value = val;
      best.argmax = eps;
    }
  }
  return best;
}

ConcStats conc_stats(const Norm& X, const SampleConfig& cfg, int b_restarts, int a_budget) {
  const GradPartial p = gradient_pass(X, cfg);
  ConcStats s;
  s.n = X.dim();
  s.samples = p.f.n;
  s.M = p.f.mean;
  s.var = p.f.variance();
  s.stderr_M = p.f.stderr_mean();
  s.stderr_var = p.f.stderr_variance();
  const Extremum b = estimate_b(X, b_restarts, cfg.seed);
  const Extremum a = estimate_a(X, a_budget, cfg.seed);
  s.b = b.value;
  s.b_exact = b.exact;
  s.a = a.value;
  s.a_exact = a.exact;
  s.k = (s.M / s.b) * (s.M / s.b);
  s.stderr_k = 2.0 * s.M * s.stderr_M / (s.b * s.b);
  s.beta = s.var / (s.M * s.M);
  const double rel_var = s.var > 0 ? s.stderr_var / s.var : 0.0;
  const double rel_m = s.M > 0 ? s.stderr_M / s.M : 0.0;
  s.stderr_beta = s.beta * std::sqrt(rel_var * rel_var + 4.0 * rel_m * rel_m);
  s.partials = partials_from(p);
  s.A = s.partials.A;
  s.sc_ratio = s.partials.grad_sq_mean > 0 ? s.var / s.partials.grad_sq_mean : 0.0;
  const double denom = s.partials.l1.squaredNorm();
  s.R = denom > 0 ? s.partials.grad_sq_mean / denom : 0.0;
  s.euler_mean = s.partials.euler_mean;
  s.euler_stderr = s.partials.euler_stderr;
  return s;
}

std::string to_string(BoundId id) {
  switch (id) {
    case BoundId::gauss: return "gauss";
    case BoundId::two_level: return "two_level";
    case BoundId::perm: return "perm";
    case BoundId::uncond: return "uncond";
  }
  return "unknown";
}

BoundId bound_id_from_string(const std::string& s) {
  if (s == "gauss") return BoundId::gauss;
  if (s == "two_level") return BoundId::two_level;
  if (s == "perm") return BoundId::perm;
  if (s == "uncond") return BoundId::uncond;
  throw InvalidArgument("unknown bound id '" + s + "'");
}

BoundReport check_deviation_bound(const TailCurve& tail, const BoundParams& P, BoundId id) {
  if (tail.dim != P.n) {
    throw InvalidArgument("mismatched dimensions: tail on R^" + std::to_string(tail.dim) + ", parameters for R^" +
                          std::to_string(P.n));
  }
  if (!(P.b > 0.0 && P.M > 0.0)) throw InvalidArgument("bound parameters need b > 0 and M > 0");
  BoundReport r;
  r.id = id;
  r.t = tail.t;
  const double n = static_cast<double>(P.n);
  const double s = P.M / P.b;  // sqrt(k)
  double log_term = 0.0;
  if (id == BoundId::two_level) {
    if (!(P.a > 0.0 && P.A > 0.0)) throw InvalidArgument("two_level bound needs a > 0 and A > 0");
    log_term = std::log(std::exp(1.0) + P.b * P.b / (P.a * P.A));
  } else if (id == BoundId::perm) {
    if (!(P.a > 0.0)) throw InvalidArgument("perm bound needs a > 0");
    log_term = std::log(n * P.b * P.b / (P.a * P.a));
    if (log_term <= 1e-9) r.gauss_fallback = true;
  }
  const double k = s * s;
  const double uncond_log = std::log(std::exp(1.0) * n / k);
  for (double t : tail.t) {
    double phi = 0.0;
    const bool gauss_form = id == BoundId::gauss || r.gauss_fallback;
    if (gauss_form) {
      phi = t * t * s * s;
    } else if (id == BoundId::uncond) {
      phi = std::max(t * t * k, t * std::sqrt(k * std::max(0.0, uncond_log)));
    } else {
      phi = std::max(t * t * s * s, t * s * std::sqrt(log_term));
    }
    r.phi.push_back(phi);
  }
  // Constant fit on points with enough exceedances: -log p = -log C + c phi.
  std::vector<double> xs, ys;
  for (std::size_t j = 0; j < tail.t.size(); ++j) {
    if (tail.count[j] >= kMinFitCount && tail.p_hat[j] > 0.0) {
      xs.push_back(r.phi[j]);
      ys.push_back(-std::log(tail.p_hat[j]));
    }
  }
  r.fit_points = xs.size();
  if (xs.size() >= 2) {
    const LineFit f = fit_line(xs, ys);
    r.c_fit = f.slope;
    r.C_fit = std::exp(-f.intercept);
    r.fit_r2 = f.r2;
  }
  const bool explicit_gauss = id == BoundId::gauss;
  r.C_ref = explicit_gauss ? 2.0 : 4.0;
  r.c_envelope = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < tail.t.size(); ++j) {
    if (tail.ci_lo[j] > 0.0 && r.phi[j] > 0.0) {
      r.c_envelope = std::min(r.c_envelope, (std::log(r.C_ref) - std::log(tail.ci_lo[j])) / r.phi[j]);
    }
  }
  bool all_below = true;
  for (std::size_t j = 0; j < tail.t.size(); ++j) {
    const double ref = explicit_gauss ? 2.0 * std::exp(-0.5 * r.phi[j]) : r.C_fit * std::exp(-r.c_fit * r.phi[j]);
    r.reference.push_back(ref);
    r.margin.push_back(tail.ci_lo[j] - ref);
    if (explicit_gauss && tail.ci_lo[j] > ref) all_below = false;
  }
  r.passed = explicit_gauss ? all_below : (r.fit_points >= 2 && r.c_fit > 0.0 && r.c_envelope > 0.0);
  return r;
}

}  // namespace concpos
