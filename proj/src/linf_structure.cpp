#include "concpos/linf_structure.hpp"

#include "concpos/parallel.hpp"
#include "concpos/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace concpos {

namespace {

constexpr Index kExactSigns = 16;

double sgn_keep(double v, double cur) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : cur); }

// Visits all sign vectors with eps_0 = +1 in Gray-code order; y = V eps is maintained incrementally.
template <class F>
void for_each_sign(const Matrix& V, F&& visit) {
  const Index k = V.cols();
  Vector eps = Vector::Ones(k);
  Vector y = V.rowwise().sum();
  const std::uint64_t total = std::uint64_t{1} << (k - 1);
  visit(y, eps);
  for (std::uint64_t step = 1; step < total; ++step) {
    const int bit = __builtin_ctzll(step);
    const Index i = bit + 1;
    y -= 2.0 * eps[i] * V.col(i);
    eps[i] = -eps[i];
    if ((step & 1023u) == 0) y = V * eps;
    visit(y, eps);
  }
}

struct FaceRun {
  FaceMinimum best;
  bool abandoned = false;
};

FaceRun face_run(const Norm& X, const Matrix& V, Index fixed, const FaceOptions& o, const Vector* warm,
                 double abandon_below) {
  const Index s = V.cols();
  const Index n = V.rows();
  FaceRun out;
  out.best.value = std::numeric_limits<double>::infinity();
  double col_scale = 0.0;
  for (Index i = 0; i < s; ++i) col_scale = std::max(col_scale, V.col(i).norm());
  const CounterRng rng(o.seed, streams::search);
  Vector g(n);
  auto consider = [&](const Vector& c, double v, const Vector& gg) {
    if (v < out.best.value) {
      out.best.value = v;
      out.best.coeffs = c;
      out.best.subgradient = gg;
    }
  };
  for (int st = 0; st < std::max(1, o.starts); ++st) {
    Vector c = Vector::Zero(s);
    if (st == 0 && warm) c = *warm;
    else if (st > 0)
      for (Index i = 0; i < s; ++i) c[i] = 2.0 * rng.uniform(static_cast<std::uint64_t>(st), static_cast<std::uint64_t>(i)) - 1.0;
    c[fixed] = 1.0;
    Vector y = V * c;
    for (int t = 0; t < o.steps; ++t) {
      const double v = X.value_and_subgradient(y, g);
      consider(c, v, g);
      if (v < abandon_below) {
        out.abandoned = true;
        return out;
      }
      Vector d = V.transpose() * g;
      d[fixed] = 0.0;
      for (Index i = 0; i < s; ++i) {
        if ((c[i] >= 1.0 && d[i] < 0.0) || (c[i] <= -1.0 && d[i] > 0.0)) d[i] = 0.0;
      }
      const double nd = d.norm();
      if (nd <= 1e-12 * (1.0 + g.norm() * col_scale)) {
        out.best.value = v;
        out.best.coeffs = c;
        out.best.subgradient = g;
        out.best.certified = true;
        return out;
      }
      c -= (1.0 / std::sqrt(t + 1.0)) * d / nd;
      c = c.cwiseMax(-1.0).cwiseMin(1.0);
      c[fixed] = 1.0;
      y.noalias() = V * c;
    }
  }
  if (!o.polish) return out;
  // Coordinate golden-section polish of the best point (each 1-D restriction is convex).
  Vector c = out.best.coeffs;
  Vector y = V * c;
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int sweep = 0; sweep < 2; ++sweep) {
    for (Index i = 0; i < s; ++i) {
      if (i == fixed) continue;
      const Vector base = y - c[i] * V.col(i);
      auto phi = [&](double a) { return X.value(base + a * V.col(i)); };
      double lo = -1.0, hi = 1.0;
      double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
      double f1 = phi(x1), f2 = phi(x2);
      for (int it = 0; it < 40; ++it) {
        if (f1 < f2) {
          hi = x2;
          x2 = x1;
          f2 = f1;
          x1 = hi - gr * (hi - lo);
          f1 = phi(x1);
        } else {
          lo = x1;
          x1 = x2;
          f1 = f2;
          x2 = lo + gr * (hi - lo);
          f2 = phi(x2);
        }
      }
      const double a = 0.5 * (lo + hi);
      const double fa = phi(a);
      if (fa < X.value(y)) {
        c[i] = a;
        y = base + a * V.col(i);
      }
    }
  }
  const double v = X.value_and_subgradient(y, g);
  if (v < out.best.value) {
    out.best.value = v;
    out.best.coeffs = c;
    out.best.subgradient = g;
  }
  if (out.best.value < abandon_below) out.abandoned = true;
  return out;
}

}  // namespace

RademacherMean rademacher_mean(const Norm& X, const Matrix& V, const SampleConfig& cfg) {
  const Index k = V.cols();
  if (k < 1) throw InvalidArgument("rademacher_mean needs at least one vector");
  if (V.rows() != X.dim()) throw InvalidArgument("vectors live in the wrong dimension");
  RademacherMean r;
  if (k <= kExactSigns) {
    double sum = 0.0;
    std::uint64_t count = 0;
    for_each_sign(V, [&](const Vector& y, const Vector&) {
      sum += X.value(y);
      ++count;
    });
    r.value = sum / static_cast<double>(count);
    r.exact = true;
    return r;
  }
  const CounterRng rng(cfg.seed, cfg.stream + streams::rademacher);
  const bool diagonal = V.rows() == V.cols() && V.isDiagonal(0.0);
  const Vector diag = diagonal ? Vector(V.diagonal()) : Vector();
  const Moments m = chunked_reduce<Moments>(
      cfg.n_samples, cfg.workers,
      [&](std::int64_t b, std::int64_t e) {
        Moments p;
        Vector eps(k), y(V.rows());
        for (std::int64_t i = b; i < e; ++i) {
          rng.signs(static_cast<std::uint64_t>(i), eps);
          if (diagonal) y = diag.cwiseProduct(eps);
          else y.noalias() = V * eps;
          p.push(X.value(y));
        }
        return p;
      },
      [](Moments& a, const Moments& o) { a.merge(o); });
  r.value = m.mean;
  r.stderr_value = m.stderr_mean();
  return r;
}

SignMax sign_max(const Norm& X, const Matrix& V, int restarts, std::uint64_t seed, const Vector* warm) {
  const Index k = V.cols();
  if (k < 1) throw InvalidArgument("sign_max needs at least one vector");
  SignMax best;
  best.value = -1.0;
  if (k <= kExactSigns) {
    for_each_sign(V, [&](const Vector& y, const Vector& eps) {
      const double v = X.value(y);
      if (v > best.value) {
        best.value = v;
        best.signs = eps;
      }
    });
    best.exact = true;
    return best;
  }
  const CounterRng rng(seed, streams::search);
  const Index n = V.rows();
  std::vector<Vector> starts;
  if (warm && warm->size() == k) starts.push_back(*warm);
  starts.push_back(Vector::Ones(k));
  for (int r = 0; r < restarts; ++r) {
    Vector e(k);
    rng.signs(static_cast<std::uint64_t>(r), e);
    starts.push_back(e);
  }
  Vector g(n);
  for (Vector eps : starts) {
    Vector y = V * eps;
    double val = X.value_and_subgradient(y, g);
    for (int it = 0; it < 200; ++it) {
      const Vector d = V.transpose() * g;
      Vector next(k);
      for (Index i = 0; i < k; ++i) next[i] = sgn_keep(d[i], eps[i]);
      if (next == eps) break;
      Vector y2 = V * next;
      Vector g2(n);
      const double v2 = X.value_and_subgradient(y2, g2);
      if (!(v2 > val)) break;
      eps = std::move(next);
      y = std::move(y2);
      g = std::move(g2);
      val = v2;
    }
    bool improved = true;
    int sweeps = 0;
    while (improved && sweeps++ < 50) {
      improved = false;
      for (Index i = 0; i < k; ++i) {
        const Vector y2 = y - 2.0 * eps[i] * V.col(i);
        const double v2 = X.value(y2);
        if (v2 > val * (1.0 + 1e-14)) {
          y = y2;
          eps[i] = -eps[i];
          val = v2;
          improved = true;
        }
      }
    }
    if (val > best.value) {
      best.value = val;
      best.signs = eps;
    }
  }
  return best;
}

FaceMinimum face_minimum(const Norm& X, const Matrix& V, Index fixed, const FaceOptions& opts, const Vector* warm) {
  if (fixed < 0 || fixed >= V.cols()) throw InvalidArgument("fixed index out of range");
  if (V.cols() == 1) {
    FaceMinimum f;
    f.coeffs = Vector::Ones(1);
    f.subgradient = X.subgradient(V.col(0));
    f.value = X.value(V.col(0));
    f.certified = true;
    return f;
  }
  return face_run(X, V, fixed, opts, warm, -std::numeric_limits<double>::infinity()).best;
}

CubeBounds verify_cube_equivalence(const Norm& X, const std::vector<Index>& sigma, const Matrix& V,
                                   const FaceOptions& opts) {
  if (sigma.empty()) throw InvalidArgument("sigma is empty");
  Matrix Vs(V.rows(), static_cast<Index>(sigma.size()));
  for (std::size_t i = 0; i < sigma.size(); ++i) {
    if (sigma[i] < 0 || sigma[i] >= V.cols()) throw InvalidArgument("sigma index out of range");
    Vs.col(static_cast<Index>(i)) = V.col(sigma[i]);
  }
  CubeBounds b;
  b.c_low = std::numeric_limits<double>::infinity();
  b.c_low_certified = true;
  for (Index j = 0; j < Vs.cols(); ++j) {
    const FaceMinimum f = face_minimum(X, Vs, j, opts);
    b.c_low = std::min(b.c_low, f.value);
    b.c_low_certified = b.c_low_certified && f.certified;
  }
  const SignMax sm = sign_max(X, Vs, 8, opts.seed);
  b.c_up = sm.value;
  b.c_up_exact = sm.exact;
  return b;
}

CubeEmbeddingCertificate find_linf_subset(const Norm& X, const Matrix& V, double min_ratio, const SampleConfig& cfg,
                                          const FaceOptions& opts) {
  const Index N = V.cols();
  const Index n = V.rows();
  if (N < 1) throw InvalidArgument("no vectors supplied");
  if (n != X.dim()) throw InvalidArgument("vectors live in the wrong dimension");
  if (!(min_ratio > 0.0 && min_ratio <= 1.0)) throw InvalidArgument("min_ratio must lie in (0,1]");
  Vector norms(N);
  for (Index i = 0; i < N; ++i) norms[i] = X.value(V.col(i));
  for (Index i = 0; i < N; ++i) {
    if (norms[i] < 1.0 - 1e-12) {
      throw InvalidArgument("vector " + std::to_string(i) + " has norm " + std::to_string(norms[i]) +
                            " < 1; rescale before searching");
    }
  }
  CubeEmbeddingCertificate cert;
  cert.min_norm = norms.minCoeff();
  cert.threshold = min_ratio * cert.min_norm;
  const RademacherMean Mn = rademacher_mean(X, V, cfg);
  cert.M_n = Mn.value;
  cert.M_n_stderr = Mn.stderr_value;
  cert.M_n_exact = Mn.exact;
  const double upper_cap = 4.0 * cert.M_n + 1e-6;

  Index first = 0;
  norms.maxCoeff(&first);
  struct Face {
    Vector coeffs;
    Vector g;
    double value;
    bool certified;
  };
  std::vector<Index> sigma{first};
  std::vector<Face> faces{{Vector::Ones(1), X.subgradient(V.col(first)), norms[first], true}};
  cert.c_low = norms[first];
  cert.c_up = norms[first];
  cert.c_up_exact = true;
  cert.c_low_certified = true;
  cert.c_low_history.push_back(cert.c_low);
  cert.c_up_history.push_back(cert.c_up);
  Vector best_signs = Vector::Ones(1);
  std::vector<bool> used(static_cast<std::size_t>(N), false), banned(static_cast<std::size_t>(N), false);
  used[static_cast<std::size_t>(first)] = true;

  // Candidates are screened with a light face solver; the final sigma is re-verified in full below.
  FaceOptions quick = opts;
  quick.starts = 2;
  quick.steps = 150;
  quick.polish = false;
  struct Candidate {
    double c_low = -1.0;
    bool certified = false;
    bool abandoned = true;
    std::vector<Face> faces;
  };
  for (;;) {
    const Index s = static_cast<Index>(sigma.size());
    Matrix Vs(n, s + 1);
    for (Index i = 0; i < s; ++i) Vs.col(i) = V.col(sigma[static_cast<std::size_t>(i)]);
    std::vector<Index> pool;
    for (Index i = 0; i < N; ++i)
      if (!used[static_cast<std::size_t>(i)] && !banned[static_cast<std::size_t>(i)]) pool.push_back(i);
    if (pool.empty()) break;
    std::vector<Candidate> cand(pool.size());
    parallel_for(static_cast<std::int64_t>(pool.size()), cfg.workers, [&](std::int64_t ci) {
      const Index idx = pool[static_cast<std::size_t>(ci)];
      Matrix W = Vs;
      W.col(s) = V.col(idx);
      Candidate c;
      c.faces.resize(static_cast<std::size_t>(s + 1));
      double low = cert.c_low;
      bool certified = cert.c_low_certified;
      const double col_scale = std::max(norms.maxCoeff(), V.col(idx).norm());
      // Existing faces gain one coordinate; a certified optimum stays certified if its derivative vanishes.
      for (Index j = 0; j < s; ++j) {
        const Face& f = faces[static_cast<std::size_t>(j)];
        const double dnew = V.col(idx).dot(f.g);
        Face nf;
        if (f.certified && std::abs(dnew) <= 1e-12 * (1.0 + f.g.norm() * col_scale)) {
          nf = {Vector(s + 1), f.g, f.value, true};
          nf.coeffs << f.coeffs, 0.0;
        } else {
          Vector warm(s + 1);
          warm << f.coeffs, 0.0;
          FaceRun r = face_run(X, W, j, quick, &warm, cert.threshold);
          if (r.abandoned) return;
          nf = {r.best.coeffs, r.best.subgradient, std::min(r.best.value, f.value), r.best.certified};
        }
        low = std::min(low, nf.value);
        certified = certified && nf.certified;
        c.faces[static_cast<std::size_t>(j)] = std::move(nf);
      }
      Vector zero = Vector::Zero(s + 1);
      FaceRun r = face_run(X, W, s, quick, &zero, cert.threshold);
      if (r.abandoned) return;
      c.faces[static_cast<std::size_t>(s)] = {r.best.coeffs, r.best.subgradient, r.best.value, r.best.certified};
      low = std::min(low, r.best.value);
      certified = certified && r.best.certified;
      c.c_low = low;
      c.certified = certified;
      c.abandoned = false;
      cand[static_cast<std::size_t>(ci)] = std::move(c);
    });
    std::ptrdiff_t pick = -1;
    for (std::size_t ci = 0; ci < cand.size(); ++ci) {
      if (cand[ci].abandoned || cand[ci].c_low < cert.threshold) continue;
      if (pick < 0 || cand[ci].c_low > cand[static_cast<std::size_t>(pick)].c_low * (1.0 + 1e-12)) pick = static_cast<std::ptrdiff_t>(ci);
    }
    if (pick < 0) break;
    const Index idx = pool[static_cast<std::size_t>(pick)];
    Matrix W = Vs;
    W.col(s) = V.col(idx);
    Vector warm(s + 1);
    warm << best_signs, 1.0;
    const SignMax sm = sign_max(X, W, 8, opts.seed, &warm);
    const double up = std::max(sm.value, cert.c_up);
    if (up > upper_cap) {
      banned[static_cast<std::size_t>(idx)] = true;
      ++cert.rejected_upper;
      continue;
    }
    Candidate& c = cand[static_cast<std::size_t>(pick)];
    sigma.push_back(idx);
    used[static_cast<std::size_t>(idx)] = true;
    faces = std::move(c.faces);
    cert.c_low = c.c_low;
    cert.c_low_certified = c.certified;
    cert.c_up = up;
    cert.c_up_exact = sm.exact;
    best_signs = sm.signs;
    cert.c_low_history.push_back(cert.c_low);
    cert.c_up_history.push_back(cert.c_up);
  }
  for (;;) {
    const CubeBounds vb = verify_cube_equivalence(X, sigma, V, opts);
    if (vb.c_low < cert.c_low) {
      cert.c_low = vb.c_low;
      cert.c_low_certified = vb.c_low_certified;
    }
    if (vb.c_up > cert.c_up) {
      cert.c_up = vb.c_up;
      cert.c_up_exact = vb.c_up_exact;
    }
    if (cert.c_low >= cert.threshold || sigma.size() == 1) break;
    // Full verification found a lower face minimum than screening: drop the last index and retry.
    sigma.pop_back();
    cert.c_low_history.pop_back();
    cert.c_up_history.pop_back();
    cert.c_low = cert.c_low_history.back();
    cert.c_up = cert.c_up_history.back();
    cert.notes.push_back("dropped an index after full verification");
  }
  cert.c_low_history.back() = cert.c_low;
  cert.c_up_history.back() = cert.c_up;
  cert.sigma = sigma;
  cert.upper_ok = cert.c_up <= upper_cap;
  cert.banach_mazur_ok = cert.c_up / cert.c_low <= 32.0 * cert.M_n;
  cert.notes.push_back(cert.c_up_exact ? "c_up by exact sign enumeration" : "c_up by local search (lower bound)");
  cert.notes.push_back(cert.c_low_certified ? "c_low certified by KKT conditions on every face"
                                            : "c_low is the best value found by projected subgradient descent");
  cert.notes.push_back(cert.M_n_exact ? "M_n exact" : "M_n by Monte Carlo over signs");
  if (cert.rejected_upper > 0)
    cert.notes.push_back(std::to_string(cert.rejected_upper) + " candidates refused by the 4 M_n upper cap");
  return cert;
}

RudEstimate estimate_rud(const Norm& X, const Matrix& B, const SampleConfig& cfg, int n_probes) {
  const Index n = B.cols();
  if (B.rows() != X.dim()) throw InvalidArgument("basis lives in the wrong dimension");
  Eigen::FullPivLU<Matrix> lu(B);
  if (lu.rank() < n) throw SingularMatrixError("basis is not invertible");
  RudEstimate r;
  r.L_hat = 1.0;
  r.best_probe = Vector::Unit(n, 0);
  r.exact = n <= kExactSigns;
  std::vector<Vector> probes;
  probes.push_back(Vector::Unit(n, 0));
  probes.push_back(Vector::Ones(n));
  const CounterRng rng(cfg.seed, cfg.stream + streams::probes);
  for (int p = 0; p < n_probes; ++p) probes.push_back(rng.normals(static_cast<std::uint64_t>(p), n));
  SampleConfig mc = cfg;
  mc.n_samples = std::min<std::int64_t>(cfg.n_samples, kRudSignSamples);
  for (const auto& y : probes) {
    const Matrix Vy = B * y.asDiagonal();
    const double mean = rademacher_mean(X, Vy, mc).value;
    if (!(mean > 0.0)) continue;
    const double ratio = sign_max(X, Vy, 4, cfg.seed).value / mean;
    if (ratio > r.L_hat) {
      r.L_hat = ratio;
      r.best_probe = y;
    }
  }
  r.n_probes = static_cast<int>(probes.size());
  return r;
}

}  // namespace concpos
