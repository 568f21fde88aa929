#include "concpos/sections.hpp"

#include "concpos/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace concpos {

SubspaceBasis sample_subspace(Index n, Index k, std::uint64_t seed) {
  if (n < 1 || k < 1 || k > n) throw InvalidArgument("sample_subspace needs 1 <= k <= n");
  const CounterRng rng(seed, streams::subspace);
  Matrix G(n, k);
  for (Index j = 0; j < k; ++j) G.col(j) = rng.normals(static_cast<std::uint64_t>(j), n);
  Eigen::HouseholderQR<Matrix> qr(G);
  Matrix Q = qr.householderQ() * Matrix::Identity(n, k);
  const Matrix R = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  for (Index j = 0; j < k; ++j)
    if (R(j, j) < 0) Q.col(j) = -Q.col(j);
  return {Q, seed};
}

double eps_from_ratio(double r) { return (r - 1.0) / (r + 1.0); }
double ratio_from_eps(double e) { return (1.0 + e) / (1.0 - e); }

SphericalityReport sphericality(const NormPtr& X, const Matrix& E, const SphericalityOptions& o) {
  const NormPtr Y = restrict_to_subspace(X, E);
  const Index k = Y->dim();
  const CounterRng rng(o.seed, streams::search);
  SphericalityReport r;
  r.max_val = -1.0;
  auto try_max = [&](Vector v) {
    const double val = sphere_ascent(*Y, v, 500);
    if (val > r.max_val) {
      r.max_val = val;
      r.argmax = v;
    }
  };
  for (int s = 0; s < o.max_starts; ++s) try_max(rng.normals(static_cast<std::uint64_t>(s), k));
  for (Index i = 0; i < k; ++i) try_max(Vector::Unit(k, i));

  r.min_val = r.max_val;
  r.argmin = r.argmax;
  std::vector<Vector> starts;
  for (int s = 0; s < o.min_starts; ++s) starts.push_back(rng.normals(static_cast<std::uint64_t>(100000 + s), k));
  for (Index i = 0; i < k; ++i) {
    starts.push_back(Vector::Unit(k, i));
    starts.push_back(-Vector::Unit(k, i));
  }
  Vector g(k);
  for (Vector v : starts) {
    v.normalize();
    for (int t = 0; t < o.min_steps; ++t) {
      const double val = Y->value_and_subgradient(v, g);
      if (val < r.min_val) {
        r.min_val = val;
        r.argmin = v;
        if (r.max_val / r.min_val > o.abort_ratio) {
          r.aborted = true;
          break;
        }
      }
      const Vector tang = g - g.dot(v) * v;
      const double nt = tang.norm();
      if (nt <= 1e-14 * (1.0 + g.norm())) break;
      v -= (0.5 / std::sqrt(t + 1.0)) * tang / nt;
      v.normalize();
    }
    if (r.aborted) break;
  }
  r.ratio = r.max_val / r.min_val;
  r.spherical_eps = eps_from_ratio(r.ratio);
  return r;
}

KrTrial kr_trial(const NormPtr& X, Index k, double eps, int trials, std::uint64_t seed, const SphericalityOptions& opts,
                 int workers) {
  if (!(eps > 0.0 && eps < 1.0)) throw InvalidArgument("eps must lie in (0,1)");
  if (trials < 1) throw InvalidArgument("trials must be positive");
  const Index n = X->dim();
  KrTrial t;
  t.k = k;
  t.required = (2 * trials + 2) / 3;
  // Trials run in parallel batches; outcomes are consumed in index order so the early
  // decision is independent of the worker count.
  const int batch = std::max(1, resolve_workers(workers));
  std::vector<char> ok(static_cast<std::size_t>(trials), 0);
  bool decided = false;
  for (int b0 = 0; b0 < trials && !decided; b0 += batch) {
    const int b1 = std::min(trials, b0 + batch);
    parallel_for(b1 - b0, workers, [&](std::int64_t j) {
      const int i = b0 + static_cast<int>(j);
      const std::uint64_t s = derive_seed(seed, static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(i));
      SphericalityOptions so = opts;
      so.abort_ratio = ratio_from_eps(eps) * (1.0 + 1e-12);
      so.seed = s;
      const SphericalityReport rep = sphericality(X, sample_subspace(n, k, s).E, so);
      ok[static_cast<std::size_t>(i)] = (!rep.aborted && rep.spherical_eps <= eps) ? 1 : 0;
    });
    for (int i = b0; i < b1; ++i) {
      ++t.trials_run;
      t.successes += ok[static_cast<std::size_t>(i)];
      const int failures = t.trials_run - t.successes;
      if (t.successes >= t.required || failures > trials - t.required) {
        decided = true;
        break;
      }
    }
  }
  t.pass = t.successes >= t.required;
  t.ci = clopper_pearson(t.successes, t.trials_run, 0.95);
  t.decisive = t.ci.lo > 2.0 / 3.0 || t.ci.hi < 2.0 / 3.0;
  return t;
}

KrEstimate estimate_kr(const NormPtr& X, double eps, int trials, std::uint64_t seed, const SphericalityOptions& opts,
                       int workers) {
  const Index n = X->dim();
  KrEstimate est;
  auto pass = [&](Index k) {
    est.evaluated.push_back(kr_trial(X, k, eps, trials, seed, opts, workers));
    return est.evaluated.back().pass;
  };
  if (pass(n)) {
    est.k = n;
    return est;
  }
  // Every one-dimensional section is exactly spherical, so k = 1 always passes.
  Index lo = 1, hi = n;
  while (hi - lo > 1) {
    const Index mid = lo + (hi - lo) / 2;
    if (pass(mid)) lo = mid;
    else hi = mid;
  }
  est.k = lo;
  return est;
}

namespace {

Vector project_out(const Matrix& V, Index used, const Vector& x) {
  if (used == 0) return x;
  const auto B = V.leftCols(used);
  Vector y = x - B * (B.transpose() * x);
  return y - B * (B.transpose() * y);
}

}  // namespace

DRBasis dr_basis_positioned(const NormPtr& Yp, const Matrix& contacts_in, const DROptions& o) {
  const Norm& Y = *Yp;
  const Index n = Y.dim();
  Matrix contacts = contacts_in;
  if (contacts.cols() == 0) contacts = john_decomposition(Yp, Matrix::Identity(n, n), 64, o.tol, o.seed).contacts;
  const CounterRng rng(o.seed, streams::search);
  Matrix V(n, n);
  Vector norms(n);
  Vector g(n);
  for (Index k = 0; k < n; ++k) {
    Vector best_v;
    double best = -1.0;
    if (k == n - 1) {
      Index bi = 0;
      double bl = -1.0;
      for (Index i = 0; i < n; ++i) {
        const double l = project_out(V, k, Vector::Unit(n, i)).norm();
        if (l > bl) {
          bl = l;
          bi = i;
        }
      }
      best_v = project_out(V, k, Vector::Unit(n, bi)).normalized();
      best = Y.value(best_v);
    } else {
      std::vector<std::pair<double, Vector>> starts;
      auto add = [&](const Vector& x) {
        Vector p = project_out(V, k, x);
        const double l = p.norm();
        if (l < 1e-8 * std::max(1.0, x.norm())) return;
        p /= l;
        starts.push_back({Y.value(p), std::move(p)});
      };
      for (Index j = 0; j < contacts.cols(); ++j) add(contacts.col(j));
      for (Index i = 0; i < n; ++i) add(Vector::Unit(n, i));
      for (int r = 0; r < o.random_starts; ++r) add(rng.normals(static_cast<std::uint64_t>(k * 1000 + r), n));
      std::stable_sort(starts.begin(), starts.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
      const std::size_t runs = std::min<std::size_t>(starts.size(), static_cast<std::size_t>(o.ascents_per_step));
      for (std::size_t s = 0; s < runs; ++s) {
        Vector v = starts[s].second;
        double val = starts[s].first;
        // Projected fixed-point ascent; monotone because v stays in the complement.
        for (int it = 0; it < 500; ++it) {
          Y.value_and_subgradient(v, g);
          Vector w = project_out(V, k, g);
          const double nw = w.norm();
          if (!(nw > 0.0)) break;
          w /= nw;
          const double wv = Y.value(w);
          if (!(wv > val * (1.0 + 1e-15))) break;
          const double step = (w - v).norm();
          v = std::move(w);
          val = wv;
          if (step < 1e-13) break;
        }
        if (val > best) {
          best = val;
          best_v = v;
        }
      }
      best_v = project_out(V, k, best_v).normalized();
      best = Y.value(best_v);
    }
    V.col(k) = best_v;
    norms[k] = best;
  }
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return norms[a] > norms[b]; });
  DRBasis out;
  out.V.resize(n, n);
  out.norms.resize(n);
  for (Index k = 0; k < n; ++k) {
    out.V.col(k) = V.col(order[static_cast<std::size_t>(k)]);
    out.norms[k] = norms[order[static_cast<std::size_t>(k)]];
  }
  out.worst_margin = std::numeric_limits<double>::infinity();
  for (Index k = 0; k < n; ++k) {
    const double bound = std::sqrt(1.0 - static_cast<double>(k) / static_cast<double>(n));
    out.worst_margin = std::min(out.worst_margin, out.norms[k] - bound);
  }
  if (out.worst_margin < -5.0 * o.tol) {
    throw CertificateError("Dvoretzky-Rogers bound violated by " + std::to_string(-out.worst_margin) +
                           "; the John position is not certified well enough");
  }
  return out;
}

DRBasis dr_basis(const NormPtr& X, const Ellipsoid& john, const DROptions& o) {
  return dr_basis_positioned(compose_linear(X, john.A), Matrix(), o);
}

DRBasis dr_basis(const NormPtr& X, const JohnResult& john, const DROptions& o) {
  return dr_basis_positioned(compose_linear(X, john.ellipsoid.A), john.certificate.contacts, o);
}

JohnsonBasis johnson_fix(const DRBasis& basis, const Norm& Y) {
  const Index n = basis.V.cols();
  if (basis.V.rows() != n || Y.dim() != n) throw InvalidArgument("johnson_fix needs a square basis of the norm's dimension");
  const double err = (basis.V.transpose() * basis.V - Matrix::Identity(n, n)).cwiseAbs().maxCoeff();
  if (err > 1e-10) throw InvalidArgument("input basis is not orthonormal (deviation " + std::to_string(err) + ")");
  Vector norms(n);
  for (Index i = 0; i < n; ++i) norms[i] = Y.value(basis.V.col(i));
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return norms[a] > norms[b]; });
  Matrix U(n, n);
  for (Index i = 0; i < n; ++i) U.col(i) = basis.V.col(order[static_cast<std::size_t>(i)]);

  JohnsonBasis out;
  out.W = U;
  const Index s = n / 2;
  const Index shift = (n % 2 == 1) ? 1 : 0;
  const double r2 = std::sqrt(0.5);
  for (Index i = 1; i <= s; ++i) {
    const Index top = s - i;
    const Index bottom = s + i - 1 + shift;
    if (Y.value(U.col(bottom)) < 0.25) {
      out.W.col(top) = r2 * (U.col(top) + U.col(bottom));
      out.W.col(bottom) = r2 * (U.col(top) - U.col(bottom));
      out.combined.push_back({top, bottom});
    }
  }
  out.norms.resize(n);
  for (Index i = 0; i < n; ++i) out.norms[i] = Y.value(out.W.col(i));
  if (out.norms.minCoeff() < 0.25 - 1e-9) {
    throw CertificateError("paired basis has a vector of norm " + std::to_string(out.norms.minCoeff()) +
                           " < 1/4; the input does not satisfy the Dvoretzky-Rogers bound");
  }
  return out;
}

}  // namespace concpos
