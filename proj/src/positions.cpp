#include "concpos/positions.hpp"

#include "concpos/nnls.hpp"
#include "concpos/parallel.hpp"
#include "concpos/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace concpos {

Matrix inverse_sqrt_spd(const Matrix& Q) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (Q + Q.transpose()));
  if (es.info() != Eigen::Success) throw ConvergenceError("eigendecomposition failed");
  const Vector& ev = es.eigenvalues();
  if (!(ev.minCoeff() > 0.0)) throw SingularMatrixError("matrix is not positive definite");
  Matrix R = es.eigenvectors() * ev.cwiseSqrt().cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
  return 0.5 * (R + R.transpose());
}

namespace {

double logdet_spd(const Matrix& S) {
  Eigen::LLT<Matrix> llt(0.5 * (S + S.transpose()));
  if (llt.info() != Eigen::Success) throw SingularMatrixError("matrix is not positive definite");
  return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

void refresh(const Matrix& P, const Vector& w, Matrix& Xinv, Vector& kappa) {
  const Matrix X = P.transpose() * w.asDiagonal() * P;
  Xinv = X.ldlt().solve(Matrix::Identity(P.cols(), P.cols()));
  kappa = (P * Xinv).cwiseProduct(P).rowwise().sum();
}

struct Probe {
  double value;
  Vector v;
};

std::vector<Probe> ascend_all(const Norm& Y, const std::vector<Vector>& starts) {
  std::vector<Probe> out;
  out.reserve(starts.size());
  for (Vector v : starts) {
    if (!(v.norm() > 0.0)) continue;
    const double val = sphere_ascent(Y, v, 500);
    out.push_back({val, std::move(v)});
  }
  return out;
}

bool contains_direction(const std::vector<Vector>& set, const Vector& g) {
  const double ng = g.norm();
  for (const auto& w : set) {
    if ((w - g).norm() <= 1e-10 * ng || (w + g).norm() <= 1e-10 * ng) return true;
  }
  return false;
}

Matrix stack_rows(const std::vector<Vector>& rows, Index n) {
  Matrix P(static_cast<Index>(rows.size()), n);
  for (std::size_t i = 0; i < rows.size(); ++i) P.row(static_cast<Index>(i)) = rows[i].transpose();
  return P;
}

// Unit directions u with Y(u) >= thr, deduplicated up to sign.
std::vector<Vector> dedupe_unit(const std::vector<Probe>& probes, double thr) {
  std::vector<Vector> out;
  for (const auto& p : probes) {
    if (p.value < thr) continue;
    Vector u = p.v / p.v.norm();
    bool dup = false;
    for (const auto& w : out) {
      if (std::abs(w.dot(u)) > 1.0 - 1e-9) {
        dup = true;
        break;
      }
    }
    if (!dup) out.push_back(std::move(u));
  }
  return out;
}

// Weights c >= 0 minimizing |sum c_j u_j u_j^T - I|_F; off-diagonal entries carry weight sqrt(2).
JohnCertificate decompose(const std::vector<Vector>& contacts, Index n) {
  JohnCertificate cert;
  cert.n_contacts = static_cast<int>(contacts.size());
  cert.contacts.resize(n, static_cast<Index>(contacts.size()));
  for (std::size_t j = 0; j < contacts.size(); ++j) cert.contacts.col(static_cast<Index>(j)) = contacts[j];
  cert.complete = cert.n_contacts >= n;
  const Index rows = n * (n + 1) / 2;
  Matrix Amat(rows, static_cast<Index>(contacts.size()));
  Vector bvec = Vector::Zero(rows);
  const double r2 = std::sqrt(2.0);
  Index r = 0;
  for (Index i = 0; i < n; ++i) {
    for (Index k = i; k < n; ++k, ++r) {
      const double s = (i == k) ? 1.0 : r2;
      for (std::size_t j = 0; j < contacts.size(); ++j) Amat(r, static_cast<Index>(j)) = s * contacts[j][i] * contacts[j][k];
      if (i == k) bvec[r] = 1.0;
    }
  }
  if (contacts.empty()) {
    cert.decomposition_residual = std::sqrt(static_cast<double>(n));
    cert.weights.resize(0);
    return cert;
  }
  const NnlsResult sol = nnls(Amat, bvec);
  cert.weights = sol.x;
  cert.decomposition_residual = sol.residual;
  return cert;
}

}  // namespace

EnclosingEllipsoid min_volume_enclosing(const Matrix& P, double eps, int max_iter) {
  const Index m = P.rows(), n = P.cols();
  if (m < 1 || n < 1) throw InvalidArgument("enclosing ellipsoid needs points");
  EnclosingEllipsoid out;
  Vector w = Vector::Constant(m, 1.0 / static_cast<double>(m));
  Matrix Xinv;
  Vector kappa;
  refresh(P, w, Xinv, kappa);
  if (!kappa.allFinite()) throw DegenerateNormError("points do not span the space");
  const double nd = static_cast<double>(n);
  int it = 0;
  for (; it < max_iter; ++it) {
    Index jp = 0;
    kappa.maxCoeff(&jp);
    Index jm = -1;
    double km = std::numeric_limits<double>::infinity();
    for (Index j = 0; j < m; ++j) {
      if (w[j] > 0.0 && kappa[j] < km) {
        km = kappa[j];
        jm = j;
      }
    }
    const double ep = kappa[jp] / nd - 1.0;
    const double em = 1.0 - km / nd;
    out.eps = ep;
    if (ep <= eps && em <= eps) {
      out.converged = true;
      break;
    }
    const Index j = (ep >= em) ? jp : jm;
    const double kj = kappa[j];
    double alpha = (kj - nd) / (nd * (kj - 1.0));
    if (j == jm && ep < em) alpha = std::max(alpha, -w[j] / (1.0 - w[j]));
    if (alpha == 0.0) {
      out.converged = ep <= eps;
      break;
    }
    w *= (1.0 - alpha);
    w[j] += alpha;
    if (w[j] < 1e-300) w[j] = 0.0;
    if ((it + 1) % 200 == 0) {
      refresh(P, w, Xinv, kappa);
      continue;
    }
    // Sherman-Morrison for X' = (1-alpha) X + alpha p p^T.
    const Vector xp = Xinv * P.row(j).transpose();
    const double beta = alpha / (1.0 - alpha);
    const double c = beta / (1.0 + beta * kj);
    const Vector z = P * xp;
    Xinv = (Xinv - c * xp * xp.transpose()) / (1.0 - alpha);
    kappa = (kappa - c * z.cwiseProduct(z)) / (1.0 - alpha);
  }
  refresh(P, w, Xinv, kappa);
  out.eps = kappa.maxCoeff() / nd - 1.0;
  out.iterations = it;
  out.weights = w;
  out.Q = nd * (P.transpose() * w.asDiagonal() * P);
  return out;
}

JohnResult john_position(const NormPtr& Xp, double tol, int max_rounds, std::uint64_t seed) {
  if (!(tol > 1e-8 && tol < 0.1)) throw InvalidArgument("john_position tolerance must lie in (1e-8, 0.1)");
  const Norm& X = *Xp;
  const Index n = X.dim();
  const auto U = X.functionals();
  std::vector<Vector> W;
  if (U) {
    for (Index j = 0; j < U->rows(); ++j) {
      Vector g = U->row(j).transpose();
      if (g.norm() > 0.0 && !contains_direction(W, g)) W.push_back(std::move(g));
    }
  } else {
    for (Index i = 0; i < n; ++i) {
      for (double s : {1.0, -1.0}) {
        Vector g = X.subgradient(s * Vector::Unit(n, i));
        if (g.norm() > 0.0 && !contains_direction(W, g)) W.push_back(std::move(g));
      }
    }
    const CounterRng rng(seed, streams::search);
    for (int r = 0; r < 2 * n; ++r) {
      Vector g = X.subgradient(rng.normals(static_cast<std::uint64_t>(1000000 + r), n));
      if (g.norm() > 0.0 && !contains_direction(W, g)) W.push_back(std::move(g));
    }
  }
  const CounterRng rng(seed, streams::search);
  const double mvee_eps = std::min(1e-9, tol * 1e-4);
  JohnResult res;
  double best = -std::numeric_limits<double>::infinity();
  Matrix best_relax_A;
  std::vector<Vector> best_W;
  Vector best_w;
  double best_b = 1.0;
  std::uint64_t start_counter = 0;
  for (int round = 1; round <= max_rounds; ++round) {
    res.rounds = round;
    const Matrix P = stack_rows(W, n);
    const EnclosingEllipsoid E = min_volume_enclosing(P, mvee_eps);
    const Matrix A = inverse_sqrt_spd(E.Q);
    const double relax = -0.5 * logdet_spd(E.Q);
    res.relaxation_logdet = relax;
    double b = 0.0;
    std::vector<Probe> probes;
    if (U) {
      b = (*U * A).rowwise().norm().maxCoeff();
    } else {
      const NormPtr Y = compose_linear(Xp, A);
      std::vector<Vector> starts;
      std::vector<std::pair<double, Index>> support;
      for (Index j = 0; j < P.rows(); ++j)
        if (E.weights[j] > 1e-9) support.push_back({E.weights[j], j});
      std::sort(support.begin(), support.end(), [](auto& a, auto& c) { return a.first > c.first; });
      for (std::size_t s = 0; s < support.size() && s < static_cast<std::size_t>(4 * n); ++s)
        starts.push_back(A * P.row(support[s].second).transpose());
      for (int r = 0; r < 16; ++r) starts.push_back(rng.normals(start_counter++, n));
      if (round == 1 || n <= 32)
        for (Index i = 0; i < n; ++i) starts.push_back(Vector::Unit(n, i));
      probes = ascend_all(*Y, starts);
      for (const auto& p : probes) b = std::max(b, p.value);
    }
    const double bs = std::max(b, 1.0);
    const double feasible = relax - static_cast<double>(n) * std::log(bs);
    if (feasible > best) {
      best = feasible;
      best_relax_A = A;
      best_W = W;
      best_w = E.weights;
      best_b = bs;
    }
    res.logdet_history.push_back(best);
    if (b - 1.0 <= tol) {
      res.certified = true;
      break;
    }
    std::sort(probes.begin(), probes.end(), [](const Probe& a, const Probe& c) { return a.value > c.value; });
    int added = 0;
    for (const auto& p : probes) {
      if (p.value <= 1.0 + 0.1 * tol || added >= 2 * n) break;
      Vector g = X.subgradient(A * p.v);
      if (g.norm() > 0.0 && !contains_direction(W, g)) {
        W.push_back(std::move(g));
        ++added;
      }
    }
    if (added == 0) break;
  }
  res.ellipsoid.A = best_relax_A / best_b;
  res.ellipsoid.logdet = best;
  res.dual_points = stack_rows(best_W, n);

  // Contacts of the returned position from the supporting functionals of its relaxation.
  const NormPtr Yout = compose_linear(Xp, res.ellipsoid.A);
  std::vector<Vector> contacts;
  std::vector<double> cw;
  for (std::size_t j = 0; j < best_W.size(); ++j) {
    if (!(best_w[static_cast<Index>(j)] > 1e-12)) continue;
    const Vector ag = best_relax_A * best_W[j];
    const double len = ag.norm();
    const Vector u = ag / len;
    if (Yout->value(u) < 1.0 - 10.0 * tol) continue;
    contacts.push_back(u);
    cw.push_back(static_cast<double>(n) * best_w[static_cast<Index>(j)] * len * len);
  }
  JohnCertificate cert;
  cert.n_contacts = static_cast<int>(contacts.size());
  cert.contacts.resize(n, static_cast<Index>(contacts.size()));
  cert.weights.resize(static_cast<Index>(contacts.size()));
  Matrix S = Matrix::Zero(n, n);
  for (std::size_t j = 0; j < contacts.size(); ++j) {
    cert.contacts.col(static_cast<Index>(j)) = contacts[j];
    cert.weights[static_cast<Index>(j)] = cw[j];
    S += cw[j] * contacts[j] * contacts[j].transpose();
  }
  cert.decomposition_residual = (S - Matrix::Identity(n, n)).norm();
  cert.complete = cert.n_contacts >= n;
  const Extremum bo = estimate_b(*Yout, 32, seed);
  double bmax = bo.value;
  for (const auto& u : contacts) bmax = std::max(bmax, Yout->value(u));
  cert.containment_gap = bmax - 1.0;
  res.certificate = std::move(cert);
  return res;
}

JohnCertificate john_decomposition(const NormPtr& Xp, const Matrix& A, int n_probes, double tol, std::uint64_t seed) {
  const Index n = Xp->dim();
  const NormPtr Y = compose_linear(Xp, A);
  std::vector<Vector> starts;
  const CounterRng rng(seed, streams::probes);
  if (auto U = Y->functionals()) {
    for (Index j = 0; j < U->rows(); ++j) starts.push_back(U->row(j).transpose());
  }
  for (int r = 0; r < n_probes; ++r) starts.push_back(rng.normals(static_cast<std::uint64_t>(r), n));
  for (Index i = 0; i < n; ++i) starts.push_back(Vector::Unit(n, i));
  const std::vector<Probe> probes = ascend_all(*Y, starts);
  double bmax = 0.0;
  for (const auto& p : probes) bmax = std::max(bmax, p.value);
  JohnCertificate cert = decompose(dedupe_unit(probes, 1.0 - 10.0 * tol), n);
  cert.containment_gap = std::max(bmax, estimate_b(*Y, 16, seed).value) - 1.0;
  return cert;
}

IsotropyReport isotropy_residual(const Norm& X, const SampleConfig& cfg) {
  if (cfg.n_samples < 2) throw InvalidArgument("isotropy needs at least two samples");
  const Index n = X.dim();
  struct Part {
    Matrix S, S2;
    Moments f;
  };
  const CounterRng rng(cfg.seed, cfg.stream + streams::isotropy);
  const Part p = chunked_reduce<Part>(
      cfg.n_samples, cfg.workers,
      [&](std::int64_t b, std::int64_t e) {
        Part q{Matrix::Zero(n, n), Matrix::Zero(n, n), {}};
        Vector G(n), g(n);
        for (std::int64_t i = b; i < e; ++i) {
          rng.normals(static_cast<std::uint64_t>(i), G);
          q.f.push(X.value_and_subgradient(G, g));
          const Matrix O = g * G.transpose();
          q.S += O;
          q.S2 += O.cwiseProduct(O);
        }
        return q;
      },
      [](Part& a, const Part& o) {
        a.S += o.S;
        a.S2 += o.S2;
        a.f.merge(o.f);
      });
  IsotropyReport r;
  const double N = static_cast<double>(p.f.n);
  r.C = p.S / N;
  r.M = p.f.mean;
  r.stderr_M = p.f.stderr_mean();
  const Matrix var = (p.S2 / N - r.C.cwiseProduct(r.C)).cwiseMax(0.0) / N;
  r.matrix_stderr = std::sqrt(var.sum());
  r.trace = r.C.trace();
  // trace(C) is the sample mean of <g, G> = f(G), so its error is that of M.
  r.trace_stderr = r.stderr_M;
  const double target = r.M / static_cast<double>(n);
  const Matrix D = r.C - target * Matrix::Identity(n, n);
  Eigen::JacobiSVD<Matrix> svd(D);
  r.residual = svd.singularValues()[0] / target;
  return r;
}

MinimalMResult minimal_m_position(const NormPtr& Xp, const SampleConfig& cfg, const MinimalMOptions& o) {
  const Norm& X = *Xp;
  const Index n = X.dim();
  const double nd = static_cast<double>(n);
  if (o.steps < 1 || o.batch < 2) throw InvalidArgument("minimal_m needs steps >= 1 and batch >= 2");
  auto unit_det = [&](const Matrix& T) {
    const double d = T.determinant();
    if (!(std::abs(d) > 0.0) || !std::isfinite(d)) throw ConvergenceError("position became singular");
    return Matrix(T * std::pow(std::abs(d), -1.0 / nd));
  };
  Matrix T = o.T0.size() ? unit_det(o.T0) : Matrix::Identity(n, n);
  if (T.rows() != n || T.cols() != n) throw InvalidArgument("starting position has the wrong shape");

  SampleConfig eval = cfg;
  eval.stream = cfg.stream + streams::minimal_m + 1;
  MinimalMResult res;
  {
    const MeanVar mv = estimate_mean_var(*compose_linear(Xp, T), eval);
    res.M_start = mv.M;
    res.M_start_stderr = mv.stderr_M;
  }
  const CounterRng rng(cfg.seed, cfg.stream + streams::minimal_m);
  const double decay = o.decay > 0 ? o.decay : std::max(1.0, o.steps / 10.0);
  const int avg_from = static_cast<int>(std::floor(o.steps * (1.0 - o.average_fraction)));
  Matrix Tavg = Matrix::Zero(n, n);
  int n_avg = 0;
  Vector G(n), y(n), g(n);
  for (int k = 0; k < o.steps; ++k) {
    Matrix C = Matrix::Zero(n, n);
    Moments m;
    for (int i = 0; i < o.batch; ++i) {
      rng.normals(static_cast<std::uint64_t>(k) * static_cast<std::uint64_t>(o.batch) + static_cast<std::uint64_t>(i), G);
      y.noalias() = T * G;
      m.push(X.value_and_subgradient(y, g));
      C.noalias() += g * y.transpose();
    }
    C /= static_cast<double>(o.batch);
    res.batch_means.push_back(m.mean);
    res.batch_stderr.push_back(m.stderr_mean());
    if (!(m.mean <= 10.0 * res.M_start)) {
      throw ConvergenceError("minimal_m diverged at step " + std::to_string(k) + ": batch mean " + std::to_string(m.mean) +
                             " exceeds ten times the start " + std::to_string(res.M_start));
    }
    // Descent direction for left perturbations T -> (I + E) T: the first-order change of E|TG| is <E, C>.
    const Matrix H = (nd / m.mean) * C - Matrix::Identity(n, n);
    const double lr = o.lr0 / (1.0 + k / decay);
    T = unit_det((Matrix::Identity(n, n) - lr * H) * T);
    if (k >= avg_from) {
      Tavg += T;
      ++n_avg;
    }
  }
  res.T = unit_det(Tavg / std::max(1, n_avg));
  res.det = res.T.determinant();
  const IsotropyReport iso = isotropy_residual(*compose_linear(Xp, res.T), eval);
  res.M_final = iso.M;
  res.M_final_stderr = iso.stderr_M;
  res.isotropy_residual = iso.residual;
  res.matrix_stderr = iso.matrix_stderr;
  res.C = iso.C;
  return res;
}

}  // namespace concpos
