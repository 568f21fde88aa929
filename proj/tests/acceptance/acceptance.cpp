// Acceptance checks: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include "concpos/experiment.hpp"
#include "concpos/pipeline.hpp"

#include "../oracles.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

using namespace concpos;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

SampleConfig config(std::int64_t n, std::uint64_t seed, int workers = 0) {
  SampleConfig c;
  c.seed = seed;
  c.n_samples = n;
  c.workers = workers;
  return c;
}

struct Criterion {
  bool ok = true;
  std::ostringstream detail;

  void require(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      detail << " [failed: " << what << "]";
    }
  }
};

int failures = 0;

void report(int id, const std::string& name, const std::function<void(Criterion&)>& body) {
  Criterion c;
  const auto t0 = Clock::now();
  try {
    body(c);
  } catch (const std::exception& e) {
    c.ok = false;
    c.detail << " [exception: " << e.what() << "]";
  }
  if (!c.ok) ++failures;
  std::printf("%s %2d %s:%s (%.1fs)\n", c.ok ? "PASS" : "FAIL", id, name.c_str(), c.detail.str().c_str(),
              seconds_since(t0));
  std::fflush(stdout);
}

NormPtr random_polytope(Index n, Index m, std::uint64_t seed) {
  const CounterRng rng(seed, 0);
  Matrix U(m, n);
  for (Index j = 0; j < m; ++j) U.row(j) = rng.normals(static_cast<std::uint64_t>(j), n).transpose();
  return make_polytope_norm(U);
}

void closed_form_means(Criterion& c) {
  struct Case {
    const char* name;
    NormPtr X;
    double ref;
  };
  const std::vector<Case> cases = {{"l1^64", make_lp_norm(64, 1), oracle::l1_mean(64)},
                                   {"l2^64", make_lp_norm(64, 2), oracle::chi_mean(64)},
                                   {"linf^16", make_linf_norm(16), oracle::linf_mean(16)}};
  for (const Case& k : cases) {
    const auto t0 = Clock::now();
    const MeanVar m = estimate_mean_var(*k.X, config(1000000, 11));
    const double dt = seconds_since(t0);
    const double z = (m.M - k.ref) / m.stderr_M;
    c.detail << " " << k.name << " M=" << m.M << " ref=" << k.ref << " z=" << z << " " << dt << "s";
    c.require(std::abs(z) <= 3.0, std::string(k.name) + " mean off by more than 3 stderr");
    c.require(dt < 10.0, std::string(k.name) + " slower than 10 s");
  }
}

void critical_dimensions(Criterion& c) {
  for (Index n : {64, 256}) {
    const MeanVar m = estimate_mean_var(*make_lp_norm(n, 1), config(200000, 12));
    const double b = estimate_b(*make_lp_norm(n, 1)).value;
    const double k = std::pow(m.M / b, 2), ref = 2.0 * n / std::numbers::pi;
    c.detail << " k(l1^" << n << ")=" << k << "/" << ref;
    c.require(std::abs(k / ref - 1) <= 0.05, "l1 critical dimension off by more than 5%");
  }
  for (Index n : {256, 1024}) {
    const NormPtr X = make_linf_norm(n);
    const MeanVar m = estimate_mean_var(*X, config(200000, 13));
    const double k = std::pow(m.M / estimate_b(*X).value, 2), ref = std::pow(oracle::linf_mean(static_cast<int>(n)), 2);
    c.detail << " k(linf^" << n << ")=" << k << "/" << ref;
    c.require(std::abs(k / ref - 1) <= 0.15, "linf critical dimension off by more than 15%");
  }
}

std::vector<std::pair<std::string, NormPtr>> test_norms() {
  return {{"l1^64", make_lp_norm(64, 1)},
          {"l2^64", make_lp_norm(64, 2)},
          {"l3^32", make_lp_norm(32, 3)},
          {"linf^16", make_linf_norm(16)},
          {"linf^256", make_linf_norm(256)},
          {"wsup^32", make_weighted_sup_norm(Vector::LinSpaced(32, 0.5, 2.0))},
          {"summax(linf^64,12)", direct_sum_max(make_linf_norm(64), 12)},
          {"polytope(16,64)", random_polytope(16, 64, 21)}};
}

void gauss_bound(Criterion& c) {
  const std::vector<double> grid = linear_grid(0.02, 1.0, 50);
  for (const auto& [name, X] : test_norms()) {
    const TailCurve t = estimate_tail(*X, config(1000000, 14), grid);
    BoundParams p;
    p.b = estimate_b(*X).value;
    p.M = t.center;
    p.n = X->dim();
    const BoundReport r = check_deviation_bound(t, p, BoundId::gauss);
    double worst = -INFINITY;
    for (double m : r.margin) worst = std::max(worst, m);
    c.detail << " " << name << ":" << (r.passed ? "ok" : "violated") << "(max margin " << worst << ")";
    c.require(r.passed, name + " ci_lo above 2 exp(-t^2 M^2 / 2b^2)");
  }
}

void unconditional_claim(Criterion& c) {
  const double k = std::sqrt(2.0 / std::numbers::pi);
  struct Case {
    const char* name;
    NormPtr X;
    bool equality;
  };
  const std::vector<Case> cases = {{"l1^32", make_lp_norm(32, 1), true},
                                   {"linf^32", make_linf_norm(32), false},
                                   {"wsup^16", make_weighted_sup_norm(Vector::LinSpaced(16, 1.0, 4.0)), false},
                                   {"wsup^12", make_weighted_sup_norm(Vector::LinSpaced(12, 0.2, 0.9)), false}};
  for (const Case& e : cases) {
    const MeanVar m = estimate_mean_var(*e.X, config(1000000, 15));
    const Extremum a = estimate_a(*e.X);
    const double z = (m.M - k * a.value) / m.stderr_M;
    c.detail << " " << e.name << " M=" << m.M << " sqrt(2/pi)a=" << k * a.value << " z=" << z;
    c.require(z >= -3.0, std::string(e.name) + " mean below sqrt(2/pi) a");
    if (e.equality) c.require(std::abs(z) <= 3.0, std::string(e.name) + " not equal to sqrt(2/pi) a");
  }
}

void balancing(Criterion& c) {
  const auto t0 = Clock::now();
  for (double p : {1.0, 2.0, 4.0}) {
    const NormPtr X = make_lp_norm(8, p);
    BalanceOptions o;
    o.q = 1;
    o.target_residual = 0.01;
    const BalancedDiagonal b = balance_partials(X, config(50000, 16), o);
    const double dev = (b.lambda.array() * std::sqrt(8.0) - 1.0).abs().maxCoeff();
    const BalanceCheck v = verify_balanced(X, b.lambda, config(400000, 17), b.residual);
    c.detail << " p=" << p << " residual=" << b.residual << " lambda_dev=" << dev << " ratio=" << v.ratio;
    c.require(b.converged && b.residual <= 0.01, "residual above 1%");
    c.require(dev <= 0.02, "lambda not uniform within 2%");
    c.require(v.ratio <= 1.05, "partial-derivative ratio above 1.05");
  }
  const double dt = seconds_since(t0);
  c.require(dt < 60.0, "slower than 60 s");
}

void dr_johnson(Criterion& c) {
  const double tol = 1e-4;
  const std::vector<std::pair<std::string, NormPtr>> cases = {{"l1^16", make_lp_norm(16, 1)},
                                                              {"polytope(16,64)", random_polytope(16, 64, 22)}};
  for (const auto& [name, X] : cases) {
    const JohnResult J = john_position(X, tol);
    c.require(J.certified, name + " John position not certified");
    // A bound violation raises CertificateError; the margin is recomputed here independently.
    const DRBasis d = dr_basis(X, J, DROptions{tol, 8, 8, 0});
    const NormPtr Y = compose_linear(X, J.ellipsoid.A);
    double margin = INFINITY;
    for (Index k = 0; k < 16; ++k) {
      const double v = Y->value(d.V.col(k));
      margin = std::min(margin, v - std::sqrt(1.0 - static_cast<double>(k) / 16.0));
    }
    const JohnsonBasis w = johnson_fix(d, *Y);
    double wmin = INFINITY;
    for (Index i = 0; i < 16; ++i) wmin = std::min(wmin, Y->value(w.W.col(i)));
    const double orth = (w.W.transpose() * w.W - Matrix::Identity(16, 16)).cwiseAbs().maxCoeff();
    c.detail << " " << name << " worst DR margin=" << margin << " min|w|=" << wmin << " pairs=" << w.combined.size();
    c.require(margin >= -5 * tol, name + " DR bound violated");
    c.require(wmin >= 0.25 - 1e-9, name + " paired vector below 1/4");
    c.require(orth < 1e-10, name + " paired basis not orthonormal");
  }
}

void cube_certificates(Criterion& c) {
  const CubeEmbeddingCertificate li = find_linf_subset(*make_linf_norm(16), Matrix::Identity(16, 16), 0.5,
                                                       config(20000, 18));
  c.detail << " linf^16 (" << li.c_low << "," << li.c_up << ")";
  c.require(std::abs(li.c_low - 1) <= 1e-6 && std::abs(li.c_up - 1) <= 1e-9, "linf^16 certificate is not (1,1)");

  struct Case {
    std::string name;
    NormPtr X;
    Matrix V;
  };
  std::vector<Case> cases = {{"linf^16", make_linf_norm(16), Matrix::Identity(16, 16)},
                             {"l1^4", make_lp_norm(4, 1), Matrix::Identity(4, 4)},
                             {"l2^3", make_lp_norm(3, 2), Matrix::Identity(3, 3)},
                             {"summax(linf^32,8)", direct_sum_max(make_linf_norm(32), 8), Matrix::Identity(40, 40)}};
  {
    const NormPtr P = random_polytope(8, 32, 23);
    Matrix V = Matrix::Identity(8, 8);
    for (Index j = 0; j < 8; ++j) V.col(j) /= P->value(V.col(j));
    cases.push_back({"polytope(8,32)", P, V});
    const JohnResult J = john_position(P);
    const NormPtr Y = compose_linear(P, J.ellipsoid.A);
    const JohnsonBasis w = johnson_fix(dr_basis(P, J), *Y);
    cases.push_back({"polytope(8,32) paired basis x4", Y, 4.0 * w.W});
  }
  for (const Case& k : cases) {
    const CubeEmbeddingCertificate cert = find_linf_subset(*k.X, k.V, 0.5, config(20000, 19));
    c.detail << " " << k.name << " |sigma|=" << cert.sigma.size() << " (" << cert.c_low << "," << cert.c_up
             << ") M_n=" << cert.M_n;
    c.require(cert.c_low >= 0.5 * cert.min_norm - 1e-9, k.name + " c_low below min|x_i|/2");
    c.require(cert.c_up <= 4 * cert.M_n + 1e-6, k.name + " c_up above 4 M_n");
    c.require(cert.c_up / cert.c_low <= 32 * cert.M_n, k.name + " c_up/c_low above 32 M_n");
  }
}

void pipeline_dichotomy(Criterion& c) {
  PipelineOptions o;
  o.delta = 0.01;
  o.t_grid = linear_grid(0.05, 2.0, 40);
  const PipelineReport e = good_position(make_lp_norm(64, 2), config(100000, 20, 1), o);
  c.detail << " l2^64 branch=" << to_string(e.branch) << " k=" << e.k_measured << " threshold=" << e.threshold;
  c.require(e.ok && e.branch == Branch::euclidean, "l2^64 not on the euclidean branch");

  const PipelineReport r1 = good_position(make_linf_norm(64), config(100000, 20, 1), o);
  c.detail << " linf^64 branch=" << to_string(r1.branch) << " k=" << r1.k_measured << " |sigma|=" << r1.cube.sigma.size();
  c.require(r1.ok, "linf^64 pipeline failed at " + r1.failure_stage + ": " + r1.failure_message);
  c.require(r1.branch == Branch::cube, "linf^64 not on the cube branch");
  if (r1.ok && r1.branch == Branch::cube) {
    const SandwichCheck s = lift_mean_sandwich_check(r1, config(200000, 21, 1));
    c.detail << " sandwich lower=" << s.lower_gap << "+-" << s.lower_stderr << " upper=" << s.upper_gap << "+-"
             << s.upper_stderr;
    c.require(s.passed, "mean sandwich violated");
  }
  const PipelineReport r4 = good_position(make_linf_norm(64), config(100000, 20, 4), o);
  const bool same = r1.S == r4.S && r1.T_total == r4.T_total && r1.tail.count == r4.tail.count &&
                    r1.stats.M == r4.stats.M && r1.Lambda == r4.Lambda;
  c.detail << " workers 1 vs 4 " << (same ? "identical" : "differ");
  c.require(same, "results depend on the worker count");
}

void two_level_shape(Criterion& c) {
  const Index n = 256;
  const std::vector<double> grid = linear_grid(0.05, 2.5, 50);
  const std::int64_t N = 1'000'000'000'000;
  std::vector<std::int64_t> counts;
  for (double t : grid) counts.push_back(std::llround(N * std::exp(-std::max(t * t, t) * std::log(double(n)))));
  const TwoLevelFit s = two_level_fit(tail_from_counts(n, N, 0.99, 1.0, grid, counts), n);
  c.detail << " synthetic c1=" << s.c1 << " c2=" << s.c2;
  c.require(!s.partial && std::abs(s.c1 - 1) <= 0.02 && std::abs(s.c2 - 1) <= 0.02, "synthetic exponents not recovered");

  std::vector<double> c1s;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const TailCurve t = estimate_tail(*make_linf_norm(1024), config(200000, 100 + seed), linear_grid(0.02, 1.5, 75));
    const TwoLevelFit f = two_level_fit(t, 1024);
    c1s.push_back(f.c1);
  }
  double mean = 0;
  for (double v : c1s) mean += v / 5.0;
  c.detail << " linf^1024 c1:";
  for (double v : c1s) {
    c.detail << " " << v;
    c.require(v > 0 && std::abs(v / mean - 1) <= 0.3, "linf^1024 c1 outside +-30% of the seed mean");
  }
}

void preset(Criterion& c, const std::string& name) {
  ExperimentConfig cfg;
  cfg.command = "preset";
  cfg.preset = name;
  const ExperimentResult r = run_experiment(cfg);
  const Json& res = r.report["result"];
  if (name == "ysum") {
    c.detail << " c_fit=" << res["c_fit"] << " c_min=" << res["c_min"];
    for (const auto& s : res["seeds"]) c.detail << " beta*k=" << s["beta_k"] << " k_ratio=" << s["k_ratio"];
  } else {
    for (const auto& row : res["rows"])
      c.detail << " n=" << row["n"] << " beta*log^2=" << row["beta_linf_log2"] << " beta*n=" << row["beta_l2_n"];
  }
  for (const auto& f : r.failures) c.detail << " {" << f << "}";
  c.require(r.exit_code == 0, "preset " + name + " reported failures");
}

}  // namespace

int main() {
  report(1, "closed-form means", closed_form_means);
  report(2, "critical dimensions", critical_dimensions);
  report(3, "Gaussian deviation bound with C=2, c=1/2", gauss_bound);
  report(4, "unconditional lower bound on the mean", unconditional_claim);
  report(5, "balancing of l_p^8", balancing);
  report(6, "Dvoretzky-Rogers basis and pairing", dr_johnson);
  report(7, "cube certificates", cube_certificates);
  report(8, "pipeline dichotomy", pipeline_dichotomy);
  report(9, "two-level shape", two_level_shape);
  report(10, "ysum preset", [](Criterion& c) { preset(c, "ysum"); });
  report(11, "beta-sweep preset", [](Criterion& c) { preset(c, "beta-sweep"); });
  std::printf("%d of 11 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
