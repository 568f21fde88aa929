#include "concpos/experiment.hpp"

#include "concpos/norm_spec.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>

namespace concpos {

namespace {

struct Ctx {
  const ExperimentConfig& cfg;
  ExperimentResult& res;

  void check(bool ok, const std::string& what) {
    if (!ok) res.failures.push_back(what);
  }

  SampleConfig sample(std::uint64_t seed_offset = 0) const {
    SampleConfig s;
    s.seed = cfg.seed + seed_offset;
    s.n_samples = cfg.n_samples;
    s.workers = cfg.workers;
    return s;
  }

  // Path next to the report: report.json -> report<suffix>.
  std::string sidecar(const std::string& suffix) const {
    if (cfg.out.empty()) return "";
    std::filesystem::path p(cfg.out);
    return (p.parent_path() / (p.stem().string() + suffix)).string();
  }

  void matrix(const std::string& suffix, const Matrix& M) {
    const std::string p = sidecar(suffix);
    if (p.empty()) return;
    write_csv_matrix(p, M);
    res.artifacts.push_back(p);
  }

  void tail(const std::string& suffix, const TailCurve& t, const std::string& title) {
    const std::string p = sidecar(suffix + ".csv");
    if (p.empty()) return;
    write_tail_csv(p, t);
    res.artifacts.push_back(p);
    if (cfg.svg) {
      const std::string s = sidecar(suffix + ".svg");
      write_text(s, render_tail_svg(t, title));
      res.artifacts.push_back(s);
    }
  }
};

NormPtr need_norm(const ExperimentConfig& cfg) {
  if (cfg.norm.empty()) throw InvalidArgument("command '" + cfg.command + "' needs --norm");
  return parse_norm_spec(cfg.norm);
}

BoundParams params_of(const ConcStats& s) { return BoundParams{s.b, s.a, s.A, s.M, s.n}; }

void add_bounds(Ctx& c, TailCurve& tail, const ConcStats& s, Json& out) {
  Json arr = Json::array();
  for (const auto& name : c.cfg.bounds) {
    const BoundReport br = check_deviation_bound(tail, params_of(s), bound_id_from_string(name));
    tail.refs[name] = br.reference;
    arr.push_back(to_json(br));
    c.check(br.passed, "deviation bound '" + name + "' not satisfied");
  }
  out["bounds"] = arr;
}

Json cmd_stats(Ctx& c) {
  const NormPtr X = need_norm(c.cfg);
  Json j;
  j["norm"] = canonical_spec(c.cfg.norm);
  j["stats"] = to_json(conc_stats(*X, c.sample()));
  return j;
}

Json cmd_tail(Ctx& c) {
  const NormPtr X = need_norm(c.cfg);
  const ConcStats s = conc_stats(*X, c.sample());
  TailCurve t = estimate_tail(*X, c.sample(), parse_t_grid(c.cfg.t_grid));
  Json j;
  j["norm"] = canonical_spec(c.cfg.norm);
  j["stats"] = to_json(s);
  add_bounds(c, t, s, j);
  j["tail"] = to_json(t);
  c.tail(".tail", t, canonical_spec(c.cfg.norm));
  return j;
}

Json cmd_john(Ctx& c) {
  const NormPtr X = need_norm(c.cfg);
  const JohnResult r = john_position(X, c.cfg.tol, 400, c.cfg.seed);
  c.check(r.certified, "John position not certified at tol " + std::to_string(c.cfg.tol));
  c.matrix(".A.csv", r.ellipsoid.A);
  Json j;
  j["norm"] = canonical_spec(c.cfg.norm);
  j["john"] = to_json(r);
  return j;
}

Json cmd_minm(Ctx& c) {
  const NormPtr X = need_norm(c.cfg);
  MinimalMOptions o;
  o.steps = c.cfg.steps;
  const MinimalMResult r = minimal_m_position(X, c.sample(), o);
  c.check(std::abs(r.det - 1.0) < 1e-6, "det T drifted from 1");
  c.check(r.M_final <= r.M_start + 3.0 * (r.M_start_stderr + r.M_final_stderr), "E|TG| increased");
  c.matrix(".T.csv", r.T);
  Json j;
  j["norm"] = canonical_spec(c.cfg.norm);
  j["minimal_m"] = to_json(r);
  return j;
}

Json cmd_balance(Ctx& c) {
  const NormPtr X = need_norm(c.cfg);
  BalanceOptions o;
  o.q = c.cfg.q;
  o.target_residual = c.cfg.target;
  const BalancedDiagonal b = balance_partials(X, c.sample(), o);
  c.check(b.converged, "balancing did not reach the target residual");
  Json j;
  j["norm"] = canonical_spec(c.cfg.norm);
  j["balance"] = to_json(b);
  if (o.q == 1) {
    const BalanceCheck v = verify_balanced(X, b.lambda, c.sample(1), b.residual);
    c.check(v.passed, "balanced partial-derivative ratio above its bound");
    j["check"] = to_json(v);
  }
  c.matrix(".lambda.csv", Matrix(b.lambda));
  return j;
}

Json cmd_cube(Ctx& c) {
  const NormPtr X = need_norm(c.cfg);
  const Matrix V = c.cfg.vectors.empty() ? Matrix(Matrix::Identity(X->dim(), X->dim())) : read_csv_matrix(c.cfg.vectors);
  const CubeEmbeddingCertificate cert = find_linf_subset(*X, V, c.cfg.min_ratio, c.sample());
  c.check(cert.upper_ok, "c_up exceeds 4 M_n");
  c.check(cert.banach_mazur_ok, "c_up / c_low exceeds 32 M_n");
  c.check(cert.c_low >= cert.threshold - 1e-9, "c_low below the threshold");
  Json j;
  j["norm"] = canonical_spec(c.cfg.norm);
  j["certificate"] = to_json(cert);
  return j;
}

Json cmd_sections(Ctx& c) {
  const NormPtr X = need_norm(c.cfg);
  const KrEstimate k = estimate_kr(X, c.cfg.eps, c.cfg.trials, c.cfg.seed, {}, c.cfg.workers);
  Json j;
  j["norm"] = canonical_spec(c.cfg.norm);
  j["eps"] = c.cfg.eps;
  j["trials"] = c.cfg.trials;
  j["kr"] = to_json(k);
  return j;
}

Json cmd_drbasis(Ctx& c) {
  const NormPtr X = need_norm(c.cfg);
  const JohnResult J = john_position(X, c.cfg.tol, 400, c.cfg.seed);
  c.check(J.certified, "John position not certified");
  const DRBasis d = dr_basis(X, J, DROptions{c.cfg.tol, 8, 8, c.cfg.seed});
  const JohnsonBasis w = johnson_fix(d, *compose_linear(X, J.ellipsoid.A));
  c.check(w.norms.minCoeff() >= 0.25 - 1e-9, "paired basis has a vector of norm below 1/4");
  c.matrix(".basis.csv", d.V);
  c.matrix(".paired.csv", w.W);
  Json j;
  j["norm"] = canonical_spec(c.cfg.norm);
  j["john"] = to_json(J);
  j["dr_basis"] = to_json(d);
  j["johnson"] = to_json(w);
  return j;
}

Json cmd_pipeline(Ctx& c) {
  const NormPtr X = need_norm(c.cfg);
  PipelineOptions o;
  o.delta = c.cfg.delta;
  o.min_ratio = c.cfg.min_ratio;
  o.john_tol = c.cfg.tol;
  o.t_grid = parse_t_grid(c.cfg.t_grid);
  const PipelineReport r = good_position(X, c.sample(), o);
  c.check(r.ok, "pipeline failed at stage '" + r.failure_stage + "': " + r.failure_message);
  Json j;
  j["norm"] = canonical_spec(c.cfg.norm);
  j["report"] = to_json(r);
  if (r.ok && r.branch == Branch::cube) {
    const SandwichCheck s = lift_mean_sandwich_check(r, c.sample(1));
    c.check(s.passed, "mean sandwich of the lift violated");
    j["sandwich"] = to_json(s);
  }
  if (r.ok) {
    c.matrix(".S.csv", r.S);
    c.matrix(".T.csv", r.T_total);
    if (!r.tail.t.empty()) c.tail(".tail", r.tail, "positioned " + canonical_spec(c.cfg.norm));
  }
  return j;
}

Json cmd_rud(Ctx& c) {
  const NormPtr X = need_norm(c.cfg);
  const Matrix B = c.cfg.basis.empty() ? Matrix(Matrix::Identity(X->dim(), X->dim())) : read_csv_matrix(c.cfg.basis);
  RudPosition r = rud_position(X, B, c.sample(), parse_t_grid(c.cfg.t_grid));
  Json j;
  j["norm"] = canonical_spec(c.cfg.norm);
  add_bounds(c, r.tail, r.stats, j);
  j["rud_position"] = to_json(r);
  c.matrix(".T.csv", r.T);
  c.tail(".tail", r.tail, "rud position of " + canonical_spec(c.cfg.norm));
  return j;
}

// ---- presets ----

bool within_factor(const std::vector<double>& v, double factor) {
  double lg = 0.0;
  for (double x : v) {
    if (!(x > 0.0)) return false;
    lg += std::log(x);
  }
  const double gm = std::exp(lg / static_cast<double>(v.size()));
  return std::all_of(v.begin(), v.end(), [&](double x) { return x <= factor * gm && x >= gm / factor; });
}

Json preset_ysum(Ctx& c) {
  const Index n = 256;
  const Index m = 2 * static_cast<Index>(std::ceil(std::log(static_cast<double>(n))));
  const NormPtr Y = direct_sum_max(make_linf_norm(n), m);
  const NormPtr L = make_linf_norm(n);
  Json seeds = Json::array();
  std::vector<double> cs;
  for (std::uint64_t s = 0; s < 3; ++s) {
    const ConcStats sy = conc_stats(*Y, c.sample(s));
    const ConcStats sl = conc_stats(*L, c.sample(s));
    const double cvar = sy.var / (sy.b * sy.b);
    cs.push_back(cvar);
    const double kratio = sy.k / sl.k;
    c.check(cvar > 0.0, "Var/b^2 not positive");
    c.check(kratio >= 0.5 && kratio <= 2.0, "k(Y)/k(linf) outside [1/2, 2]");
    c.check(sy.beta * sy.k >= 0.1 && sy.beta * sy.k <= 10.0, "beta(Y) k(Y) outside [0.1, 10]");
    seeds.push_back({{"seed", c.cfg.seed + s},
                     {"c", cvar},
                     {"k_ratio", kratio},
                     {"beta_k", sy.beta * sy.k},
                     {"Y", to_json(sy)},
                     {"linf", to_json(sl)}});
  }
  const double cmin = *std::min_element(cs.begin(), cs.end());
  const double cmax = *std::max_element(cs.begin(), cs.end());
  c.check(cmin >= 0.5 * cmax, "fitted c unstable across seeds");
  return {{"preset", "ysum"}, {"n", n}, {"m", m}, {"c_fit", (cmin + cmax) / 2.0}, {"c_min", cmin}, {"seeds", seeds}};
}

Json preset_beta_sweep(Ctx& c) {
  Json rows = Json::array();
  std::vector<double> linf, l2;
  for (Index n : {64, 256, 1024}) {
    const double logn = std::log(static_cast<double>(n));
    const MeanVar a = estimate_mean_var(*make_linf_norm(n), c.sample());
    const MeanVar b = estimate_mean_var(*make_lp_norm(n, 2.0), c.sample());
    const double ba = a.var / (a.M * a.M), bb = b.var / (b.M * b.M);
    linf.push_back(ba * logn * logn);
    l2.push_back(bb * static_cast<double>(n));
    rows.push_back({{"n", n},
                    {"beta_linf", ba},
                    {"beta_linf_log2", ba * logn * logn},
                    {"beta_l2", bb},
                    {"beta_l2_n", bb * static_cast<double>(n)}});
  }
  c.check(within_factor(linf, 2.0), "beta(linf) (log n)^2 not within a factor 2 of a constant");
  c.check(within_factor(l2, 2.0), "beta(l2) n not within a factor 2 of a constant");
  return {{"preset", "beta-sweep"}, {"rows", rows}};
}

Json preset_l2_close(Ctx& c) {
  Json rows = Json::array();
  std::vector<double> coef;
  std::vector<Index> dims = {64, 256};
  for (Index n : dims) {
    const NormPtr X = make_sum_norm(make_lp_norm(n, 2.0), make_linf_norm(n), 1.0, 0.5);
    const std::vector<double> grid = linear_grid(0.2 / std::sqrt(static_cast<double>(n)),
                                                 4.0 / std::sqrt(static_cast<double>(n)), 30);
    TailCurve t = estimate_tail(*X, c.sample(), grid);
    std::vector<double> x, y;
    for (std::size_t i = 0; i < t.t.size(); ++i) {
      if (t.count[i] < kMinFitCount) continue;
      x.push_back(t.t[i] * t.t[i]);
      y.push_back(-std::log(t.p_hat[i]));
    }
    c.check(x.size() >= 4, "fewer than 4 usable tail points at n=" + std::to_string(n));
    const LineFit f = x.empty() ? LineFit{} : fit_through_origin(x, y);
    coef.push_back(f.slope);
    c.check(f.slope / static_cast<double>(n) >= 0.1 && f.slope / static_cast<double>(n) <= 10.0,
            "t^2 coefficient / n outside [0.1, 10] at n=" + std::to_string(n));
    const ConcStats s = conc_stats(*X, c.sample());
    add_bounds(c, t, s, rows.emplace_back(Json::object()));
    rows.back()["n"] = n;
    rows.back()["coefficient"] = f.slope;
    rows.back()["coefficient_over_n"] = f.slope / static_cast<double>(n);
    rows.back()["fit_r2"] = f.r2;
    rows.back()["stats"] = to_json(s);
    c.tail(".n" + std::to_string(n) + ".tail", t, "l2 + 0.5 linf, n=" + std::to_string(n));
  }
  const double ratio = coef[1] / coef[0];
  const double expected = static_cast<double>(dims[1]) / static_cast<double>(dims[0]);
  c.check(ratio >= expected / 2.0 && ratio <= expected * 2.0, "t^2 coefficient does not scale with n");
  return {{"preset", "l2-close"}, {"rows", rows}, {"coefficient_ratio", ratio}, {"dimension_ratio", expected}};
}

Json preset_linf_conc(Ctx& c) {
  const Index n = 1024;
  const NormPtr X = make_linf_norm(n);
  SampleConfig s = c.sample();
  s.n_samples = std::max<std::int64_t>(c.cfg.n_samples, 200000);
  const ConcStats st = conc_stats(*X, s);
  TailCurve t = estimate_tail(*X, s, linear_grid(0.02, 1.5, 75));
  std::vector<double> x, y;
  for (std::size_t i = 0; i < t.t.size(); ++i) {
    if (t.t[i] < 0.3 || t.t[i] > 1.0 || t.count[i] < kMinFitCount) continue;
    x.push_back(t.t[i]);
    y.push_back(-std::log(t.p_hat[i]));
  }
  c.check(x.size() >= 4, "fewer than 4 usable points on t in [0.3, 1]");
  const LineFit f = x.size() >= 2 ? fit_line(x, y) : LineFit{};
  c.check(f.r2 >= 0.9, "-log p not linear in t on [0.3, 1] (R^2 < 0.9)");
  c.check(f.slope > 0.0, "tail not decaying");
  Json j = {{"preset", "linf-conc"}, {"n", n}, {"stats", to_json(st)}, {"slope", f.slope}, {"intercept", f.intercept},
            {"r2", f.r2}, {"fit_points", f.points}};
  add_bounds(c, t, st, j);
  j["tail"] = to_json(t);
  c.tail(".tail", t, "linf^1024");
  return j;
}

Json run_command(Ctx& c) {
  const std::string& cmd = c.cfg.command;
  if (cmd == "stats") return cmd_stats(c);
  if (cmd == "tail") return cmd_tail(c);
  if (cmd == "john") return cmd_john(c);
  if (cmd == "minm") return cmd_minm(c);
  if (cmd == "balance") return cmd_balance(c);
  if (cmd == "cube") return cmd_cube(c);
  if (cmd == "sections") return cmd_sections(c);
  if (cmd == "drbasis") return cmd_drbasis(c);
  if (cmd == "pipeline") return cmd_pipeline(c);
  if (cmd == "rud") return cmd_rud(c);
  if (cmd == "preset") {
    const std::string& p = c.cfg.preset;
    if (p == "ysum") return preset_ysum(c);
    if (p == "beta-sweep") return preset_beta_sweep(c);
    if (p == "l2-close") return preset_l2_close(c);
    if (p == "linf-conc") return preset_linf_conc(c);
    throw InvalidArgument("unknown preset '" + p + "'");
  }
  throw InvalidArgument("unknown command '" + cmd + "'");
}

}  // namespace

std::vector<std::string> preset_names() { return {"ysum", "beta-sweep", "l2-close", "linf-conc"}; }

std::vector<double> parse_t_grid(const std::string& s) {
  std::stringstream ss(s);
  std::string a, b, c;
  if (!std::getline(ss, a, ':') || !std::getline(ss, b, ':') || !std::getline(ss, c) )
    throw InvalidArgument("t grid must be lo:hi:steps, got '" + s + "'");
  try {
    std::size_t pa = 0, pb = 0, pc = 0;
    const double lo = std::stod(a, &pa), hi = std::stod(b, &pb);
    const int steps = std::stoi(c, &pc);
    if (pa != a.size() || pb != b.size() || pc != c.size()) throw std::invalid_argument("trailing");
    if (!(lo > 0.0 && hi > lo && steps >= 2)) throw InvalidArgument("t grid needs 0 < lo < hi and steps >= 2");
    return linear_grid(lo, hi, steps);
  } catch (const std::logic_error&) {
    throw InvalidArgument("t grid must be lo:hi:steps, got '" + s + "'");
  }
}

std::string render_tail_svg(const TailCurve& t, const std::string& title) {
  const double W = 640, H = 420, L = 60, R = 150, T = 40, B = 50;
  std::vector<std::pair<std::string, std::vector<double>>> series;
  auto neglog = [](const std::vector<double>& p) {
    std::vector<double> y(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) y[i] = p[i] > 0.0 ? -std::log(p[i]) : std::nan("");
    return y;
  };
  series.push_back({"empirical", neglog(t.p_hat)});
  series.push_back({"ci_lo", neglog(t.ci_lo)});
  for (const auto& [id, r] : t.refs) series.push_back({"ref " + id, neglog(r)});
  double xmax = t.t.empty() ? 1.0 : t.t.back(), ymax = 1.0;
  for (const auto& [_, y] : series)
    for (double v : y)
      if (std::isfinite(v)) ymax = std::max(ymax, v);
  ymax = std::min(ymax, 60.0);
  auto X = [&](double x) { return L + (W - L - R) * x / xmax; };
  auto Y = [&](double y) { return H - B - (H - T - B) * std::min(y, ymax) / ymax; };
  const char* colors[] = {"#1f77b4", "#aec7e8", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" "
    << "font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  std::string esc;
  for (char ch : title) {
    if (ch == '<') esc += "&lt;";
    else if (ch == '>') esc += "&gt;";
    else if (ch == '&') esc += "&amp;";
    else esc += ch;
  }
  o << "<text x=\"" << L << "\" y=\"24\" font-size=\"14\">" << esc << "</text>\n";
  o << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 5; ++k) {
    const double xv = xmax * k / 5.0, yv = ymax * k / 5.0;
    o << "<text x=\"" << X(xv) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << std::round(xv * 100) / 100
      << "</text>\n";
    o << "<text x=\"" << L - 6 << "\" y=\"" << Y(yv) + 4 << "\" text-anchor=\"end\">" << std::round(yv * 10) / 10
      << "</text>\n";
  }
  o << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">t</text>\n";
  o << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" transform=\"rotate(-90 16 " << (T + H - B) / 2
    << ")\" text-anchor=\"middle\">-log P(|X(G) - M| &gt; tM)</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const auto& [name, y] = series[s];
    const char* col = colors[s % 6];
    std::string pts;
    for (std::size_t i = 0; i < y.size() && i < t.t.size(); ++i) {
      if (!std::isfinite(y[i])) continue;
      std::ostringstream p;
      p << X(t.t[i]) << "," << Y(y[i]) << " ";
      pts += p.str();
    }
    o << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"1.5\" points=\"" << pts << "\"/>\n";
    const double ly = T + 16.0 * static_cast<double>(s);
    o << "<line x1=\"" << W - R + 10 << "\" y1=\"" << ly << "\" x2=\"" << W - R + 30 << "\" y2=\"" << ly << "\" stroke=\""
      << col << "\" stroke-width=\"2\"/>\n<text x=\"" << W - R + 35 << "\" y=\"" << ly + 4 << "\">" << name << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  ExperimentResult res;
  Ctx c{cfg, res};
  Json body;
  bool errored = false;
  try {
    body = run_command(c);
  } catch (const std::exception& e) {
    errored = true;
    res.failures.push_back(std::string("error: ") + e.what());
  }
  res.report = {{"command", cfg.command},
                {"preset", cfg.preset},
                {"seed", cfg.seed},
                {"samples", cfg.n_samples},
                {"ok", res.failures.empty()},
                {"failures", res.failures},
                {"result", body}};
  res.exit_code = errored ? 2 : (res.failures.empty() ? 0 : 1);
  if (!cfg.out.empty()) {
    try {
      write_text(cfg.out, res.report.dump(2) + "\n");
      res.artifacts.insert(res.artifacts.begin(), cfg.out);
    } catch (const std::exception& e) {
      res.failures.push_back(std::string("error: ") + e.what());
      res.exit_code = 2;
    }
  }
  return res;
}

}  // namespace concpos
