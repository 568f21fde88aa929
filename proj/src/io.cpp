#include "concpos/io.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace concpos {

namespace {

std::string fmt(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

Json vec_json(const std::vector<double>& v) { return Json(v); }

}  // namespace

Matrix read_csv_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot read CSV file '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      const std::string c = trim(cell);
      double v = 0.0;
      const auto res = std::from_chars(c.data(), c.data() + c.size(), v);
      if (c.empty() || res.ec != std::errc() || res.ptr != c.data() + c.size())
        throw InvalidArgument(path + ":" + std::to_string(lineno) + ": '" + c + "' is not a number");
      row.push_back(v);
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw InvalidArgument(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(rows.front().size()) +
                            " columns, found " + std::to_string(row.size()));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw InvalidArgument("CSV file '" + path + "' is empty");
  Matrix M(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (Index i = 0; i < M.rows(); ++i)
    for (Index j = 0; j < M.cols(); ++j) M(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  return M;
}

void write_text(const std::string& path, const std::string& text) {
  const std::filesystem::path parent = std::filesystem::path(path).parent_path();
  std::error_code ec;
  if (!parent.empty()) std::filesystem::create_directories(parent, ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write '" + path + "'");
  out << text;
  if (!out) throw InvalidArgument("write to '" + path + "' failed");
}

void write_csv_matrix(const std::string& path, const Matrix& M) {
  std::string s;
  for (Index i = 0; i < M.rows(); ++i) {
    for (Index j = 0; j < M.cols(); ++j) {
      if (j) s += ',';
      s += fmt(M(i, j));
    }
    s += '\n';
  }
  write_text(path, s);
}

void write_tail_csv(const std::string& path, const TailCurve& t) {
  std::string s = "t,count,p_hat,ci_lo,ci_hi";
  for (const auto& [id, _] : t.refs) s += ",ref_" + id;
  s += '\n';
  for (std::size_t i = 0; i < t.t.size(); ++i) {
    s += fmt(t.t[i]) + ',' + std::to_string(t.count[i]) + ',' + fmt(t.p_hat[i]) + ',' + fmt(t.ci_lo[i]) + ',' +
         fmt(t.ci_hi[i]);
    for (const auto& [id, ref] : t.refs) s += ',' + (i < ref.size() ? fmt(ref[i]) : std::string());
    s += '\n';
  }
  write_text(path, s);
}

Json to_json(const Vector& v) { return Json(std::vector<double>(v.data(), v.data() + v.size())); }

Json to_json(const Matrix& M) {
  Json rows = Json::array();
  for (Index i = 0; i < M.rows(); ++i) rows.push_back(to_json(Vector(M.row(i).transpose())));
  return rows;
}

Json to_json(const MeanVar& m) {
  return {{"M", m.M}, {"var", m.var}, {"stderr_M", m.stderr_M}, {"stderr_var", m.stderr_var}, {"n", m.n}};
}

Json to_json(const ConcStats& s) {
  return {{"n", s.n},
          {"samples", s.samples},
          {"M", s.M},
          {"stderr_M", s.stderr_M},
          {"var", s.var},
          {"stderr_var", s.stderr_var},
          {"b", s.b},
          {"b_exact", s.b_exact},
          {"a", s.a},
          {"a_exact", s.a_exact},
          {"k", s.k},
          {"stderr_k", s.stderr_k},
          {"beta", s.beta},
          {"stderr_beta", s.stderr_beta},
          {"sc_ratio", s.sc_ratio},
          {"R", s.R},
          {"A", s.A},
          {"euler_mean", s.euler_mean},
          {"euler_stderr", s.euler_stderr}};
}

Json to_json(const TailCurve& t) {
  Json refs = Json::object();
  for (const auto& [id, r] : t.refs) refs[id] = vec_json(r);
  return {{"dim", t.dim},         {"n_samples", t.n_samples}, {"confidence", t.confidence},
          {"center", t.center},   {"t", vec_json(t.t)},       {"count", t.count},
          {"p_hat", vec_json(t.p_hat)}, {"ci_lo", vec_json(t.ci_lo)}, {"ci_hi", vec_json(t.ci_hi)},
          {"refs", refs}};
}

Json to_json(const BoundReport& b) {
  return {{"bound", to_string(b.id)}, {"passed", b.passed},         {"gauss_fallback", b.gauss_fallback},
          {"C_fit", b.C_fit},         {"c_fit", b.c_fit},           {"fit_r2", b.fit_r2},
          {"fit_points", b.fit_points}, {"c_envelope", b.c_envelope}, {"C_ref", b.C_ref},
          {"t", vec_json(b.t)},       {"phi", vec_json(b.phi)},     {"reference", vec_json(b.reference)},
          {"margin", vec_json(b.margin)}};
}

Json to_json(const JohnResult& j) {
  return {{"certified", j.certified},
          {"rounds", j.rounds},
          {"logdet", j.ellipsoid.logdet},
          {"relaxation_logdet", j.relaxation_logdet},
          {"containment_gap", j.certificate.containment_gap},
          {"decomposition_residual", j.certificate.decomposition_residual},
          {"n_contacts", j.certificate.n_contacts},
          {"complete", j.certificate.complete},
          {"logdet_history", vec_json(j.logdet_history)},
          {"A", to_json(j.ellipsoid.A)}};
}

Json to_json(const IsotropyReport& r) {
  return {{"M", r.M},           {"stderr_M", r.stderr_M}, {"residual", r.residual}, {"matrix_stderr", r.matrix_stderr},
          {"trace", r.trace},   {"trace_stderr", r.trace_stderr}};
}

Json to_json(const MinimalMResult& r) {
  return {{"det", r.det},
          {"M_start", r.M_start},
          {"M_start_stderr", r.M_start_stderr},
          {"M_final", r.M_final},
          {"M_final_stderr", r.M_final_stderr},
          {"isotropy_residual", r.isotropy_residual},
          {"matrix_stderr", r.matrix_stderr},
          {"batch_means", vec_json(r.batch_means)},
          {"T", to_json(r.T)}};
}

Json to_json(const BalancedDiagonal& b) {
  return {{"q", b.q},
          {"converged", b.converged},
          {"residual", b.residual},
          {"in_sample_residual", b.in_sample_residual},
          {"iterations", b.iterations},
          {"block_samples", b.block_samples},
          {"lambda", to_json(b.lambda)},
          {"rho", to_json(b.rho)},
          {"rho_stderr", to_json(b.rho_stderr)}};
}

Json to_json(const BalanceCheck& b) {
  return {{"ratio", b.ratio}, {"ratio_stderr", b.ratio_stderr}, {"a", b.a},           {"a_exact", b.a_exact},
          {"mean_l1", b.mean_l1}, {"mean_l1_stderr", b.mean_l1_stderr}, {"bound", b.bound}, {"passed", b.passed},
          {"averaging_ok", b.averaging_ok}};
}

Json to_json(const CubeEmbeddingCertificate& c) {
  return {{"sigma", c.sigma},
          {"size", c.sigma.size()},
          {"c_low", c.c_low},
          {"c_up", c.c_up},
          {"c_up_exact", c.c_up_exact},
          {"c_low_certified", c.c_low_certified},
          {"M_n", c.M_n},
          {"M_n_stderr", c.M_n_stderr},
          {"M_n_exact", c.M_n_exact},
          {"min_norm", c.min_norm},
          {"threshold", c.threshold},
          {"upper_ok", c.upper_ok},
          {"banach_mazur_ok", c.banach_mazur_ok},
          {"rejected_upper", c.rejected_upper},
          {"c_low_history", vec_json(c.c_low_history)},
          {"c_up_history", vec_json(c.c_up_history)},
          {"notes", c.notes}};
}

Json to_json(const RudEstimate& r) {
  return {{"L_hat", r.L_hat}, {"n_probes", r.n_probes}, {"exact", r.exact}, {"best_probe", to_json(r.best_probe)}};
}

Json to_json(const KrTrial& t) {
  return {{"k", t.k},           {"trials_run", t.trials_run}, {"successes", t.successes}, {"required", t.required},
          {"pass", t.pass},     {"ci_lo", t.ci.lo},           {"ci_hi", t.ci.hi},         {"decisive", t.decisive}};
}

Json to_json(const KrEstimate& k) {
  Json ev = Json::array();
  for (const auto& t : k.evaluated) ev.push_back(to_json(t));
  return {{"k", k.k}, {"evaluated", ev}};
}

Json to_json(const DRBasis& d) {
  return {{"norms", to_json(d.norms)}, {"worst_margin", d.worst_margin}};
}

Json to_json(const JohnsonBasis& j) {
  Json pairs = Json::array();
  for (const auto& [a, b] : j.combined) pairs.push_back({a, b});
  return {{"norms", to_json(j.norms)}, {"combined", pairs}};
}

Json to_json(const TwoLevelFit& f) {
  return {{"c1", f.c1},
          {"c2", f.c2},
          {"crossover", f.crossover},
          {"linear_r2", f.linear.r2},
          {"linear_points", f.linear.points},
          {"quadratic_r2", f.quadratic.r2},
          {"quadratic_points", f.quadratic.points},
          {"quadratic_all", f.quadratic_all},
          {"partial", f.partial},
          {"super_logarithmic", f.super_logarithmic}};
}

Json to_json(const Lift& l) {
  return {{"lambda", l.lambda},     {"lambda_formula", l.lambda_formula}, {"M_TZ", l.M_TZ},
          {"M_TZ_stderr", l.M_TZ_stderr}, {"M_W", l.M_W}, {"M_W_stderr", l.M_W_stderr}, {"trivial", l.trivial}};
}

Json to_json(const SandwichCheck& s) {
  return {{"applicable", s.applicable}, {"passed", s.passed},     {"M_TZ", s.M_TZ},
          {"M_SG", s.M_SG},             {"lower_gap", s.lower_gap}, {"lower_stderr", s.lower_stderr},
          {"lower_ok", s.lower_ok},     {"upper_gap", s.upper_gap}, {"upper_stderr", s.upper_stderr},
          {"upper_ok", s.upper_ok}};
}

Json to_json(const PipelineReport& r) {
  Json j = {{"ok", r.ok},
            {"failure_stage", r.failure_stage},
            {"failure_message", r.failure_message},
            {"branch", to_string(r.branch)},
            {"n", r.n},
            {"delta", r.delta},
            {"threshold", r.threshold},
            {"k_measured", r.k_measured},
            {"k_stderr", r.k_stderr},
            {"john", to_json(r.john)},
            {"stats", to_json(r.stats)}};
  if (r.branch == Branch::cube) {
    j["dr_basis"] = to_json(r.dr);
    j["johnson"] = to_json(r.johnson);
    j["cube"] = to_json(r.cube);
    j["smoothed"] = r.smoothed;
    j["balance"] = to_json(r.balance);
    j["Lambda"] = to_json(r.Lambda);
    j["lift"] = to_json(r.lift);
  }
  if (!r.tail.t.empty()) {
    j["tail"] = to_json(r.tail);
    j["fit"] = to_json(r.fit);
  }
  return j;
}

Json to_json(const RudPosition& r) {
  return {{"rud", to_json(r.rud)},         {"smoothed", r.smoothed}, {"balance", to_json(r.balance)},
          {"Lambda", to_json(r.Lambda)},   {"stats", to_json(r.stats)}, {"k_lambda", r.k_lambda},
          {"bound_value", r.bound_value},  {"tail", to_json(r.tail)}};
}

}  // namespace concpos
