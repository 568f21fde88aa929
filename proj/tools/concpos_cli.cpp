#include "concpos/experiment.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

using concpos::ExperimentConfig;

namespace {

void common(CLI::App* sub, ExperimentConfig& c, bool norm_required = true) {
  auto* o = sub->add_option("--norm", c.norm, "norm spec, e.g. lp:2:64, linf:256, summax:linf:8:4");
  if (norm_required) o->required();
  sub->add_option("--seed", c.seed, "base seed");
  sub->add_option("--samples", c.n_samples, "Monte Carlo samples")->check(CLI::PositiveNumber);
  sub->add_option("--workers", c.workers, "worker threads (default: CONCPOS_WORKERS or all cores)");
  sub->add_option("--out", c.out, "report path (JSON); sidecar CSV/SVG files are written next to it");
  sub->add_option("--t-grid", c.t_grid, "deviation grid lo:hi:steps");
  sub->add_flag("!--no-svg", c.svg, "skip SVG plots");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gaussian concentration of norms in good positions"};
  app.require_subcommand(1);
  ExperimentConfig c;

  auto* stats = app.add_subcommand("stats", "mean, variance, b, a, k, beta and partial-derivative statistics");
  common(stats, c);
  auto* tail = app.add_subcommand("tail", "deviation probabilities with reference bounds");
  common(tail, c);
  tail->add_option("--bound", c.bounds, "reference bounds: gauss, two_level, perm, uncond");
  auto* john = app.add_subcommand("john", "John position (maximal-volume inscribed ellipsoid)");
  common(john, c);
  john->add_option("--tol", c.tol, "containment tolerance");
  auto* minm = app.add_subcommand("minm", "minimal-M position");
  common(minm, c);
  minm->add_option("--steps", c.steps, "optimizer steps");
  auto* balance = app.add_subcommand("balance", "balance partial derivatives by a diagonal map");
  common(balance, c);
  balance->add_option("--q", c.q, "L_q norm of the partials (1 or 2)")->check(CLI::IsMember({1, 2}));
  balance->add_option("--target", c.target, "residual target");
  auto* cube = app.add_subcommand("cube", "greedy cube-embedding certificate");
  common(cube, c);
  cube->add_option("--vectors", c.vectors, "CSV with one vector per column (default: standard basis)");
  cube->add_option("--min-ratio", c.min_ratio, "c_low acceptance ratio");
  auto* sections = app.add_subcommand("sections", "k_r: largest dimension of (1+eps)-spherical random sections");
  common(sections, c);
  sections->add_option("--eps", c.eps, "sphericality tolerance in (0,1)");
  sections->add_option("--trials", c.trials, "random subspaces per dimension");
  auto* drbasis = app.add_subcommand("drbasis", "Dvoretzky-Rogers basis and paired basis in John position");
  common(drbasis, c);
  drbasis->add_option("--tol", c.tol, "John tolerance");
  auto* pipeline = app.add_subcommand("pipeline", "dichotomy and the lifted position S");
  common(pipeline, c);
  pipeline->add_option("--delta", c.delta, "threshold exponent, branch euclidean iff k >= n^(1/2 - delta)");
  pipeline->add_option("--min-ratio", c.min_ratio, "cube acceptance ratio");
  pipeline->add_option("--tol", c.tol, "John tolerance");
  auto* rud = app.add_subcommand("rud", "balanced position in a given basis");
  common(rud, c);
  rud->add_option("--basis", c.basis, "CSV basis, one vector per column (default: standard basis)");
  rud->add_option("--bound", c.bounds, "reference bounds");
  auto* preset = app.add_subcommand("preset", "named experiments with embedded assertions");
  common(preset, c, false);
  preset->add_option("name", c.preset, "ysum, beta-sweep, l2-close, linf-conc")
      ->required()
      ->check(CLI::IsMember(concpos::preset_names()));

  CLI11_PARSE(app, argc, argv);
  c.command = app.get_subcommands().front()->get_name();

  const concpos::ExperimentResult r = concpos::run_experiment(c);
  if (c.out.empty()) std::cout << r.report.dump(2) << "\n";
  for (const auto& a : r.artifacts) std::cerr << "wrote " << a << "\n";
  for (const auto& f : r.failures) std::cerr << "FAIL: " << f << "\n";
  return r.exit_code;
}
