#pragma once

#include "concpos/io.hpp"

#include <string>
#include <vector>

namespace concpos {

struct ExperimentConfig {
  std::string command;  // stats, tail, john, minm, balance, cube, sections, drbasis, pipeline, rud, preset
  std::string norm;     // norm spec
  std::string preset;   // ysum, beta-sweep, l2-close, linf-conc
  std::uint64_t seed = 1;
  std::int64_t n_samples = 100000;
  int workers = 0;
  std::string t_grid = "0.05:2:40";  // lo:hi:steps
  std::string out;                   // report path; sidecars are derived from it
  bool svg = true;

  std::vector<std::string> bounds = {"gauss"};  // tail
  double tol = 1e-4;                            // john, drbasis, pipeline
  int steps = 2000;                             // minm
  int q = 1;                                    // balance
  double target = 0.02;                         // balance
  std::string vectors;                          // cube: CSV with one vector per column (default: identity)
  double min_ratio = 0.5;                       // cube, pipeline
  double eps = 0.3;                             // sections
  int trials = 60;                              // sections
  double delta = 0.2;                           // pipeline
  std::string basis;                            // rud: CSV basis (default: identity)
};

struct ExperimentResult {
  int exit_code = 0;  // 0 iff every embedded assertion passed
  Json report;
  std::vector<std::string> failures;
  std::vector<std::string> artifacts;  // files written
};

/// Parses "lo:hi:steps" into an evenly spaced grid.
std::vector<double> parse_t_grid(const std::string& s);

/// Line plot of t against -log p_hat with the reference curves of the tail.
std::string render_tail_svg(const TailCurve& tail, const std::string& title);

/// Runs one command or preset, writes the report (always, when cfg.out is set) and its sidecars.
/// Errors raised by the library are recorded as failures with exit code 2.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

std::vector<std::string> preset_names();

}  // namespace concpos
