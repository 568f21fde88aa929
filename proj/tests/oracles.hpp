#pragma once

// Independent reference values for the tests. Nothing here calls the library's estimators.

#include <functional>
#include <utility>
#include <vector>

namespace oracle {

/// E|G|_2 for G standard in R^n: sqrt(2) Gamma((n+1)/2) / Gamma(n/2).
double chi_mean(int n);

/// E|G|_1 = n sqrt(2/pi).
double l1_mean(int n);

/// E max_i |G_i| and E (max_i |G_i|)^2 by quadrature of the survival function 1 - erf(t/sqrt2)^n.
double linf_mean(int n);
double linf_second_moment(int n);

/// For a 0-homogeneous integrand h on R^2, E h(G) = (1/2pi) int_0^{2pi} h(cos t, sin t) dt.
/// Periodic trapezoid rule with `points` nodes.
double circle_average(const std::function<double(double, double)>& h, int points = 200000);

/// Minimum of f over the grid {-1, -1+step, ..., 1}^2.
double grid_min_2d(const std::function<double(double, double)>& f, double step = 0.01);

/// Two-sample Kolmogorov-Smirnov statistic.
double ks_statistic(std::vector<double> a, std::vector<double> b);

/// Critical value of the two-sample KS statistic at level alpha (asymptotic).
double ks_critical(std::size_t n, std::size_t m, double alpha);

}  // namespace oracle
