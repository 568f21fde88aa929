#include "oracles.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/special_functions/erf.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace oracle {

double chi_mean(int n) {
  return std::sqrt(2.0) * std::exp(std::lgamma((n + 1) / 2.0) - std::lgamma(n / 2.0));
}

double l1_mean(int n) { return n * std::sqrt(2.0 / std::numbers::pi); }

namespace {

// 1 - erf(t/sqrt2)^n, computed as -expm1(n log1p(-erfc)) to keep precision in the tail.
double survival(double t, int n) {
  const double q = boost::math::erfc(t / std::sqrt(2.0));
  if (q >= 1.0) return 1.0;
  return -std::expm1(n * std::log1p(-q));
}

}  // namespace

double linf_mean(int n) {
  boost::math::quadrature::exp_sinh<double> integrator;
  return integrator.integrate([n](double t) { return survival(t, n); });
}

double linf_second_moment(int n) {
  boost::math::quadrature::exp_sinh<double> integrator;
  return integrator.integrate([n](double t) { return 2.0 * t * survival(t, n); });
}

double circle_average(const std::function<double(double, double)>& h, int points) {
  double s = 0.0;
  for (int i = 0; i < points; ++i) {
    const double t = 2.0 * std::numbers::pi * (i + 0.5) / points;
    s += h(std::cos(t), std::sin(t));
  }
  return s / points;
}

double grid_min_2d(const std::function<double(double, double)>& f, double step) {
  const int k = static_cast<int>(std::lround(2.0 / step));
  double best = f(-1.0, -1.0);
  for (int i = 0; i <= k; ++i)
    for (int j = 0; j <= k; ++j) best = std::min(best, f(-1.0 + i * step, -1.0 + j * step));
  return best;
}

double ks_statistic(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
  }
  return d;
}

double ks_critical(std::size_t n, std::size_t m, double alpha) {
  const double c = std::sqrt(-0.5 * std::log(alpha / 2.0));
  return c * std::sqrt(static_cast<double>(n + m) / (static_cast<double>(n) * m));
}

}  // namespace oracle
