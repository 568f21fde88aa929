#include "concpos/stats.hpp"

#include "concpos/parallel.hpp"
#include "concpos/rng.hpp"
#include "concpos/types.hpp"

#include <boost/math/special_functions/beta.hpp>

#include <algorithm>

#include <cmath>
#include <cstdlib>
#include <string>

namespace concpos {

int default_workers() {
  if (const char* env = std::getenv("CONCPOS_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v > 0) return static_cast<int>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

int resolve_workers(int requested) { return requested > 0 ? requested : default_workers(); }

void Moments::push(double x) {
  const double n1 = static_cast<double>(n);
  ++n;
  const double nn = static_cast<double>(n);
  const double delta = x - mean;
  const double dn = delta / nn;
  const double dn2 = dn * dn;
  const double term1 = delta * dn * n1;
  mean += dn;
  m4 += term1 * dn2 * (nn * nn - 3.0 * nn + 3.0) + 6.0 * dn2 * m2 - 4.0 * dn * m3;
  m3 += term1 * dn * (nn - 2.0) - 3.0 * dn * m2;
  m2 += term1;
}

void Moments::merge(const Moments& o) {
  if (o.n == 0) return;
  if (n == 0) {
    *this = o;
    return;
  }
  const double na = static_cast<double>(n), nb = static_cast<double>(o.n);
  const double nt = na + nb;
  const double d = o.mean - mean;
  const double d2 = d * d, d3 = d2 * d, d4 = d2 * d2;
  const double new_m4 = m4 + o.m4 + d4 * na * nb * (na * na - na * nb + nb * nb) / (nt * nt * nt) +
                        6.0 * d2 * (na * na * o.m2 + nb * nb * m2) / (nt * nt) + 4.0 * d * (na * o.m3 - nb * m3) / nt;
  const double new_m3 = m3 + o.m3 + d3 * na * nb * (na - nb) / (nt * nt) + 3.0 * d * (na * o.m2 - nb * m2) / nt;
  const double new_m2 = m2 + o.m2 + d2 * na * nb / nt;
  mean += d * nb / nt;
  m2 = new_m2;
  m3 = new_m3;
  m4 = new_m4;
  n += o.n;
}

double Moments::variance() const { return n > 1 ? m2 / static_cast<double>(n - 1) : 0.0; }

double Moments::stderr_mean() const { return n > 1 ? std::sqrt(variance() / static_cast<double>(n)) : 0.0; }

double Moments::stderr_variance() const {
  if (n < 4) return 0.0;
  const double nn = static_cast<double>(n);
  const double mu4 = m4 / nn;
  const double s2 = variance();
  const double v = (mu4 - s2 * s2 * (nn - 3.0) / (nn - 1.0)) / nn;
  return v > 0.0 ? std::sqrt(v) : 0.0;
}

Interval clopper_pearson(std::int64_t k, std::int64_t N, double confidence) {
  if (N <= 0 || k < 0 || k > N) throw InvalidArgument("binomial interval needs 0 <= successes <= trials, trials > 0");
  if (!(confidence > 0.0 && confidence < 1.0)) throw InvalidArgument("confidence must lie in (0,1)");
  const double alpha = 1.0 - confidence;
  const double nd = static_cast<double>(N), kd = static_cast<double>(k);
  Interval ci;
  if (k == 0) {
    ci.lo = 0.0;
    ci.hi = 1.0 - std::pow(alpha, 1.0 / nd);
    return ci;
  }
  if (k == N) {
    ci.lo = std::pow(alpha, 1.0 / nd);
    ci.hi = 1.0;
    return ci;
  }
  try {
    ci.lo = boost::math::ibeta_inv(kd, nd - kd + 1.0, alpha / 2.0);
    ci.hi = boost::math::ibeta_inv(kd + 1.0, nd - kd, 1.0 - alpha / 2.0);
  } catch (const boost::math::evaluation_error&) {
    // Incomplete-beta series gives up for very large shape parameters; by then
    // k and N - k are both huge and the continuity-corrected Wilson interval
    // agrees with the exact one to many digits.
    const double z = normal_quantile(1.0 - alpha / 2.0);
    const auto wilson = [&](double kk, double sign) {
      const double p = kk / nd;
      const double z2 = z * z;
      const double centre = p + z2 / (2.0 * nd);
      const double half = z * std::sqrt(p * (1.0 - p) / nd + z2 / (4.0 * nd * nd));
      return std::clamp((centre + sign * half) / (1.0 + z2 / nd), 0.0, 1.0);
    };
    ci.lo = wilson(kd - 0.5, -1.0);
    ci.hi = wilson(kd + 0.5, 1.0);
  }
  return ci;
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw InvalidArgument("fit_line: size mismatch");
  LineFit f;
  f.points = x.size();
  if (x.size() < 2) return f;
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0) return f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - f.intercept - f.slope * x[i];
    f.rss += r * r;
  }
  f.r2 = syy > 0.0 ? 1.0 - f.rss / syy : 1.0;
  return f;
}

LineFit fit_through_origin(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw InvalidArgument("fit_through_origin: size mismatch");
  LineFit f;
  f.points = x.size();
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
    syy += y[i] * y[i];
  }
  if (sxx <= 0.0) return f;
  f.slope = sxy / sxx;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - f.slope * x[i];
    f.rss += r * r;
  }
  f.r2 = syy > 0.0 ? 1.0 - f.rss / syy : 1.0;
  return f;
}

}  // namespace concpos
