#pragma once

#include <cstdint>
#include <vector>

namespace concpos {

/// Streaming central moments up to order four with an exact pairwise merge.
struct Moments {
  std::int64_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;
  double m3 = 0.0;
  double m4 = 0.0;

  void push(double x);
  void merge(const Moments& other);

  double variance() const;         // unbiased
  double stderr_mean() const;
  double stderr_variance() const;  // large-sample standard error of variance()
};

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
};

/// Exact binomial interval for `successes` out of `trials` at the given two-sided confidence.
/// With zero successes the upper end is the one-sided bound 1 - (1-confidence)^(1/trials),
/// and symmetrically for `successes == trials`.
Interval clopper_pearson(std::int64_t successes, std::int64_t trials, double confidence);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  double rss = 0.0;
  std::size_t points = 0;
};

/// Ordinary least squares y ~ intercept + slope * x.
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

/// Least squares y ~ slope * x through the origin.
LineFit fit_through_origin(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace concpos
