#pragma once

#include <span>

namespace mripp {

double mean(std::span<const double> xs);
/// Sample standard deviation (n - 1 denominator); 0 for fewer than 2 values.
double stddev(std::span<const double> xs);

struct TTestResult {
  double t = 0.0;
  double dof = 0.0;
  /// Two-sided p-value.
  double p_two_sided = 1.0;
  /// One-sided p-value for mean(a) > mean(b).
  double p_greater = 1.0;
};

/// Unpaired two-sample t-test with unequal variances (Welch).
TTestResult welch_t_test(std::span<const double> a, std::span<const double> b);

}  // namespace mripp
