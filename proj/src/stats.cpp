#include "mripp/stats.hpp"

#include <boost/math/distributions/students_t.hpp>
#include <cmath>

#include "mripp/errors.hpp"

namespace mripp {

double mean(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double stddev(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

TTestResult welch_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw PreconditionError("welch_t_test needs at least 2 samples per group");
  const double va = stddev(a) * stddev(a) / static_cast<double>(a.size());
  const double vb = stddev(b) * stddev(b) / static_cast<double>(b.size());
  TTestResult r;
  const double diff = mean(a) - mean(b);
  if (va + vb == 0.0) {
    r.t = diff == 0.0 ? 0.0 : std::copysign(INFINITY, diff);
    r.dof = static_cast<double>(a.size() + b.size() - 2);
    r.p_two_sided = diff == 0.0 ? 1.0 : 0.0;
    r.p_greater = diff > 0.0 ? 0.0 : 1.0;
    return r;
  }
  r.t = diff / std::sqrt(va + vb);
  r.dof = (va + vb) * (va + vb) /
          (va * va / static_cast<double>(a.size() - 1) + vb * vb / static_cast<double>(b.size() - 1));
  const boost::math::students_t dist(r.dof);
  r.p_greater = boost::math::cdf(boost::math::complement(dist, r.t));
  r.p_two_sided = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t)));
  return r;
}

}  // namespace mripp
