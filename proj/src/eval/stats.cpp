#include <boost/math/distributions/students_t.hpp>
#include <cmath>

#include "vicsim/error.hpp"
#include "vicsim/eval.hpp"
#include "vicsim/text.hpp"

namespace vicsim {

double student_t_two_sided_p(double t, double df) {
  if (!(df > 0)) throw InvalidArgument("degrees of freedom must be positive");
  if (std::isinf(t)) return 0.0;
  boost::math::students_t dist(df);
  return std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))));
}

Correlation pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw InvalidArgument("pearson: length mismatch");
  if (x.size() < 2) throw InvalidArgument("pearson: need at least 2 points");
  Correlation c;
  c.n = x.size();
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0 || syy == 0) {
    c.zero_variance = true;
    return c;
  }
  const double r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  c.r = r;
  if (c.n >= 3) {
    const double df = n - 2;
    const double denom = 1 - r * r;
    c.p_value = denom <= 0 ? 0.0 : student_t_two_sided_p(r * std::sqrt(df / denom), df);
  }
  return c;
}

PairedTest paired_rating_test(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw InvalidArgument("paired_rating_test: length mismatch");
  if (a.size() < 2) throw InvalidArgument("paired_rating_test: need at least 2 pairs");
  PairedTest t;
  t.n = a.size();
  const double n = static_cast<double>(a.size());
  double mean = 0;
  for (std::size_t i = 0; i < a.size(); ++i) mean += a[i] - b[i];
  mean /= n;
  double ss = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i] - mean;
    ss += d * d;
  }
  t.mean_difference = mean;
  if (ss == 0) {
    t.zero_variance = true;
    return t;
  }
  const double sd = std::sqrt(ss / (n - 1));
  t.t = mean / (sd / std::sqrt(n));
  t.p_value = student_t_two_sided_p(*t.t, n - 1);
  return t;
}

std::size_t word_count(std::string_view s) { return text::split_whitespace(text::trim(s)).size(); }

}  // namespace vicsim
