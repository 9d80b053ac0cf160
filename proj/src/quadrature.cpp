#include "degpop/quadrature.hpp"

#include <cmath>

#include <boost/math/quadrature/gauss.hpp>

namespace degpop::quad {

double gauss(const std::function<double(double)>& f, double lo, double hi) {
  if (lo == hi) return 0.0;
  if (hi < lo) return -gauss(f, hi, lo);
  return boost::math::quadrature::gauss<double, 15>::integrate(f, lo, hi);
}

double graded(const std::function<double(double)>& f, double singular, double to, int levels) {
  double total = 0.0, last = 0.0, ratio = 0.0;
  double outer = to;
  for (int l = 0; l < levels; ++l) {
    const double inner = singular + 0.5 * (outer - singular);
    const double panel = gauss(f, inner, outer);
    if (l > 0 && last != 0.0) ratio = panel / last;
    total += panel;
    last = panel;
    outer = inner;
  }
  // Panels of a power-law integrand form a geometric series; add its tail.
  if (ratio > 0.0 && ratio < 1.0) total += last * ratio / (1.0 - ratio);
  return total;
}

}  // namespace degpop::quad
