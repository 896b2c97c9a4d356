#include "zkstar/stats.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <stdexcept>

namespace zkstar {

double chi_squared_ucl(int dof, double alpha) {
  if (dof < 1) throw std::invalid_argument("chi_squared_ucl: dof must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("chi_squared_ucl: alpha must lie in (0, 1)");
  boost::math::chi_squared dist(static_cast<double>(dof));
  return boost::math::quantile(boost::math::complement(dist, alpha));
}

double chi_squared_tail(int dof, double x) {
  if (dof < 1) throw std::invalid_argument("chi_squared_tail: dof must be >= 1");
  if (x <= 0.0) return 1.0;
  boost::math::chi_squared dist(static_cast<double>(dof));
  return boost::math::cdf(boost::math::complement(dist, x));
}

}  // namespace zkstar
