#include "sbmtest/math_util.hpp"

#include <boost/math/distributions/normal.hpp>

#include "sbmtest/errors.hpp"

namespace sbmtest {

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw parameter_error("normal_quantile: p must lie in (0,1)");
    static const boost::math::normal_distribution<double> dist;
    return boost::math::quantile(dist, p);
}

} // namespace sbmtest
