#include "lcausal/stats.hpp"

#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>

#include "lcausal/error.hpp"

namespace lcausal {

double normal_quantile(double p)
{
    if (!(p > 0.0 && p < 1.0)) throw InputError("normal quantile needs p in (0, 1)");
    return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

double t_quantile(double p, double df)
{
    if (!(p > 0.0 && p < 1.0)) throw InputError("t quantile needs p in (0, 1)");
    if (!(df > 0.0)) throw InputError("t quantile needs positive degrees of freedom");
    return boost::math::quantile(boost::math::students_t_distribution<double>(df), p);
}

double t_two_sided_p(double t, double df)
{
    if (!(df > 0.0)) throw InputError("t test needs positive degrees of freedom");
    if (std::isnan(t)) return std::nan("");
    if (std::isinf(t)) return 0.0;
    return 2.0 * boost::math::cdf(boost::math::complement(boost::math::students_t_distribution<double>(df), std::abs(t)));
}

double f_upper_p(double f, double d1, double d2)
{
    if (!(d1 > 0.0 && d2 > 0.0)) throw InputError("F test needs positive degrees of freedom");
    if (std::isnan(f)) return std::nan("");
    if (f <= 0.0) return 1.0;
    if (std::isinf(f)) return 0.0;
    return boost::math::cdf(boost::math::complement(boost::math::fisher_f_distribution<double>(d1, d2), f));
}

double z_two_sided_p(double z)
{
    if (std::isnan(z)) return std::nan("");
    return std::erfc(std::abs(z) / std::sqrt(2.0));
}

}  // namespace lcausal
