#pragma once

namespace lcausal {

/// Quantile of the standard normal distribution.
double normal_quantile(double p);
/// Quantile of Student's t with df degrees of freedom.
double t_quantile(double p, double df);
/// Two-sided p-value of a t statistic.
double t_two_sided_p(double t, double df);
/// Upper-tail probability of an F(d1, d2) statistic.
double f_upper_p(double f, double d1, double d2);
/// Two-sided p-value of a z statistic.
double z_two_sided_p(double z);

}  // namespace lcausal
