#pragma once

namespace sofd {

double log_beta(double a, double b);

/// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
double regularized_incomplete_beta(double a, double b, double x);

/// CDF of the Fisher F distribution with (d1, d2) degrees of freedom.
double f_cdf(double x, double d1, double d2);

/// Upper-alpha quantile q with P(F(d1,d2) > q) = alpha.
/// Deterministic bracketing + bisection, accurate well below 1e-8 relative.
double f_upper_quantile(double d1, double d2, double alpha);

}  // namespace sofd
