#pragma once

#include "pwdts/common.hpp"

#include <span>

namespace pwdts {

struct TTestResult {
  double t = 0.0;
  double df = 0.0;
  double p_value = 1.0;
};

/**
 * Two-sided Welch t-test (unequal variances) on two samples of per-dataset
 * or per-group error summaries. Needs at least two observations each;
 * identical samples give p = 1. Throws DegenerateError when both samples
 * have zero variance and different means.
 */
TTestResult paired_ttest(std::span<const double> a, std::span<const double> b);

double mean(std::span<const double> x);
/// Sample standard deviation (n - 1 divisor).
double stddev(std::span<const double> x);
/// Standard error of the mean.
double std_error(std::span<const double> x);

/// sigma^2 ~ InvGamma(shape, rate) as rate / Gamma(shape, 1).
double draw_inv_gamma(double shape, double rate, Rng& rng);

/// Draw from N(Q^{-1} b, Q^{-1}) given the Cholesky factor of the precision Q.
Vector draw_normal_precision(const Eigen::LLT<Matrix>& q_llt, const Vector& b, Rng& rng);

}  // namespace pwdts
