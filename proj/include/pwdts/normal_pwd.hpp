#pragma once

#include "pwdts/common.hpp"
#include "pwdts/student_t.hpp"
#include "pwdts/weights.hpp"

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace pwdts {

/**
 * Terminal posterior of a normal series with unknown mean and variance
 * under the noninformative prior p(mu, sigma^2) ~ 1/sigma^2 and
 * exponentially power-weighted likelihood:
 *
 *   mu | sigma^2   ~ N(mean_loc, sigma^2 / t_alpha)
 *   sigma^2        ~ InvGamma(var_shape, var_rate)
 *
 * `degenerate` is set when the weighted variance is zero (constant
 * series); var_rate is then 0 and the InvGamma does not exist.
 */
struct NormalPosterior {
  double mean_loc = 0.0;
  double t_alpha = 0.0;
  double var_shape = 0.0;
  double var_rate = 0.0;
  bool degenerate = false;

  /// Conditional variance of the terminal mean given sigma^2.
  [[nodiscard]] double mean_scale2(double sigma2) const { return sigma2 / t_alpha; }
};

NormalPosterior terminal_posterior(std::span<const double> series, double alpha);

/// Builds the Student-t predictive from weighted moments.
/// Throws DegenerateError when t_alpha <= 1 or the weighted variance is zero.
StudentTPredictive predictive_from_moments(double t_alpha, double wmean, double wvariance);

StudentTPredictive predictive(std::span<const double> series, double alpha);

/// Predictive under arbitrary lag weights (window, linear, explicit).
StudentTPredictive predictive(std::span<const double> series, const WeightVector& weights);

struct PredictiveLogLik {
  double value = 0.0;
  std::size_t terms = 0;
  std::size_t skipped = 0;
};

/**
 * log p0(alpha) + sum_t log p(y_t | y_{1:t-1}, alpha), evaluated in O(T).
 *
 * A term is used when its prefix holds at least two distinct values; the
 * rule does not depend on alpha, so every grid point scores the same terms.
 * Throws DegenerateError when no term is usable.
 */
PredictiveLogLik log_pred_likelihood(std::span<const double> series, double alpha, double log_prior_alpha = 0.0);

/// Same objective under a rolling window of `length` observations (ring-buffer recursion).
PredictiveLogLik log_pred_likelihood(std::span<const double> series, const Window& window);

struct AlphaEstimate {
  double alpha_star = 1.0;
  double log_pred_lik = 0.0;
  std::vector<double> grid;
  std::vector<double> per_alpha_loglik;
  std::size_t terms = 0;
  std::size_t skipped = 0;
};

/// `n` equally spaced points on [lo, hi].
std::vector<double> linear_grid(double lo, double hi, std::size_t n);

/// 100 points on [0.5, 1].
std::vector<double> default_alpha_grid();

using LogPrior = std::function<double(double)>;

/// Grid argmax of the one-step-ahead predictive log likelihood; ties go to the largest alpha.
AlphaEstimate estimate_alpha(std::span<const double> series, const std::vector<double>& grid = default_alpha_grid(),
                             const LogPrior& log_prior = {});

/// Shared argmax rule: largest grid index among the maximal finite values, or -1.
std::ptrdiff_t argmax_largest(const std::vector<double>& values);

}  // namespace pwdts
