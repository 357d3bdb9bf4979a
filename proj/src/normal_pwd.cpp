#include "pwdts/normal_pwd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace pwdts {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_alpha(double alpha) {
  require(std::isfinite(alpha) && alpha > 0.0 && alpha <= 1.0,
          "alpha must lie in (0, 1], got " + std::to_string(alpha));
}

void check_finite(std::span<const double> series) {
  for (double v : series) {
    if (!std::isfinite(v)) throw ValidationError("series contains a non-finite value");
  }
}

// Student-t log density with df = t_alpha - 1 and squared scale
// ((t_alpha + 1) / t_alpha) * S, S = t_alpha / (t_alpha - 1) * wvariance.
double predictive_log_density(double y, double t_alpha, double wmean, double wvariance) {
  const double df = t_alpha - 1.0;
  const double scale2 = (t_alpha + 1.0) / (t_alpha - 1.0) * wvariance;
  if (!(df > 0.0) || !(scale2 > 0.0)) return kNegInf;
  const double z2 = (y - wmean) * (y - wmean) / scale2;
  return std::lgamma(0.5 * (df + 1.0)) - std::lgamma(0.5 * df) - 0.5 * std::log(df * std::numbers::pi * scale2) -
         0.5 * (df + 1.0) * std::log1p(z2 / df);
}

}  // namespace

NormalPosterior terminal_posterior(std::span<const double> series, double alpha) {
  require(series.size() >= 2, "terminal_posterior needs at least 2 observations");
  check_alpha(alpha);
  WeightedMoments m;
  for (double y : series) m.update(y, alpha);
  if (!(m.t_alpha() > 1.0)) throw DegenerateError("terminal_posterior: scaled count t_alpha <= 1");
  NormalPosterior post;
  post.mean_loc = m.wmean();
  post.t_alpha = m.t_alpha();
  post.var_shape = 0.5 * (m.t_alpha() - 1.0);
  post.var_rate = 0.5 * m.centered_ss();
  post.degenerate = !(post.var_rate > 0.0);
  return post;
}

StudentTPredictive predictive_from_moments(double t_alpha, double wmean, double wvariance) {
  if (!(t_alpha > 1.0)) throw DegenerateError("predictive: degrees of freedom t_alpha - 1 <= 0");
  const double s = t_alpha / (t_alpha - 1.0) * wvariance;
  StudentTPredictive out;
  out.df = t_alpha - 1.0;
  out.loc = wmean;
  out.scale2 = (t_alpha + 1.0) / t_alpha * s;
  if (!(out.scale2 > 0.0)) throw DegenerateError("predictive: zero weighted variance (constant history)");
  return out;
}

StudentTPredictive predictive(std::span<const double> series, double alpha) {
  require(series.size() >= 2, "predictive needs at least 2 observations");
  check_alpha(alpha);
  WeightedMoments m;
  for (double y : series) m.update(y, alpha);
  return predictive_from_moments(m.t_alpha(), m.wmean(), m.wvariance());
}

StudentTPredictive predictive(std::span<const double> series, const WeightVector& weights) {
  require(series.size() >= 2, "predictive needs at least 2 observations");
  check_finite(series);
  const DirectMoments m = direct_moments(series, weights);
  return predictive_from_moments(m.t_alpha, m.wmean, m.wvariance);
}

PredictiveLogLik log_pred_likelihood(std::span<const double> series, double alpha, double log_prior_alpha) {
  require(series.size() >= 3, "log_pred_likelihood needs at least 3 observations");
  check_alpha(alpha);
  check_finite(series);
  PredictiveLogLik out;
  WeightedMoments m;
  bool distinct = false;
  double sum = 0.0;
  for (std::size_t t = 0; t < series.size(); ++t) {
    const double y = series[t];
    if (t >= 2 && distinct) {
      sum += predictive_log_density(y, m.t_alpha(), m.wmean(), m.wvariance());
      ++out.terms;
    } else if (t >= 1) {
      ++out.skipped;
    }
    if (t > 0 && y != series[0]) distinct = true;
    m.update(y, alpha);
  }
  // The first observation has no predictive at all and is not counted as skipped.
  if (out.terms == 0) throw DegenerateError("log_pred_likelihood: every prefix has zero variance");
  out.value = log_prior_alpha + sum;
  return out;
}

PredictiveLogLik log_pred_likelihood(std::span<const double> series, const Window& window) {
  require(series.size() >= 3, "log_pred_likelihood needs at least 3 observations");
  require(window.length >= 2, "window predictive needs a window of at least 2");
  check_finite(series);
  PredictiveLogLik out;
  WindowedMoments m(window.length);
  double sum = 0.0;
  for (std::size_t t = 0; t < series.size(); ++t) {
    const double y = series[t];
    if (t >= 1) {
      const double var = m.wvariance();
      if (t >= 2 && var > 0.0) {
        sum += predictive_log_density(y, m.t_alpha(), m.wmean(), var);
        ++out.terms;
      } else {
        ++out.skipped;
      }
    }
    m.update(y);
  }
  if (out.terms == 0) throw DegenerateError("log_pred_likelihood: every window has zero variance");
  out.value = sum;
  return out;
}

std::vector<double> linear_grid(double lo, double hi, std::size_t n) {
  require(n >= 1, "grid needs at least one point");
  require(lo <= hi, "grid lower bound exceeds upper bound");
  std::vector<double> g(n);
  if (n == 1) {
    g[0] = hi;
    return g;
  }
  for (std::size_t i = 0; i < n; ++i) {
    g[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  g.back() = hi;
  return g;
}

std::vector<double> default_alpha_grid() { return linear_grid(0.5, 1.0, 100); }

std::ptrdiff_t argmax_largest(const std::vector<double>& values) {
  std::ptrdiff_t best = -1;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) continue;
    if (best < 0 || values[i] >= values[static_cast<std::size_t>(best)]) best = static_cast<std::ptrdiff_t>(i);
  }
  return best;
}

AlphaEstimate estimate_alpha(std::span<const double> series, const std::vector<double>& grid,
                             const LogPrior& log_prior) {
  require(!grid.empty(), "estimate_alpha: empty grid");
  require(std::is_sorted(grid.begin(), grid.end()), "estimate_alpha: grid must be sorted ascending");
  require(grid.front() > 0.0 && grid.back() <= 1.0, "estimate_alpha: grid must lie in (0, 1]");
  AlphaEstimate est;
  est.grid = grid;
  est.per_alpha_loglik.resize(grid.size());
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const double lp = log_prior ? log_prior(grid[g]) : 0.0;
    const PredictiveLogLik ll = log_pred_likelihood(series, grid[g], lp);
    est.per_alpha_loglik[g] = ll.value;
    est.terms = ll.terms;
    est.skipped = ll.skipped;
  }
  const std::ptrdiff_t best = argmax_largest(est.per_alpha_loglik);
  if (best < 0) throw DegenerateError("estimate_alpha: every grid point is degenerate");
  est.alpha_star = grid[static_cast<std::size_t>(best)];
  est.log_pred_lik = est.per_alpha_loglik[static_cast<std::size_t>(best)];
  return est;
}

}  // namespace pwdts
