#pragma once

#include "pwdts/common.hpp"
#include "pwdts/student_t.hpp"
#include "pwdts/weights.hpp"

#include <cstddef>
#include <vector>

namespace pwdts {

/**
 * Power-weighted regression sufficient statistics
 *   X'AX, X'Ay, y'Ay, t_alpha = trace(A)
 * with A = diag(w_0, w_1, ...) applied lag-wise (lag 0 = newest row).
 * Exponential weights are maintained by S' = new + alpha * S in O(p^2)
 * per observation.
 */
class WeightedRegressionStats {
 public:
  WeightedRegressionStats() = default;
  explicit WeightedRegressionStats(Index p);

  void update(const Eigen::Ref<const Vector>& x, double y, double alpha);

  /// Recursion over all rows of (X, y) with decay alpha.
  static WeightedRegressionStats exponential(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& y,
                                             double alpha);
  /// Direct accumulation under arbitrary lag weights.
  static WeightedRegressionStats from_weights(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& y,
                                              const WeightVector& weights);

  [[nodiscard]] Index p() const { return xtax_.rows(); }
  [[nodiscard]] const Matrix& xtax() const { return xtax_; }
  [[nodiscard]] const Vector& xtay() const { return xtay_; }
  [[nodiscard]] double ytay() const { return ytay_; }
  [[nodiscard]] double t_alpha() const { return t_alpha_; }
  [[nodiscard]] std::size_t n() const { return n_; }

  /// sum_i w_i (y_i - x_i beta)^2 from the sufficient statistics, clamped at 0.
  [[nodiscard]] double weighted_rss(const Vector& beta) const;

 private:
  Matrix xtax_;
  Vector xtay_;
  double ytay_ = 0.0;
  double t_alpha_ = 0.0;
  std::size_t n_ = 0;
};

/// Normal prior beta ~ N(beta0, diag(1 / precision)); zero precision entries are flat.
struct RegressionPrior {
  Vector beta0;
  Vector precision;

  static RegressionPrior diffuse(Index p) { return {Vector::Zero(p), Vector::Zero(p)}; }
  [[nodiscard]] bool is_diffuse() const { return (precision.array() == 0.0).all(); }
};

/// Plug-in estimates (beta~, V~, sigma~^2) at one prefix.
struct PluginFit {
  Vector beta;
  Matrix V;
  double sigma2 = 0.0;
  double t_alpha = 0.0;

  [[nodiscard]] Index p() const { return beta.size(); }
};

/**
 * Solves the coupled plug-in equations
 *   V~     = (X'AX / s2 + P)^{-1}
 *   beta~  = V~ (X'Ay / s2 + P beta0)
 *   s2     = sum_i w_i (y_i - x_i beta~)^2 / (t_alpha - p)
 * by fixed-point iteration on s2 (a single pass when the prior is flat).
 * Throws DegenerateError when t_alpha <= p + 1, the precision is singular
 * or the residual variance is zero.
 */
PluginFit plugin_fit(const WeightedRegressionStats& stats, const RegressionPrior& prior);

/// Student-t with df = t_alpha - p - 1, location x'beta~, squared scale s2 + x'V~x.
StudentTPredictive plugin_predictive(const PluginFit& fit, const Eigen::Ref<const Vector>& x_next);

/// Convenience route: exponential weights over the whole history.
StudentTPredictive plugin_predictive(const Eigen::Ref<const Matrix>& X_hist, const Eigen::Ref<const Vector>& y_hist,
                                     const Eigen::Ref<const Vector>& x_next, double alpha,
                                     const RegressionPrior& prior);

/// 100 points on [max(0.5, 1 - 1/(p+2)), 1]; the lower end keeps the
/// limiting degrees of freedom 1/(1 - alpha) - p - 1 at least 1.
std::vector<double> regression_alpha_grid(Index p, std::size_t n = 100);

/**
 * Which one-step-ahead terms enter the plug-in objective: row t is scored
 * from rows [0, t) when those rows have full column rank and the scaled
 * count under `alpha_min` exceeds p + 1. Depends only on the prefix, so
 * every alpha >= alpha_min scores the same terms.
 */
std::vector<char> plugin_term_mask(const Eigen::Ref<const Matrix>& X, double alpha_min);

/// Streaming form of plugin_term_mask: call scored(x) for each row in order.
class TermMask {
 public:
  TermMask(Index p, double alpha_min);
  /// Whether this row is scored from the rows seen so far; then folds it in.
  bool next(const Eigen::Ref<const Vector>& x);
  [[nodiscard]] std::size_t rows() const { return n_; }

 private:
  Index p_;
  double alpha_min_;
  Matrix xtx_;
  bool full_rank_ = false;
  std::size_t n_ = 0;
};

struct PluginObjective {
  double value = 0.0;
  std::size_t terms = 0;
  std::size_t skipped = 0;
};

/// Sum of plug-in predictive log densities over masked terms; -inf when any term is degenerate.
PluginObjective plugin_log_pred_likelihood(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& y,
                                           double alpha, const RegressionPrior& prior,
                                           const std::vector<char>& mask);

/**
 * Streaming version of the plug-in objective over a whole alpha grid with
 * a fixed prior. Each observe() scores the new row under every grid value
 * and then folds it into the per-alpha statistics, so the objective at
 * time t equals the batch objective on the prefix [0, t].
 */
class RollingPluginObjective {
 public:
  RollingPluginObjective(Index p, std::vector<double> grid, RegressionPrior prior);

  void observe(const Eigen::Ref<const Vector>& x, double y);
  /// Same, with the scoring decision made by the caller (shared masks across models).
  void observe(const Eigen::Ref<const Vector>& x, double y, bool scored);

  [[nodiscard]] const std::vector<double>& grid() const { return grid_; }
  [[nodiscard]] const std::vector<double>& objective() const { return cumulative_; }
  [[nodiscard]] std::size_t terms() const { return terms_; }
  [[nodiscard]] std::size_t observations() const { return n_; }
  /// Grid index of the maximum (largest alpha on ties), -1 before any term.
  [[nodiscard]] std::ptrdiff_t best_index() const;
  [[nodiscard]] PluginFit fit(std::size_t grid_index) const;
  [[nodiscard]] const WeightedRegressionStats& stats(std::size_t grid_index) const { return stats_[grid_index]; }

 private:
  Index p_;
  std::vector<double> grid_;
  RegressionPrior prior_;
  std::vector<WeightedRegressionStats> stats_;
  std::vector<double> cumulative_;
  TermMask mask_;
  std::size_t n_ = 0;
  std::size_t terms_ = 0;
};

}  // namespace pwdts
