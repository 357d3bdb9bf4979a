#pragma once

#include "pwdts/common.hpp"
#include "pwdts/normal_pwd.hpp"
#include "pwdts/panel.hpp"
#include "pwdts/weighted_regression.hpp"

#include <cstdint>
#include <vector>

namespace pwdts {

/// beta0 and the diagonal of Sigma0. Infinite tau2 entries mean a flat prior component.
struct GlobalParams {
  Vector beta0;
  Vector tau2;

  [[nodiscard]] RegressionPrior prior() const;
};

struct GroupTerminalState {
  Vector beta;
  double sigma2 = 0.0;
  double alpha = 1.0;
};

struct GibbsConfig {
  int iterations = 500;
  int burn_in = 100;
  std::uint64_t seed = 0;
  double alpha_convergence_threshold = 0.005;
  int max_alpha_iterations = 50;

  void validate() const;
};

/// Parameters of the global conditionals given the group coefficients.
struct GlobalConditionals {
  double tau2_shape = 0.0;  ///< J / 2
  Vector tau2_rate;         ///< 0.5 sum_j (beta_jk - beta0_k)^2 at the current beta0
  Vector beta0_mean;        ///< sum_j beta_jk / J
  double J = 0.0;
};

GlobalConditionals global_conditionals(const Matrix& betas, const Vector& beta0);

/**
 * One global sweep: tau2_k ~ InvGamma(J/2, rate_k) at the current beta0,
 * then beta0_k ~ N(mean_k, tau2_k / J). `betas` is J x p. Needs J >= 2.
 */
GlobalParams gibbs_global(const Matrix& betas, const Vector& beta0, Rng& rng);

/**
 * Terminal group conditionals under weights A = diag(1, alpha, alpha^2, ...):
 *   beta   ~ N(V (X'Ay / s2 + P beta0), V),  V = (X'AX / s2 + P)^{-1}
 *   sigma2 ~ InvGamma(t_alpha / 2, wRSS(beta) / 2)
 * beta is drawn at the incoming sigma2, then sigma2 at the new beta.
 */
GroupTerminalState gibbs_group_terminal(const WeightedRegressionStats& stats, double alpha, const GlobalParams& global,
                                        double sigma2, Rng& rng);

GroupTerminalState gibbs_group_terminal(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& y,
                                        double alpha, const GlobalParams& global, double sigma2, Rng& rng);

/// Mean and precision of the beta conditional (no draw).
struct GroupConditional {
  Vector mean;
  Matrix precision;
};
GroupConditional group_conditional(const WeightedRegressionStats& stats, const GlobalParams& global, double sigma2);

/**
 * Plug-in hierarchical prior from per-group point estimates: beta0~ is the
 * cross-group mean, tau2~_k the componentwise variance with divisor J - 1.
 * Components without dispersion, or J < 2, get a flat prior.
 */
RegressionPrior plugin_prior(const std::vector<Vector>& betas);

struct PluginAlphaResult {
  std::vector<AlphaEstimate> groups;
  std::vector<PluginFit> fits;  ///< terminal plug-in fits at alpha*_j
  RegressionPrior prior;        ///< plug-in prior used in the last optimization pass
  int iterations = 0;
  bool converged = false;
};

/**
 * Alternates between the plug-in estimators at the current alphas and a
 * grid maximization of each group's one-step-ahead plug-in log
 * likelihood; starts from alpha = 1 and stops when max |delta alpha_j|
 * falls below the threshold. `hierarchical = false` keeps a flat prior
 * (separate fits). An empty grid selects regression_alpha_grid(p).
 */
PluginAlphaResult estimate_alphas_plugin(const PanelView& panel, std::vector<double> grid = {},
                                         const GibbsConfig& config = {}, bool hierarchical = true);

struct GroupPosteriorSummary {
  Vector beta_mean;
  Vector beta_sd;
  double sigma2_mean = 0.0;
  double sigma2_sd = 0.0;
  double alpha = 1.0;
  double pred_mean = 0.0;  ///< of y_{T+1}, when x_next is given
  double pred_var = 0.0;
};

struct TerminalFit {
  std::vector<GroupPosteriorSummary> groups;
  Vector beta0_mean;
  Vector beta0_sd;
  Vector tau2_mean;
  Matrix beta0_draws;  ///< kept draws x p; empty when J = 1
  bool pooled = true;
};

/**
 * Gibbs sampler for the terminal coefficients: per-group weighted
 * conditionals plus the global step, `iterations` sweeps with the first
 * `burn_in` discarded. `x_next` (J x p, optional) adds a predictive summary
 * of y_{T+1}. Group j draws from stream j + 1 of the seed, the global step
 * from stream 0. A single group is fit without pooling (flat prior).
 */
TerminalFit fit_predict_terminal(const PanelView& panel, const std::vector<double>& alphas, const GibbsConfig& config,
                                 const Matrix& x_next = Matrix());

}  // namespace pwdts
