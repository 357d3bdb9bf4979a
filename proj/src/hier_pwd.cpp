#include "pwdts/hier_pwd.hpp"

#include "pwdts/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

namespace pwdts {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kVarianceFloor = 1e-12;

Vector column_means(const Matrix& betas) { return betas.colwise().mean().transpose(); }

}  // namespace

RegressionPrior GlobalParams::prior() const {
  RegressionPrior out{beta0, Vector::Zero(beta0.size())};
  for (Index k = 0; k < tau2.size(); ++k) out.precision[k] = std::isinf(tau2[k]) ? 0.0 : 1.0 / tau2[k];
  return out;
}

void GibbsConfig::validate() const {
  require(iterations > 0, "gibbs: iterations must be positive");
  require(burn_in >= 0 && burn_in < iterations, "gibbs: burn_in must lie in [0, iterations)");
  require(alpha_convergence_threshold > 0.0, "gibbs: alpha convergence threshold must be positive");
  require(max_alpha_iterations >= 1, "gibbs: max_alpha_iterations must be at least 1");
}

GlobalConditionals global_conditionals(const Matrix& betas, const Vector& beta0) {
  require(betas.rows() >= 2, "global conditionals need at least two groups");
  require(beta0.size() == betas.cols(), "global conditionals: beta0 dimension mismatch");
  GlobalConditionals c;
  c.J = static_cast<double>(betas.rows());
  c.tau2_shape = 0.5 * c.J;
  c.beta0_mean = column_means(betas);
  c.tau2_rate = 0.5 * (betas.rowwise() - beta0.transpose()).colwise().squaredNorm().transpose();
  return c;
}

GlobalParams gibbs_global(const Matrix& betas, const Vector& beta0, Rng& rng) {
  const GlobalConditionals c = global_conditionals(betas, beta0);
  const Index p = betas.cols();
  GlobalParams g{Vector(p), Vector(p)};
  std::normal_distribution<double> n01;
  for (Index k = 0; k < p; ++k) {
    g.tau2[k] = std::max(draw_inv_gamma(c.tau2_shape, c.tau2_rate[k], rng), kVarianceFloor);
    g.beta0[k] = c.beta0_mean[k] + std::sqrt(g.tau2[k] / c.J) * n01(rng);
  }
  return g;
}

GroupConditional group_conditional(const WeightedRegressionStats& stats, const GlobalParams& global, double sigma2) {
  const Index p = stats.p();
  require(global.beta0.size() == p && global.tau2.size() == p, "group conditional: global dimension mismatch");
  require(sigma2 > 0.0, "group conditional: sigma2 must be positive");
  const RegressionPrior prior = global.prior();
  GroupConditional c;
  c.precision = stats.xtax() / sigma2;
  c.precision.diagonal() += prior.precision;
  Eigen::LLT<Matrix> llt(c.precision);
  if (llt.info() != Eigen::Success) throw DegenerateError("group conditional: singular weighted precision");
  c.mean = llt.solve(stats.xtay() / sigma2 + prior.precision.cwiseProduct(prior.beta0));
  return c;
}

GroupTerminalState gibbs_group_terminal(const WeightedRegressionStats& stats, double alpha, const GlobalParams& global,
                                        double sigma2, Rng& rng) {
  const double p = static_cast<double>(stats.p());
  if (!(stats.t_alpha() > p + 1.0)) {
    throw DegenerateError("group conditional: scaled count " + std::to_string(stats.t_alpha()) + " <= p + 1");
  }
  const RegressionPrior prior = global.prior();
  Matrix q = stats.xtax() / sigma2;
  q.diagonal() += prior.precision;
  Eigen::LLT<Matrix> llt(q);
  if (llt.info() != Eigen::Success) throw DegenerateError("group conditional: singular weighted precision");
  GroupTerminalState st;
  st.alpha = alpha;
  st.beta = draw_normal_precision(llt, stats.xtay() / sigma2 + prior.precision.cwiseProduct(prior.beta0), rng);
  const double rate = 0.5 * stats.weighted_rss(st.beta);
  st.sigma2 = std::max(draw_inv_gamma(0.5 * stats.t_alpha(), rate, rng), kVarianceFloor);
  return st;
}

GroupTerminalState gibbs_group_terminal(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& y,
                                        double alpha, const GlobalParams& global, double sigma2, Rng& rng) {
  require(alpha > 0.0 && alpha <= 1.0, "group conditional: alpha must lie in (0, 1]");
  return gibbs_group_terminal(WeightedRegressionStats::exponential(X, y, alpha), alpha, global, sigma2, rng);
}

RegressionPrior plugin_prior(const std::vector<Vector>& betas) {
  require(!betas.empty(), "plugin prior: no groups");
  const Index p = betas.front().size();
  const auto J = static_cast<double>(betas.size());
  RegressionPrior prior = RegressionPrior::diffuse(p);
  for (const Vector& b : betas) prior.beta0 += b;
  prior.beta0 /= J;
  if (betas.size() < 2) return prior;
  Vector ss = Vector::Zero(p);
  for (const Vector& b : betas) ss += (b - prior.beta0).cwiseAbs2();
  for (Index k = 0; k < p; ++k) {
    const double tau2 = ss[k] / (J - 1.0);
    prior.precision[k] = tau2 > 0.0 ? 1.0 / tau2 : 0.0;
  }
  return prior;
}

PluginAlphaResult estimate_alphas_plugin(const PanelView& panel, std::vector<double> grid, const GibbsConfig& config,
                                         bool hierarchical) {
  config.validate();
  const Index J = panel.J(), p = panel.p(), T = panel.T();
  require(J >= 1, "estimate_alphas_plugin: empty panel");
  require(T >= p + 3, "estimate_alphas_plugin needs T >= p + 3");
  if (grid.empty()) grid = regression_alpha_grid(p);
  require(std::is_sorted(grid.begin(), grid.end()) && grid.front() > 0.0 && grid.back() <= 1.0,
          "estimate_alphas_plugin: grid must be sorted within (0, 1]");

  std::vector<std::vector<char>> masks;
  masks.reserve(static_cast<std::size_t>(J));
  for (Index j = 0; j < J; ++j) masks.push_back(plugin_term_mask(panel.X(j), grid.front()));

  PluginAlphaResult out;
  out.groups.resize(static_cast<std::size_t>(J));
  std::vector<double> alphas(static_cast<std::size_t>(J), 1.0);
  RegressionPrior prior = RegressionPrior::diffuse(p);
  const bool pooled = hierarchical && J >= 2;

  for (int it = 1; it <= config.max_alpha_iterations; ++it) {
    out.iterations = it;
    if (pooled) {
      std::vector<Vector> betas;
      betas.reserve(static_cast<std::size_t>(J));
      for (Index j = 0; j < J; ++j) {
        const auto stats = WeightedRegressionStats::exponential(panel.X(j), panel.y(j), alphas[static_cast<std::size_t>(j)]);
        betas.push_back(plugin_fit(stats, prior).beta);
      }
      prior = plugin_prior(betas);
    }
    double max_delta = 0.0;
    for (Index j = 0; j < J; ++j) {
      const auto ju = static_cast<std::size_t>(j);
      RollingPluginObjective obj(p, grid, prior);
      const auto X = panel.X(j);
      const auto y = panel.y(j);
      for (Index t = 0; t < T; ++t) obj.observe(X.row(t).transpose(), y[t], masks[ju][static_cast<std::size_t>(t)]);
      AlphaEstimate& est = out.groups[ju];
      est.grid = grid;
      est.per_alpha_loglik = obj.objective();
      est.terms = obj.terms();
      est.skipped = static_cast<std::size_t>(T) - obj.terms() - 1;
      const std::ptrdiff_t best = obj.best_index();
      est.alpha_star = best >= 0 ? grid[static_cast<std::size_t>(best)] : 1.0;
      est.log_pred_lik = best >= 0 ? est.per_alpha_loglik[static_cast<std::size_t>(best)]
                                   : -std::numeric_limits<double>::infinity();
      max_delta = std::max(max_delta, std::abs(est.alpha_star - alphas[ju]));
      alphas[ju] = est.alpha_star;
    }
    // With a flat prior the objective does not depend on the other groups: one pass suffices.
    if (!pooled || max_delta < config.alpha_convergence_threshold) {
      out.converged = true;
      break;
    }
  }
  out.prior = prior;
  out.fits.reserve(static_cast<std::size_t>(J));
  for (Index j = 0; j < J; ++j) {
    const auto stats = WeightedRegressionStats::exponential(panel.X(j), panel.y(j), alphas[static_cast<std::size_t>(j)]);
    out.fits.push_back(plugin_fit(stats, prior));
  }
  return out;
}

TerminalFit fit_predict_terminal(const PanelView& panel, const std::vector<double>& alphas, const GibbsConfig& config,
                                 const Matrix& x_next) {
  config.validate();
  const Index J = panel.J(), p = panel.p();
  require(J >= 1, "fit_predict_terminal: empty panel");
  require(static_cast<Index>(alphas.size()) == J, "fit_predict_terminal: one alpha per group required");
  const bool predict = x_next.size() > 0;
  require(!predict || (x_next.rows() == J && x_next.cols() == p), "fit_predict_terminal: x_next must be J x p");

  std::vector<WeightedRegressionStats> stats;
  stats.reserve(static_cast<std::size_t>(J));
  Matrix betas(J, p);
  std::vector<double> sigma2(static_cast<std::size_t>(J));
  for (Index j = 0; j < J; ++j) {
    const double a = alphas[static_cast<std::size_t>(j)];
    require(a > 0.0 && a <= 1.0, "fit_predict_terminal: alpha must lie in (0, 1]");
    stats.push_back(WeightedRegressionStats::exponential(panel.X(j), panel.y(j), a));
    const auto& s = stats.back();
    if (!(s.t_alpha() > static_cast<double>(p) + 1.0)) {
      throw DegenerateError("fit_predict_terminal: group " + panel.name(j) + " has scaled count <= p + 1");
    }
    Matrix ridged = s.xtax();
    ridged.diagonal().array() += 1e-8 * (s.xtax().trace() / static_cast<double>(p) + 1e-300);
    const Vector b = ridged.ldlt().solve(s.xtay());
    betas.row(j) = b.transpose();
    sigma2[static_cast<std::size_t>(j)] =
        std::max(s.weighted_rss(b) / std::max(s.t_alpha() - static_cast<double>(p), 1.0), kVarianceFloor);
  }

  const bool pooled = J >= 2;
  GlobalParams global{column_means(betas), Vector::Constant(p, kInf)};
  if (pooled) {
    global.tau2 = (betas.rowwise() - global.beta0.transpose()).colwise().squaredNorm().transpose() /
                  static_cast<double>(J - 1);
    global.tau2 = global.tau2.cwiseMax(kVarianceFloor);
  }

  Rng global_rng = make_stream(config.seed, 0);
  std::vector<Rng> group_rng;
  group_rng.reserve(static_cast<std::size_t>(J));
  for (Index j = 0; j < J; ++j) group_rng.push_back(make_stream(config.seed, static_cast<std::uint64_t>(j) + 1));

  const int kept = config.iterations - config.burn_in;
  std::vector<Vector> b_sum(static_cast<std::size_t>(J), Vector::Zero(p));
  std::vector<Vector> b_sq(static_cast<std::size_t>(J), Vector::Zero(p));
  std::vector<double> s_sum(static_cast<std::size_t>(J), 0.0), s_sq(static_cast<std::size_t>(J), 0.0);
  std::vector<double> f_sum(static_cast<std::size_t>(J), 0.0), f_sq(static_cast<std::size_t>(J), 0.0);
  TerminalFit out;
  out.pooled = pooled;
  if (pooled) out.beta0_draws.resize(kept, p);
  Vector tau2_sum = Vector::Zero(p);

  for (int it = 0; it < config.iterations; ++it) {
    for (Index j = 0; j < J; ++j) {
      const auto ju = static_cast<std::size_t>(j);
      const GroupTerminalState st = gibbs_group_terminal(stats[ju], alphas[ju], global, sigma2[ju], group_rng[ju]);
      betas.row(j) = st.beta.transpose();
      sigma2[ju] = st.sigma2;
    }
    if (pooled) global = gibbs_global(betas, global.beta0, global_rng);
    if (it < config.burn_in) continue;
    const int k = it - config.burn_in;
    for (Index j = 0; j < J; ++j) {
      const auto ju = static_cast<std::size_t>(j);
      const Vector b = betas.row(j).transpose();
      b_sum[ju] += b;
      b_sq[ju] += b.cwiseAbs2();
      s_sum[ju] += sigma2[ju];
      s_sq[ju] += sigma2[ju] * sigma2[ju];
      if (predict) {
        const double f = x_next.row(j).dot(betas.row(j));
        f_sum[ju] += f;
        f_sq[ju] += f * f;
      }
    }
    if (pooled) {
      out.beta0_draws.row(k) = global.beta0.transpose();
      tau2_sum += global.tau2;
    }
  }

  const auto n = static_cast<double>(kept);
  auto sd = [n](double sum, double sq) { return std::sqrt(std::max(sq / n - (sum / n) * (sum / n), 0.0)); };
  out.groups.resize(static_cast<std::size_t>(J));
  for (Index j = 0; j < J; ++j) {
    const auto ju = static_cast<std::size_t>(j);
    GroupPosteriorSummary& g = out.groups[ju];
    g.alpha = alphas[ju];
    g.beta_mean = b_sum[ju] / n;
    g.beta_sd.resize(p);
    for (Index k = 0; k < p; ++k) g.beta_sd[k] = sd(b_sum[ju][k], b_sq[ju][k]);
    g.sigma2_mean = s_sum[ju] / n;
    g.sigma2_sd = sd(s_sum[ju], s_sq[ju]);
    if (predict) {
      g.pred_mean = f_sum[ju] / n;
      const double s = sd(f_sum[ju], f_sq[ju]);
      g.pred_var = s * s + g.sigma2_mean;
    }
  }
  if (pooled) {
    out.beta0_mean = out.beta0_draws.colwise().mean().transpose();
    out.beta0_sd.resize(p);
    for (Index k = 0; k < p; ++k) {
      const double m = out.beta0_mean[k];
      out.beta0_sd[k] = std::sqrt((out.beta0_draws.col(k).array() - m).square().sum() / n);
    }
    out.tau2_mean = tau2_sum / n;
  } else {
    out.beta0_mean = out.groups[0].beta_mean;
    out.beta0_sd = Vector::Constant(p, kInf);
    out.tau2_mean = Vector::Constant(p, kInf);
  }
  return out;
}

}  // namespace pwdts
