#include "pwdts/weighted_regression.hpp"

#include "pwdts/normal_pwd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace pwdts {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr int kMaxFixedPoint = 50;
constexpr double kFixedPointTol = 1e-12;
constexpr double kDfMargin = 1e-9;

bool full_column_rank(const Matrix& xtx) {
  if (xtx.rows() == 0) return true;
  Eigen::SelfAdjointEigenSolver<Matrix> es(xtx, Eigen::EigenvaluesOnly);
  const double hi = es.eigenvalues().maxCoeff();
  return hi > 0.0 && es.eigenvalues().minCoeff() > 1e-10 * hi;
}

// Cheap conditioning proxy from the Cholesky pivots.
bool well_conditioned(const Eigen::LLT<Matrix>& llt) {
  const Vector d = llt.matrixLLT().diagonal().cwiseAbs2();
  return d.size() == 0 || (d.maxCoeff() > 0.0 && d.minCoeff() > 1e-14 * d.maxCoeff());
}

}  // namespace

WeightedRegressionStats::WeightedRegressionStats(Index p) : xtax_(Matrix::Zero(p, p)), xtay_(Vector::Zero(p)) {}

void WeightedRegressionStats::update(const Eigen::Ref<const Vector>& x, double y, double alpha) {
  xtax_ *= alpha;
  xtax_.noalias() += x * x.transpose();
  xtay_ *= alpha;
  xtay_.noalias() += x * y;
  ytay_ = alpha * ytay_ + y * y;
  t_alpha_ = alpha * t_alpha_ + 1.0;
  ++n_;
}

WeightedRegressionStats WeightedRegressionStats::exponential(const Eigen::Ref<const Matrix>& X,
                                                             const Eigen::Ref<const Vector>& y, double alpha) {
  require(X.rows() == y.size(), "regression stats: X and y lengths differ");
  WeightedRegressionStats s(X.cols());
  for (Index t = 0; t < X.rows(); ++t) s.update(X.row(t).transpose(), y[t], alpha);
  return s;
}

WeightedRegressionStats WeightedRegressionStats::from_weights(const Eigen::Ref<const Matrix>& X,
                                                              const Eigen::Ref<const Vector>& y,
                                                              const WeightVector& weights) {
  require(X.rows() == y.size(), "regression stats: X and y lengths differ");
  require(weights.size() >= static_cast<std::size_t>(X.rows()), "regression stats: weight vector too short");
  const Index n = X.rows();
  WeightedRegressionStats s(X.cols());
  for (Index t = 0; t < n; ++t) {
    const double w = weights[static_cast<std::size_t>(n - 1 - t)];
    if (w == 0.0) continue;
    s.xtax_.noalias() += w * X.row(t).transpose() * X.row(t);
    s.xtay_.noalias() += w * y[t] * X.row(t).transpose();
    s.ytay_ += w * y[t] * y[t];
  }
  s.t_alpha_ = 0.0;
  for (Index t = 0; t < n; ++t) s.t_alpha_ += weights[static_cast<std::size_t>(t)];
  s.n_ = static_cast<std::size_t>(n);
  return s;
}

double WeightedRegressionStats::weighted_rss(const Vector& beta) const {
  const double rss = ytay_ - 2.0 * beta.dot(xtay_) + beta.dot(xtax_ * beta);
  return std::max(rss, 0.0);
}

PluginFit plugin_fit(const WeightedRegressionStats& stats, const RegressionPrior& prior) {
  const Index p = stats.p();
  require(prior.beta0.size() == p && prior.precision.size() == p, "plugin_fit: prior dimension mismatch");
  const double t_alpha = stats.t_alpha();
  if (!(t_alpha > static_cast<double>(p) + 1.0)) {
    throw DegenerateError("plugin_fit: scaled count " + std::to_string(t_alpha) + " <= p + 1");
  }
  const double dof = t_alpha - static_cast<double>(p);
  PluginFit fit;
  fit.t_alpha = t_alpha;

  if (prior.is_diffuse()) {
    Eigen::LLT<Matrix> llt(stats.xtax());
    if (llt.info() != Eigen::Success || !well_conditioned(llt)) {
      throw DegenerateError("plugin_fit: singular weighted precision X'AX");
    }
    fit.beta = llt.solve(stats.xtay());
    fit.sigma2 = stats.weighted_rss(fit.beta) / dof;
    if (!(fit.sigma2 > 0.0)) throw DegenerateError("plugin_fit: zero residual variance");
    fit.V = fit.sigma2 * llt.solve(Matrix::Identity(p, p));
    return fit;
  }

  // Starting value: lightly ridged weighted least squares.
  const double ridge = 1e-8 * (stats.xtax().trace() / static_cast<double>(p) + 1e-300);
  Matrix ridged = stats.xtax();
  ridged.diagonal().array() += ridge;
  Vector beta = ridged.ldlt().solve(stats.xtay());
  double sigma2 = stats.weighted_rss(beta) / dof;
  if (!(sigma2 > 0.0)) throw DegenerateError("plugin_fit: zero residual variance");

  const Vector prior_term = prior.precision.cwiseProduct(prior.beta0);
  Eigen::LLT<Matrix> llt;
  auto solve_at = [&](double s2) {
    Matrix q = stats.xtax() / s2;
    q.diagonal() += prior.precision;
    llt.compute(q);
    if (llt.info() != Eigen::Success) throw DegenerateError("plugin_fit: singular posterior precision");
    beta = llt.solve(stats.xtay() / s2 + prior_term);
  };
  for (int it = 0; it < kMaxFixedPoint; ++it) {
    solve_at(sigma2);
    const double next = stats.weighted_rss(beta) / dof;
    if (!(next > 0.0)) throw DegenerateError("plugin_fit: zero residual variance");
    const bool converged = std::abs(next - sigma2) <= kFixedPointTol * sigma2;
    sigma2 = next;
    if (converged) break;
  }
  solve_at(sigma2);
  fit.beta = beta;
  fit.sigma2 = sigma2;
  fit.V = llt.solve(Matrix::Identity(p, p));
  return fit;
}

StudentTPredictive plugin_predictive(const PluginFit& fit, const Eigen::Ref<const Vector>& x_next) {
  require(x_next.size() == fit.p(), "plugin_predictive: covariate dimension mismatch");
  StudentTPredictive out;
  out.df = fit.t_alpha - static_cast<double>(fit.p()) - 1.0;
  out.loc = x_next.dot(fit.beta);
  out.scale2 = fit.sigma2 + x_next.dot(fit.V * x_next);
  if (!(out.df > 0.0)) throw DegenerateError("plugin_predictive: nonpositive degrees of freedom");
  if (!(out.scale2 > 0.0)) throw DegenerateError("plugin_predictive: nonpositive scale");
  return out;
}

StudentTPredictive plugin_predictive(const Eigen::Ref<const Matrix>& X_hist, const Eigen::Ref<const Vector>& y_hist,
                                     const Eigen::Ref<const Vector>& x_next, double alpha,
                                     const RegressionPrior& prior) {
  require(alpha > 0.0 && alpha <= 1.0, "plugin_predictive: alpha must lie in (0, 1]");
  return plugin_predictive(plugin_fit(WeightedRegressionStats::exponential(X_hist, y_hist, alpha), prior), x_next);
}

std::vector<double> regression_alpha_grid(Index p, std::size_t n) {
  const double lo = std::max(0.5, 1.0 - 1.0 / (static_cast<double>(p) + 2.0));
  return linear_grid(lo, 1.0, n);
}

std::vector<char> plugin_term_mask(const Eigen::Ref<const Matrix>& X, double alpha_min) {
  TermMask tracker(X.cols(), alpha_min);
  std::vector<char> mask(static_cast<std::size_t>(X.rows()), 0);
  for (Index t = 0; t < X.rows(); ++t) mask[static_cast<std::size_t>(t)] = tracker.next(X.row(t).transpose());
  return mask;
}

TermMask::TermMask(Index p, double alpha_min) : p_(p), alpha_min_(alpha_min), xtx_(Matrix::Zero(p, p)) {}

bool TermMask::next(const Eigen::Ref<const Vector>& x) {
  if (!full_rank_ && static_cast<Index>(n_) >= p_) full_rank_ = full_column_rank(xtx_);
  const bool scored = full_rank_ && scaled_count(alpha_min_, n_) > static_cast<double>(p_) + 1.0 + kDfMargin;
  if (!full_rank_) xtx_.noalias() += x * x.transpose();
  ++n_;
  return scored;
}

PluginObjective plugin_log_pred_likelihood(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& y,
                                           double alpha, const RegressionPrior& prior,
                                           const std::vector<char>& mask) {
  require(X.rows() == y.size(), "plugin objective: X and y lengths differ");
  require(mask.size() == static_cast<std::size_t>(X.rows()), "plugin objective: mask length differs from T");
  PluginObjective out;
  WeightedRegressionStats stats(X.cols());
  bool failed = false;
  for (Index t = 0; t < X.rows(); ++t) {
    if (mask[static_cast<std::size_t>(t)]) {
      ++out.terms;
      if (!failed) {
        try {
          out.value += plugin_predictive(plugin_fit(stats, prior), X.row(t).transpose()).log_pdf(y[t]);
        } catch (const DegenerateError&) {
          failed = true;
        }
      }
    } else if (t > 0) {
      ++out.skipped;
    }
    stats.update(X.row(t).transpose(), y[t], alpha);
  }
  if (failed || !std::isfinite(out.value)) out.value = kNegInf;
  return out;
}

RollingPluginObjective::RollingPluginObjective(Index p, std::vector<double> grid, RegressionPrior prior)
    : p_(p),
      grid_(std::move(grid)),
      prior_(std::move(prior)),
      stats_(grid_.size(), WeightedRegressionStats(p)),
      cumulative_(grid_.size(), 0.0),
      mask_(p, grid_.empty() ? 1.0 : grid_.front()) {
  require(!grid_.empty(), "rolling objective: empty grid");
  require(std::is_sorted(grid_.begin(), grid_.end()), "rolling objective: grid must be sorted ascending");
  require(grid_.front() > 0.0 && grid_.back() <= 1.0, "rolling objective: grid must lie in (0, 1]");
  require(prior_.beta0.size() == p && prior_.precision.size() == p, "rolling objective: prior dimension mismatch");
}

void RollingPluginObjective::observe(const Eigen::Ref<const Vector>& x, double y) { observe(x, y, mask_.next(x)); }

void RollingPluginObjective::observe(const Eigen::Ref<const Vector>& x, double y, bool scored) {
  if (scored) {
    ++terms_;
    for (std::size_t g = 0; g < grid_.size(); ++g) {
      if (!std::isfinite(cumulative_[g])) continue;
      try {
        const double lp = plugin_predictive(plugin_fit(stats_[g], prior_), x).log_pdf(y);
        cumulative_[g] = std::isfinite(lp) ? cumulative_[g] + lp : kNegInf;
      } catch (const DegenerateError&) {
        cumulative_[g] = kNegInf;
      }
    }
  }
  for (std::size_t g = 0; g < grid_.size(); ++g) stats_[g].update(x, y, grid_[g]);
  ++n_;
}

std::ptrdiff_t RollingPluginObjective::best_index() const {
  if (terms_ == 0) return -1;
  return argmax_largest(cumulative_);
}

PluginFit RollingPluginObjective::fit(std::size_t grid_index) const { return plugin_fit(stats_[grid_index], prior_); }

}  // namespace pwdts
