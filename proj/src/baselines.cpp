#include "pwdts/baselines.hpp"

#include "pwdts/normal_pwd.hpp"
#include "pwdts/weights.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

namespace pwdts {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kVarianceFloor = 1e-12;

/// Maximizes f on [a, b] by golden section; returns the argmax.
double golden_max(const std::function<double(double)>& f, double a, double b, int iterations = 60) {
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - r * (b - a);
  double d = a + r * (b - a);
  double fc = f(c), fd = f(d);
  for (int i = 0; i < iterations && (b - a) > 1e-12; ++i) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - r * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + r * (b - a);
      fd = f(d);
    }
  }
  return fc >= fd ? c : d;
}

bool well_conditioned(const Eigen::LLT<Matrix>& llt) {
  const Vector d = llt.matrixLLT().diagonal().cwiseAbs2();
  return d.maxCoeff() > 0.0 && d.minCoeff() > 1e-14 * d.maxCoeff();
}

}  // namespace

// ---------------------------------------------------------------------------

OlsFit stationary_ols(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& y) {
  require(X.rows() == y.size(), "ols: X and y lengths differ");
  const Index n = X.rows(), p = X.cols();
  require(n > p, "ols: need more observations than coefficients");
  Eigen::ColPivHouseholderQR<Matrix> qr(X);
  qr.setThreshold(1e-12);
  if (qr.rank() < p) throw DegenerateError("ols: design matrix is rank deficient");
  OlsFit fit;
  fit.beta = qr.solve(y);
  fit.rss = (y - X * fit.beta).squaredNorm();
  fit.sigma2 = fit.rss / static_cast<double>(n - p);
  const Matrix xtx = X.transpose() * X;
  fit.cov = fit.sigma2 * xtx.ldlt().solve(Matrix::Identity(p, p));
  return fit;
}

OlsFit rolling_window_fit(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& y, Index window) {
  require(window > X.cols(), "rolling window must exceed the number of coefficients");
  require(window <= X.rows(), "rolling window of " + std::to_string(window) + " exceeds history of " +
                                  std::to_string(X.rows()));
  return stationary_ols(X.bottomRows(window), y.tail(window));
}

// ---------------------------------------------------------------------------

double arima011_profile_loglik(std::span<const double> diffs, double theta, double* sigma2_out, double* next_diff) {
  const std::size_t n = diffs.size();
  require(n >= 2, "arima011: need at least two differences");
  const double g0 = 1.0 + theta * theta;
  double r = g0;   // innovation variance ratio v_{i} / sigma^2
  double zhat = 0.0;
  double sum_log_r = 0.0, sum_e2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = diffs[i] - zhat;
    sum_log_r += std::log(r);
    sum_e2 += e * e / r;
    // Next one-step prediction and its variance ratio.
    const double coef = theta / r;
    zhat = coef * e;
    r = g0 - theta * coef;
  }
  const double dn = static_cast<double>(n);
  const double sigma2 = sum_e2 / dn;
  if (sigma2_out) *sigma2_out = sigma2;
  if (next_diff) *next_diff = zhat;
  if (!(sigma2 > 0.0)) return std::numeric_limits<double>::infinity();
  return -0.5 * dn * (std::log(2.0 * std::numbers::pi * sigma2) + 1.0) - 0.5 * sum_log_r;
}

Arima011Fit ewma_fit(std::span<const double> series) {
  require(series.size() >= 10, "ewma_fit needs at least 10 observations");
  for (double v : series) require(std::isfinite(v), "ewma_fit: non-finite observation");
  std::vector<double> diffs(series.size() - 1);
  bool all_zero = true;
  for (std::size_t i = 1; i < series.size(); ++i) {
    diffs[i - 1] = series[i] - series[i - 1];
    all_zero = all_zero && diffs[i - 1] == 0.0;
  }
  Arima011Fit fit;
  if (all_zero) {
    fit.forecast = series.back();
    fit.boundary = true;
    return fit;
  }
  const double bound = 0.9999;
  auto ll = [&](double th) { return arima011_profile_loglik(diffs, th); };
  const int grid = 201;
  double best_th = 0.0, best_ll = kNegInf;
  int best_i = 0;
  for (int i = 0; i < grid; ++i) {
    const double th = -0.999 + 1.998 * static_cast<double>(i) / (grid - 1);
    const double v = ll(th);
    if (v > best_ll) {
      best_ll = v;
      best_th = th;
      best_i = i;
    }
  }
  const double step = 1.998 / (grid - 1);
  const double lo = best_i == 0 ? -bound : best_th - step;
  const double hi = best_i == grid - 1 ? bound : best_th + step;
  const double refined = golden_max(ll, lo, hi);
  if (ll(refined) >= best_ll) best_th = refined;
  double next = 0.0;
  fit.theta = best_th;
  fit.loglik = arima011_profile_loglik(diffs, best_th, &fit.sigma2, &next);
  fit.forecast = series.back() + next;
  fit.boundary = std::abs(best_th) >= 0.999;
  return fit;
}

double ewma_forecast(std::span<const double> series, double alpha) {
  require(!series.empty(), "ewma_forecast: empty series");
  require(alpha >= 0.0 && alpha < 1.0, "ewma_forecast: alpha must lie in [0, 1)");
  double acc = 0.0, w = 1.0;
  for (std::size_t i = 0; i < series.size(); ++i) {
    acc += w * series[series.size() - 1 - i];
    w *= alpha;
  }
  return (1.0 - alpha) * acc;
}

// ---------------------------------------------------------------------------

DlmFilterResult dlm_filter(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& y,
                           const Vector& w_ratio) {
  const Index n = X.rows(), p = X.cols();
  require(y.size() == n, "dlm_filter: X and y lengths differ");
  require(w_ratio.size() == p && (w_ratio.array() >= 0.0).all(), "dlm_filter: invalid evolution ratios");
  const Matrix I = Matrix::Identity(p, p);

  // Information form while diffuse.
  Matrix omega = Matrix::Zero(p, p);
  Vector xi = Vector::Zero(p);
  bool diffuse = true;
  Index seen = 0;

  Vector m = Vector::Zero(p);
  Matrix P = Matrix::Zero(p, p);
  double sum_log_f = 0.0, sum_v2f = 0.0;
  std::size_t terms = 0;

  for (Index t = 0; t < n; ++t) {
    const auto x = X.row(t).transpose();
    if (diffuse) {
      if (seen > 0 && (w_ratio.array() > 0.0).any()) {
        // Omega' = (Omega^{-1} + W)^{-1} = Omega (I + W Omega)^{-1}; xi' = (I + Omega W)^{-1} xi.
        const Matrix Mt = I + omega * w_ratio.asDiagonal();
        Eigen::PartialPivLU<Matrix> lu(Mt);
        omega = lu.solve(omega).transpose();
        omega = 0.5 * (omega + omega.transpose()).eval();
        xi = lu.solve(xi);
      }
      omega.noalias() += x * x.transpose();
      xi.noalias() += x * y[t];
      ++seen;
      if (seen >= p) {
        Eigen::LLT<Matrix> llt(omega);
        if (llt.info() == Eigen::Success && well_conditioned(llt)) {
          P = llt.solve(I);
          m = P * xi;
          diffuse = false;
        }
      }
      continue;
    }
    P.diagonal() += w_ratio;
    const Vector px = P * x;
    const double f = x.dot(px) + 1.0;
    const double v = y[t] - x.dot(m);
    sum_log_f += std::log(f);
    sum_v2f += v * v / f;
    ++terms;
    m.noalias() += px * (v / f);
    P.noalias() -= px * px.transpose() / f;
    P = 0.5 * (P + P.transpose()).eval();
  }
  if (diffuse) throw DegenerateError("dlm_filter: covariates never reach full rank");
  if (terms == 0) throw DegenerateError("dlm_filter: no observations beyond the diffuse start");
  DlmFilterResult out;
  out.terms = terms;
  out.sigma2 = std::max(sum_v2f / static_cast<double>(terms), kVarianceFloor);
  const double dn = static_cast<double>(terms);
  out.loglik = -0.5 * dn * (std::log(2.0 * std::numbers::pi * out.sigma2) + 1.0) - 0.5 * sum_log_f;
  out.m = m;
  out.P = P * out.sigma2;
  return out;
}

namespace {

Vector coefficient_scales(const Eigen::Ref<const Matrix>& X) {
  Vector s(X.cols());
  for (Index k = 0; k < X.cols(); ++k) {
    const double ms = X.col(k).squaredNorm() / static_cast<double>(X.rows());
    s[k] = ms > 0.0 ? 1.0 / ms : 1.0;
  }
  return s;
}

// Discount filter for the regression: R = P / delta, started from the diffuse OLS on the first p + 1 rows.
StateSpaceFit discount_regression(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& y, double delta) {
  const Index p = X.cols();
  const Index start = std::min<Index>(X.rows(), p + 1);
  const OlsFit init = stationary_ols(X.topRows(start), y.head(start));
  StateSpaceFit fit;
  fit.beta = init.beta;
  Matrix P = (X.topRows(start).transpose() * X.topRows(start)).ldlt().solve(Matrix::Identity(p, p));
  double ss = 0.0;
  Index used = 0;
  for (Index t = start; t < X.rows(); ++t) {
    P /= delta;
    const auto x = X.row(t).transpose();
    const Vector px = P * x;
    const double f = x.dot(px) + 1.0;
    const double v = y[t] - x.dot(fit.beta);
    ss += v * v / f;
    ++used;
    fit.beta.noalias() += px * (v / f);
    P.noalias() -= px * px.transpose() / f;
  }
  fit.sigma2 = used > 0 ? std::max(ss / static_cast<double>(used), kVarianceFloor) : init.sigma2;
  fit.P = P * fit.sigma2;
  fit.fallback = true;
  fit.flagged = true;
  return fit;
}

}  // namespace

StateSpaceFit state_space_lr_fit(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& y,
                                 const StateSpaceOptions& options) {
  const Index p = X.cols();
  require(X.rows() == y.size(), "state_space_lr_fit: X and y lengths differ");
  require(X.rows() > 3 * p, "state_space_lr_fit needs T > 3p");
  const Vector scale = coefficient_scales(X);

  auto run = [&](double q) -> DlmFilterResult { return dlm_filter(X, y, (q * scale).eval()); };
  auto ll_at = [&](double log10q) {
    try {
      const double v = run(std::pow(10.0, log10q)).loglik;
      return std::isfinite(v) ? v : kNegInf;
    } catch (const DegenerateError&) {
      return kNegInf;
    }
  };

  StateSpaceFit fit;
  fit.w_scale = scale;
  double q = 0.0;
  if (options.fixed_q) {
    require(*options.fixed_q >= 0.0, "state_space_lr_fit: fixed_q must be nonnegative");
    q = *options.fixed_q;
  } else {
    double best = kNegInf;
    try {
      best = run(0.0).loglik;
    } catch (const DegenerateError&) {
    }
    int best_i = -1;
    const int G = std::max(options.grid_points, 3);
    const double step = (options.log10_q_hi - options.log10_q_lo) / (G - 1);
    for (int i = 0; i < G; ++i) {
      const double v = ll_at(options.log10_q_lo + step * i);
      if (v > best) {
        best = v;
        best_i = i;
      }
    }
    if (!std::isfinite(best)) return discount_regression(X, y, options.fallback_discount);
    if (best_i < 0) {
      q = 0.0;
      fit.flagged = true;
    } else {
      const double c = options.log10_q_lo + step * best_i;
      const double lq = golden_max(ll_at, c - step, c + step, 40);
      q = std::pow(10.0, ll_at(lq) >= best ? lq : c);
      fit.flagged = best_i == G - 1;
    }
  }
  DlmFilterResult r;
  try {
    r = run(q);
  } catch (const DegenerateError&) {
    if (options.fixed_q) throw;
    return discount_regression(X, y, options.fallback_discount);
  }
  fit.beta = r.m;
  fit.P = r.P;
  fit.sigma2 = r.sigma2;
  fit.q = q;
  fit.loglik = r.loglik;
  return fit;
}

LocalLevelState local_level_filter(std::span<const double> series, const LocalLevelOptions& options) {
  require(series.size() >= 10, "local_level_filter needs at least 10 observations");
  for (double v : series) require(std::isfinite(v), "local_level_filter: non-finite observation");
  LocalLevelState st;
  if (options.mode == LocalLevelMode::Discount) {
    const double delta = options.delta;
    require(delta > 0.0 && delta <= 1.0, "discount factor must lie in (0, 1]");
    // Unit-variance recursion: R = C / delta, A = R / (R + 1). The gain does not depend on V.
    double m = series[0];
    double c = 1.0;
    for (std::size_t t = 1; t < series.size(); ++t) {
      const double r = c / delta;
      const double a = r / (r + 1.0);
      m += a * (series[t] - m);
      c = a;
    }
    WeightedMoments mom;
    for (double v : series) mom.update(v, delta);
    const double t_d = mom.t_alpha();
    st.m = m;
    st.V = t_d > 1.0 ? t_d / (t_d - 1.0) * mom.wvariance() : 0.0;
    st.C = st.V * c;
    st.W_or_delta = delta;
    st.forecast = m;
    st.flagged = !(st.V > 0.0);
    return st;
  }
  const Eigen::Map<const Vector> y(series.data(), static_cast<Index>(series.size()));
  const Matrix ones = Matrix::Ones(y.size(), 1);
  StateSpaceOptions so;
  so.fixed_q = options.fixed_q;
  so.log10_q_lo = -6.0;
  so.log10_q_hi = 2.0;
  const StateSpaceFit fit = state_space_lr_fit(ones, y, so);
  st.m = fit.beta[0];
  st.C = fit.P(0, 0);
  st.V = fit.sigma2;
  st.W_or_delta = fit.q * fit.sigma2;
  st.forecast = st.m;
  st.flagged = fit.flagged || fit.fallback || fit.q == 0.0;
  return st;
}

}  // namespace pwdts
