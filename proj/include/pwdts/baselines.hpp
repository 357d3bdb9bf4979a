#pragma once

#include "pwdts/common.hpp"

#include <optional>
#include <span>

namespace pwdts {

// ---------------------------------------------------------------------------
// Least squares
// ---------------------------------------------------------------------------

struct OlsFit {
  Vector beta;
  double sigma2 = 0.0;  ///< RSS / (n - p)
  Matrix cov;           ///< sigma2 (X'X)^{-1}
  double rss = 0.0;

  [[nodiscard]] double predict(const Eigen::Ref<const Vector>& x) const { return x.dot(beta); }
};

/// Classical least squares; throws DegenerateError on rank deficiency.
OlsFit stationary_ols(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& y);

/// Least squares on the trailing `window` rows.
OlsFit rolling_window_fit(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& y, Index window);

// ---------------------------------------------------------------------------
// EWMA as ARIMA(0,1,1)
// ---------------------------------------------------------------------------

/// y_t - y_{t-1} = e_t + theta e_{t-1}; alpha = -theta is the EWMA decay.
struct Arima011Fit {
  double theta = 0.0;
  double sigma2 = 0.0;
  double loglik = 0.0;
  double forecast = 0.0;  ///< one-step forecast of the next level
  bool boundary = false;  ///< optimum stuck at |theta| ~ 1
};

/**
 * Exact Gaussian log likelihood of the differenced series under MA(1),
 * with sigma^2 profiled out, via the innovations algorithm.
 * Optionally returns the profiled sigma^2 and the next predicted difference.
 */
double arima011_profile_loglik(std::span<const double> diffs, double theta, double* sigma2_out = nullptr,
                               double* next_diff = nullptr);

/// Maximum likelihood ARIMA(0,1,1) fit (grid then golden section); needs T >= 10.
Arima011Fit ewma_fit(std::span<const double> series);

/// (1 - alpha) sum_i alpha^i y_{n-i}: the EWMA forecast of the next observation.
double ewma_forecast(std::span<const double> series, double alpha);

// ---------------------------------------------------------------------------
// Local level / dynamic regression (random-walk coefficients)
// ---------------------------------------------------------------------------

/**
 * Kalman filter for y_t = x_t' b_t + v_t, b_t = b_{t-1} + w_t with
 * Var(v) = sigma^2 and Var(w) = sigma^2 diag(w_ratio). Initialization is
 * exactly diffuse (information form until X'X has full rank); sigma^2 is
 * profiled out of the prediction-error likelihood.
 */
struct DlmFilterResult {
  double loglik = 0.0;
  double sigma2 = 0.0;
  Vector m;  ///< filtered terminal mean
  Matrix P;  ///< filtered terminal covariance (includes sigma2)
  std::size_t terms = 0;
};

DlmFilterResult dlm_filter(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& y,
                           const Vector& w_ratio);

struct StateSpaceOptions {
  std::optional<double> fixed_q;  ///< impose the evolution ratio instead of estimating it
  int grid_points = 33;
  double log10_q_lo = -6.0;
  double log10_q_hi = 2.0;
  double fallback_discount = 0.95;
};

struct StateSpaceFit {
  Vector beta;  ///< terminal coefficient mean
  Matrix P;
  double sigma2 = 0.0;  ///< observation variance V
  double q = 0.0;       ///< evolution-to-observation variance ratio
  Vector w_scale;       ///< per-coefficient scaling of q
  double loglik = 0.0;
  bool flagged = false;   ///< optimum on a search boundary
  bool fallback = false;  ///< likelihood search failed, discount filter used

  [[nodiscard]] double predict(const Eigen::Ref<const Vector>& x) const { return x.dot(beta); }
};

/// Dynamic linear regression with one evolution ratio q shared by all
/// coefficients, scaled by 1 / mean(x_k^2); q by maximum likelihood. Needs T > 3p.
StateSpaceFit state_space_lr_fit(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& y,
                                 const StateSpaceOptions& options = {});

enum class LocalLevelMode { MleVariances, Discount };

struct LocalLevelOptions {
  LocalLevelMode mode = LocalLevelMode::MleVariances;
  double delta = 1.0;             ///< discount factor in Discount mode
  std::optional<double> fixed_q;  ///< W / V imposed in MleVariances mode
};

struct LocalLevelState {
  double m = 0.0;           ///< posterior mean of the terminal level
  double C = 0.0;           ///< posterior variance of the terminal level
  double V = 0.0;           ///< observation variance
  double W_or_delta = 0.0;  ///< evolution variance (MLE) or discount factor
  double forecast = 0.0;
  bool flagged = false;
};

/// First-order (local level) model; forecast is m_T. Needs T >= 10.
LocalLevelState local_level_filter(std::span<const double> series, const LocalLevelOptions& options = {});

}  // namespace pwdts
