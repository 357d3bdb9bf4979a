#pragma once

// Generators and slow reference computations shared by the unit tests.

#include "pwdts/common.hpp"
#include "pwdts/panel.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <cmath>
#include <random>
#include <vector>

namespace pwdts::testing {

inline std::vector<double> normal_series(Rng& rng, std::size_t n, double mean = 0.0, double sd = 1.0) {
  std::normal_distribution<double> d(mean, sd);
  std::vector<double> y(n);
  for (double& v : y) v = d(rng);
  return y;
}

inline double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

inline std::size_t uniform_int(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

/// Design with an intercept column followed by p - 1 standard normal columns.
inline Matrix random_design(Rng& rng, Index T, Index p) {
  std::normal_distribution<double> n01;
  Matrix X(T, p);
  for (Index t = 0; t < T; ++t) {
    X(t, 0) = 1.0;
    for (Index k = 1; k < p; ++k) X(t, k) = n01(rng);
  }
  return X;
}

inline Vector random_response(Rng& rng, const Matrix& X, double noise = 1.0) {
  std::normal_distribution<double> n01;
  Vector beta(X.cols());
  for (Index k = 0; k < X.cols(); ++k) beta[k] = n01(rng);
  Vector y = X * beta;
  for (Index t = 0; t < y.size(); ++t) y[t] += noise * n01(rng);
  return y;
}

inline PanelData random_panel(Rng& rng, Index J, Index T, Index p) {
  PanelData panel;
  for (Index t = 0; t < T; ++t) panel.dates.push_back(static_cast<int>(2000 + t / 12) * 100 + static_cast<int>(t % 12) + 1);
  panel.covariate_names.push_back("const");
  for (Index k = 1; k < p; ++k) panel.covariate_names.push_back("X" + std::to_string(k));
  for (Index j = 0; j < J; ++j) {
    Group g;
    g.name = "G" + std::to_string(j);
    g.X = random_design(rng, T, p);
    g.y = random_response(rng, g.X);
    panel.groups.push_back(std::move(g));
  }
  return panel;
}

// --- naive references ------------------------------------------------------

struct NaiveMoments {
  double t_alpha = 0.0, wmean = 0.0, wsecond = 0.0;
};

/// Weighted moments of y[0..n) with weight alpha^(n-1-i), summed directly.
inline NaiveMoments naive_moments(const std::vector<double>& y, std::size_t n, double alpha) {
  NaiveMoments m;
  double s1 = 0.0, s2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = std::pow(alpha, static_cast<double>(n - 1 - i));
    m.t_alpha += w;
    s1 += w * y[i];
    s2 += w * y[i] * y[i];
  }
  m.wmean = s1 / m.t_alpha;
  m.wsecond = s2 / m.t_alpha;
  return m;
}

/// log density of the location-scale t through Boost.
inline double boost_t_log_pdf(double df, double loc, double scale2, double y) {
  boost::math::students_t_distribution<double> dist(df);
  const double s = std::sqrt(scale2);
  return std::log(boost::math::pdf(dist, (y - loc) / s)) - std::log(s);
}

/// One-step-ahead log predictive likelihood rebuilt from scratch at every prefix.
struct NaiveLogLik {
  double value = 0.0;
  std::size_t terms = 0;
};

inline NaiveLogLik naive_log_pred_likelihood(const std::vector<double>& y, double alpha) {
  NaiveLogLik out;
  for (std::size_t t = 2; t < y.size(); ++t) {
    bool distinct = false;
    for (std::size_t i = 1; i < t; ++i) distinct = distinct || y[i] != y[0];
    if (!distinct) continue;
    const NaiveMoments m = naive_moments(y, t, alpha);
    const double S = m.t_alpha / (m.t_alpha - 1.0) * (m.wsecond - m.wmean * m.wmean);
    const double scale2 = (m.t_alpha + 1.0) / m.t_alpha * S;
    out.value += boost_t_log_pdf(m.t_alpha - 1.0, m.wmean, scale2, y[t]);
    ++out.terms;
  }
  return out;
}

/// Normal equations with explicit lag weights (newest row has lag 0).
struct NaiveWls {
  Matrix xtax;
  Vector xtay;
  double ytay = 0.0;
  double t_alpha = 0.0;
};

inline NaiveWls naive_wls(const Matrix& X, const Vector& y, Index n, const std::vector<double>& lag_weights) {
  NaiveWls s;
  s.xtax = Matrix::Zero(X.cols(), X.cols());
  s.xtay = Vector::Zero(X.cols());
  for (Index i = 0; i < n; ++i) {
    const auto lag = static_cast<std::size_t>(n - 1 - i);
    const double w = lag < lag_weights.size() ? lag_weights[lag] : 0.0;
    s.xtax += w * X.row(i).transpose() * X.row(i);
    s.xtay += w * X.row(i).transpose() * y[i];
    s.ytay += w * y[i] * y[i];
    s.t_alpha += w;
  }
  return s;
}

inline std::vector<double> geometric(double alpha, std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = std::pow(alpha, static_cast<double>(i));
  return w;
}

/// OLS through the normal equations (independent of the QR route in the library).
inline Vector normal_equations_ols(const Matrix& X, const Vector& y) { return (X.transpose() * X).ldlt().solve(X.transpose() * y); }

inline double max_abs(const Matrix& a) { return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff(); }

}  // namespace pwdts::testing
