#pragma once

#include "pwdts/common.hpp"

#include <cstddef>
#include <span>
#include <variant>
#include <vector>

namespace pwdts {

/// Weight at lag i is alpha^i.
struct Exponential {
  double alpha = 1.0;
};

/// Weight at lag i is max(0, 1 - i / horizon).
struct Linear {
  std::size_t horizon = 1;
};

/// Weight is 1 for lag i < length, 0 otherwise (rolling window).
struct Window {
  std::size_t length = 1;
};

/// Caller-supplied weights, lag 0 first.
struct Explicit {
  std::vector<double> weights;
};

using WeightScheme = std::variant<Exponential, Linear, Window, Explicit>;

/// Throws ValidationError when the scheme parameters are out of range.
void validate(const WeightScheme& scheme);

/**
 * Lag-ordered weights: w[0] applies to the most recent observation.
 * `scaled_count` is the sum of the weights (the effective sample size).
 */
struct WeightVector {
  std::vector<double> w;
  double scaled_count = 0.0;

  [[nodiscard]] std::size_t size() const { return w.size(); }
  double operator[](std::size_t lag) const { return w[lag]; }
};

/// Materializes `length` lag weights of `scheme`.
WeightVector materialize(const WeightScheme& scheme, std::size_t length);

/// Sum of alpha^i for i = 0..n-1.
double scaled_count(double alpha, std::size_t n);

/**
 * Exponentially discounted moments of a stream, updated in O(1).
 *
 * After observing y_1..y_t with decay alpha the state holds
 *   t_alpha = sum_i alpha^i,
 *   wmean   = sum_i alpha^i y_{t-i} / t_alpha,
 *   wsecond = sum_i alpha^i y_{t-i}^2 / t_alpha.
 * Internally the centered sum of squares is carried (discounted Welford),
 * which keeps wsecond - wmean^2 nonnegative.
 */
class WeightedMoments {
 public:
  WeightedMoments() = default;

  void update(double y, double alpha);
  [[nodiscard]] WeightedMoments updated(double y, double alpha) const {
    WeightedMoments next = *this;
    next.update(y, alpha);
    return next;
  }

  [[nodiscard]] double t_alpha() const { return t_alpha_; }
  [[nodiscard]] double wmean() const { return mean_; }
  [[nodiscard]] double wsecond() const { return t_alpha_ > 0 ? m2_ / t_alpha_ + mean_ * mean_ : 0.0; }
  /// wsecond - wmean^2 without cancellation.
  [[nodiscard]] double wvariance() const { return t_alpha_ > 0 ? m2_ / t_alpha_ : 0.0; }
  /// Weighted centered sum of squares, sum_i alpha^i (y_{t-i} - wmean)^2.
  [[nodiscard]] double centered_ss() const { return m2_; }
  [[nodiscard]] std::size_t n() const { return n_; }

 private:
  double t_alpha_ = 0.0;
  double mean_ = 0.0;
  double m2_ = 0.0;
  std::size_t n_ = 0;
};

WeightedMoments update_moments(const WeightedMoments& m, double y, double alpha);

/// Moments over the trailing `length` observations, maintained with a ring buffer.
class WindowedMoments {
 public:
  explicit WindowedMoments(std::size_t length);

  void update(double y);

  [[nodiscard]] double t_alpha() const { return static_cast<double>(count_); }
  [[nodiscard]] double wmean() const;
  [[nodiscard]] double wsecond() const;
  [[nodiscard]] double wvariance() const;
  [[nodiscard]] std::size_t n() const { return n_; }

 private:
  std::vector<double> ring_;
  std::size_t head_ = 0;
  std::size_t count_ = 0;
  std::size_t n_ = 0;
  double sum_ = 0.0;
  double sumsq_ = 0.0;
  std::size_t since_rebuild_ = 0;
  void rebuild();
};

/// Weighted moments of `series` (oldest first) under explicit lag weights.
/// Returns {t_alpha, wmean, wvariance}; O(T).
struct DirectMoments {
  double t_alpha = 0.0;
  double wmean = 0.0;
  double wvariance = 0.0;
};
DirectMoments direct_moments(std::span<const double> series, const WeightVector& weights);

}  // namespace pwdts
