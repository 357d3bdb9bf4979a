#include "pwdts/weights.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace pwdts {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace

void validate(const WeightScheme& scheme) {
  std::visit(overloaded{
                 [](const Exponential& e) {
                   require(std::isfinite(e.alpha) && e.alpha >= 0.0 && e.alpha <= 1.0,
                           "exponential weight alpha must lie in [0, 1], got " + std::to_string(e.alpha));
                 },
                 [](const Linear& l) { require(l.horizon >= 1, "linear weight horizon must be positive"); },
                 [](const Window& w) { require(w.length >= 1, "window length must be positive"); },
                 [](const Explicit& x) {
                   for (double v : x.weights) {
                     require(std::isfinite(v) && v >= 0.0 && v <= 1.0, "explicit weights must lie in [0, 1]");
                   }
                 },
             },
             scheme);
}

double scaled_count(double alpha, std::size_t n) {
  if (alpha == 1.0) return static_cast<double>(n);
  // (1 - alpha^n) / (1 - alpha), with expm1/log1p for alpha near 1.
  if (alpha == 0.0) return n > 0 ? 1.0 : 0.0;
  const double log_a = std::log(alpha);
  return -std::expm1(static_cast<double>(n) * log_a) / -std::expm1(log_a);
}

WeightVector materialize(const WeightScheme& scheme, std::size_t length) {
  require(length >= 1, "weight vector length must be positive");
  validate(scheme);
  WeightVector out;
  out.w.resize(length);
  std::visit(overloaded{
                 [&](const Exponential& e) {
                   double w = 1.0;
                   for (std::size_t i = 0; i < length; ++i) {
                     out.w[i] = w;
                     w *= e.alpha;
                   }
                 },
                 [&](const Linear& l) {
                   const double h = static_cast<double>(l.horizon);
                   for (std::size_t i = 0; i < length; ++i) {
                     out.w[i] = std::max(0.0, 1.0 - static_cast<double>(i) / h);
                   }
                 },
                 [&](const Window& w) {
                   for (std::size_t i = 0; i < length; ++i) out.w[i] = i < w.length ? 1.0 : 0.0;
                 },
                 [&](const Explicit& x) {
                   require(x.weights.size() >= length, "explicit weight vector has " +
                                                           std::to_string(x.weights.size()) +
                                                           " entries, need " + std::to_string(length));
                   std::copy_n(x.weights.begin(), length, out.w.begin());
                 },
             },
             scheme);
  double total = 0.0;
  for (double v : out.w) total += v;
  out.scaled_count = total;
  return out;
}

void WeightedMoments::update(double y, double alpha) {
  if (!std::isfinite(y)) throw ValidationError("update_moments: non-finite observation");
  require(alpha >= 0.0 && alpha <= 1.0, "update_moments: alpha must lie in [0, 1]");
  t_alpha_ = alpha * t_alpha_ + 1.0;
  const double delta = y - mean_;
  mean_ += delta / t_alpha_;
  m2_ = alpha * m2_ + delta * (y - mean_);
  if (m2_ < 0.0) m2_ = 0.0;
  ++n_;
}

WeightedMoments update_moments(const WeightedMoments& m, double y, double alpha) { return m.updated(y, alpha); }

WindowedMoments::WindowedMoments(std::size_t length) : ring_(length, 0.0) {
  require(length >= 1, "window length must be positive");
}

void WindowedMoments::update(double y) {
  if (!std::isfinite(y)) throw ValidationError("windowed moments: non-finite observation");
  const std::size_t cap = ring_.size();
  if (count_ == cap) {
    const double old = ring_[head_];
    sum_ -= old;
    sumsq_ -= old * old;
    --count_;
  }
  ring_[head_] = y;
  head_ = (head_ + 1) % cap;
  sum_ += y;
  sumsq_ += y * y;
  ++count_;
  ++n_;
  // Subtraction drift is bounded by rebuilding from the buffer now and then.
  if (++since_rebuild_ >= 256) rebuild();
}

void WindowedMoments::rebuild() {
  sum_ = 0.0;
  sumsq_ = 0.0;
  const std::size_t cap = ring_.size();
  for (std::size_t k = 0; k < count_; ++k) {
    const double v = ring_[(head_ + cap - 1 - k) % cap];
    sum_ += v;
    sumsq_ += v * v;
  }
  since_rebuild_ = 0;
}

double WindowedMoments::wmean() const { return count_ ? sum_ / static_cast<double>(count_) : 0.0; }

double WindowedMoments::wsecond() const { return count_ ? sumsq_ / static_cast<double>(count_) : 0.0; }

double WindowedMoments::wvariance() const {
  if (count_ == 0) return 0.0;
  const double mean = wmean();
  return std::max(0.0, wsecond() - mean * mean);
}

DirectMoments direct_moments(std::span<const double> series, const WeightVector& weights) {
  require(weights.size() >= series.size(), "direct_moments: weight vector shorter than series");
  const std::size_t n = series.size();
  DirectMoments out;
  double sw = 0.0, swy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = weights[i];
    sw += w;
    swy += w * series[n - 1 - i];
  }
  out.t_alpha = sw;
  if (sw <= 0.0) return out;
  out.wmean = swy / sw;
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = series[n - 1 - i] - out.wmean;
    ss += weights[i] * d * d;
  }
  out.wvariance = ss / sw;
  return out;
}

}  // namespace pwdts
