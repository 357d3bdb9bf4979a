#pragma once

#include <cmath>
#include <limits>
#include <numbers>

namespace pwdts {

/// Location-scale Student-t used for one-step-ahead prediction.
/// `scale2` is the squared scale, not the variance.
struct StudentTPredictive {
  double df = 1.0;
  double loc = 0.0;
  double scale2 = 1.0;

  [[nodiscard]] double log_pdf(double y) const {
    const double z2 = (y - loc) * (y - loc) / scale2;
    return std::lgamma(0.5 * (df + 1.0)) - std::lgamma(0.5 * df) -
           0.5 * std::log(df * std::numbers::pi * scale2) - 0.5 * (df + 1.0) * std::log1p(z2 / df);
  }

  [[nodiscard]] double pdf(double y) const { return std::exp(log_pdf(y)); }

  [[nodiscard]] double mean() const { return loc; }

  /// Infinite for df <= 2.
  [[nodiscard]] double variance() const {
    return df > 2.0 ? scale2 * df / (df - 2.0) : std::numeric_limits<double>::infinity();
  }
};

}  // namespace pwdts
