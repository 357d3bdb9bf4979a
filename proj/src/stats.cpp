#include "pwdts/stats.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <cmath>
#include <random>

namespace pwdts {

double mean(std::span<const double> x) {
  require(!x.empty(), "mean of an empty sample");
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

double stddev(std::span<const double> x) {
  require(x.size() >= 2, "stddev needs at least two observations");
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

double std_error(std::span<const double> x) { return stddev(x) / std::sqrt(static_cast<double>(x.size())); }

TTestResult paired_ttest(std::span<const double> a, std::span<const double> b) {
  require(a.size() >= 2 && b.size() >= 2, "t-test needs at least two observations per sample");
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double ma = mean(a), mb = mean(b);
  const double va = stddev(a) * stddev(a) / na;
  const double vb = stddev(b) * stddev(b) / nb;
  TTestResult r;
  const double se2 = va + vb;
  if (se2 == 0.0) {
    if (ma == mb) return r;
    throw DegenerateError("t-test: both samples have zero variance");
  }
  r.t = (ma - mb) / std::sqrt(se2);
  r.df = se2 * se2 / ((va * va) / (na - 1.0) + (vb * vb) / (nb - 1.0));
  const boost::math::students_t dist(r.df);
  r.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t)));
  return r;
}

double draw_inv_gamma(double shape, double rate, Rng& rng) {
  std::gamma_distribution<double> g(shape, 1.0);
  return rate / g(rng);
}

Vector draw_normal_precision(const Eigen::LLT<Matrix>& q_llt, const Vector& b, Rng& rng) {
  std::normal_distribution<double> n01;
  const Vector mean = q_llt.solve(b);
  Vector z(b.size());
  for (Index i = 0; i < z.size(); ++i) z[i] = n01(rng);
  // Q = L L', so L'^{-1} z has covariance Q^{-1}.
  return mean + q_llt.matrixU().solve(z);
}

}  // namespace pwdts
