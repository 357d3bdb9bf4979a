#include "pwdts/normal_pwd.hpp"
#include "pwdts/synthetic.hpp"

#include "support.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <doctest.h>

#include <algorithm>
#include <chrono>

using namespace pwdts;
using namespace pwdts::testing;

TEST_CASE("constant series gives a degenerate posterior") {
  const std::vector<double> y = {2, 2, 2, 2};
  const NormalPosterior p = terminal_posterior(y, 1.0);
  CHECK(p.mean_loc == 2.0);
  CHECK(p.var_rate == 0.0);
  CHECK(p.degenerate);
  CHECK_THROWS_AS(predictive(y, 1.0), DegenerateError);
}

TEST_CASE("posterior of (0, 4) at alpha 1") {
  const std::vector<double> y = {0, 4};
  const NormalPosterior p = terminal_posterior(y, 1.0);
  // t = 2, mean 2, second moment 8: shape (t-1)/2, rate (t/2)(8 - 4).
  CHECK(p.mean_loc == 2.0);
  CHECK(p.var_shape == 0.5);
  CHECK(p.var_rate == doctest::Approx(4.0).epsilon(1e-15));
  CHECK(p.mean_scale2(3.0) == 1.5);
  CHECK_FALSE(p.degenerate);
}

TEST_CASE("predictive of (0, 4) at alpha 1") {
  const std::vector<double> y = {0, 4};
  const StudentTPredictive t = predictive(y, 1.0);
  // S = 2/(2-1) (8 - 4) = 8, scale2 = 3/2 * 8.
  CHECK(t.df == 1.0);
  CHECK(t.loc == 2.0);
  CHECK(t.scale2 == doctest::Approx(12.0).epsilon(1e-15));
}

TEST_CASE("posterior mean of 500 N(2,1) draws is near 2") {
  StationaryMeanConfig cfg;
  cfg.replications = 1;
  const auto y = gen_stationary_replication(cfg, 0);
  const NormalPosterior p = terminal_posterior(y, 1.0);
  CHECK(std::abs(p.mean_loc - 2.0) <= 3.0 / std::sqrt(500.0));
}

TEST_CASE("invalid inputs are rejected") {
  const std::vector<double> one = {1.0};
  const std::vector<double> y = {1.0, 2.0, 3.0};
  CHECK_THROWS_AS(terminal_posterior(one, 0.9), ValidationError);
  CHECK_THROWS_AS(terminal_posterior(y, 0.0), ValidationError);
  CHECK_THROWS_AS(terminal_posterior(y, 1.01), ValidationError);
  // alpha tiny: t_alpha ~ 1 leaves no degrees of freedom
  const std::vector<double> two = {1.0, 2.0};
  CHECK_THROWS_AS(predictive(two, 1e-300), DegenerateError);
  CHECK_THROWS_AS(estimate_alpha(y, {}), ValidationError);
  CHECK_THROWS_AS(estimate_alpha(y, {0.9, 0.8}), ValidationError);
}

TEST_CASE("property: alpha 1 reproduces the classical conjugate results") {
  Rng rng(101);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t n = uniform_int(rng, 2, 400);
    const auto y = normal_series(rng, n, uniform(rng, -5, 5), uniform(rng, 0.1, 5));
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double v : y) ss += (v - mean) * (v - mean);
    const double s2 = ss / static_cast<double>(n - 1);
    const NormalPosterior p = terminal_posterior(y, 1.0);
    CHECK(std::abs(p.mean_loc - mean) <= 1e-12 * std::max(1.0, std::abs(mean)));
    CHECK(p.var_shape == doctest::Approx(0.5 * static_cast<double>(n - 1)).epsilon(1e-14));
    CHECK(std::abs(p.var_rate - 0.5 * ss) <= 1e-12 * std::max(1.0, ss));
    const StudentTPredictive t = predictive(y, 1.0);
    CHECK(t.df == static_cast<double>(n - 1));
    CHECK(std::abs(t.loc - mean) <= 1e-12 * std::max(1.0, std::abs(mean)));
    CHECK(std::abs(t.scale2 - (1.0 + 1.0 / static_cast<double>(n)) * s2) <= 1e-12 * std::max(1.0, s2));
  }
}

TEST_CASE("property: predictive mean equals the exponentially weighted average") {
  Rng rng(103);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t n = uniform_int(rng, 3, 300);
    const double a = uniform(rng, 0.5, 1.0);
    const auto y = normal_series(rng, n);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double w = std::pow(a, static_cast<double>(n - 1 - i));
      num += w * y[i];
      den += w;
    }
    CHECK(std::abs(predictive(y, a).loc - num / den) <= 1e-12);
  }
}

TEST_CASE("predictive density integrates to one") {
  Rng rng(107);
  const auto y = normal_series(rng, 300);
  const StudentTPredictive t = predictive(y, 0.95);
  auto f = [&](double v) { return t.pdf(v); };
  const double integral =
      boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, -std::numeric_limits<double>::infinity(),
                                                                    std::numeric_limits<double>::infinity(), 15, 1e-12);
  CHECK(std::abs(integral - 1.0) < 1e-6);
}

TEST_CASE("Student-t log density agrees with Boost") {
  Rng rng(109);
  for (int rep = 0; rep < 200; ++rep) {
    StudentTPredictive t{uniform(rng, 0.5, 50), uniform(rng, -3, 3), uniform(rng, 0.01, 10)};
    const double y = uniform(rng, -10, 10);
    CHECK(t.log_pdf(y) == doctest::Approx(boost_t_log_pdf(t.df, t.loc, t.scale2, y)).epsilon(1e-10));
  }
}

TEST_CASE("window weights reproduce the stationary computation on the last points") {
  Rng rng(113);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t n = uniform_int(rng, 10, 200);
    const std::size_t len = uniform_int(rng, 2, n);
    const auto y = normal_series(rng, n);
    const StudentTPredictive w = predictive(y, materialize(Window{len}, n));
    const std::vector<double> tail(y.end() - static_cast<std::ptrdiff_t>(len), y.end());
    const StudentTPredictive s = predictive(tail, 1.0);
    CHECK(w.df == s.df);
    CHECK(std::abs(w.loc - s.loc) <= 1e-12);
    CHECK(std::abs(w.scale2 - s.scale2) <= 1e-12 * std::max(1.0, s.scale2));
  }
}

TEST_CASE("log predictive likelihood of a constant series is degenerate") {
  const std::vector<double> y = {1.5, 1.5, 1.5};
  CHECK_THROWS_AS(log_pred_likelihood(y, 0.9), DegenerateError);
}

TEST_CASE("log predictive likelihood matches the naive recomputation (T=200, alpha 0.9)") {
  Rng rng(127);
  const auto y = normal_series(rng, 200);
  const PredictiveLogLik fast = log_pred_likelihood(y, 0.9);
  const NaiveLogLik slow = naive_log_pred_likelihood(y, 0.9);
  CHECK(fast.terms == slow.terms);
  CHECK(std::abs(fast.value - slow.value) <= 1e-8);
}

TEST_CASE("property: incremental and naive objectives agree up to T=500") {
  Rng rng(131);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t n = uniform_int(rng, 3, 500);
    const double a = uniform(rng, 0.5, 1.0);
    auto y = normal_series(rng, n, uniform(rng, -3, 3), uniform(rng, 0.2, 3));
    // Some series start with repeated values, which exercises the skip rule.
    if (rep % 4 == 0) std::fill(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(n - 1, 4)), 0.25);
    const double lp = uniform(rng, -2, 0);
    const PredictiveLogLik fast = log_pred_likelihood(y, a, lp);
    const NaiveLogLik slow = naive_log_pred_likelihood(y, a);
    CHECK(fast.terms == slow.terms);
    CHECK(fast.terms + fast.skipped == n - 1);
    CHECK(std::abs(fast.value - (slow.value + lp)) <= 1e-8 * std::max(1.0, std::abs(slow.value)));
  }
}

TEST_CASE("window objective matches the naive window recomputation") {
  Rng rng(137);
  const auto y = normal_series(rng, 300);
  const std::size_t len = 25;
  const PredictiveLogLik fast = log_pred_likelihood(y, Window{len});
  double slow = 0.0;
  for (std::size_t t = 2; t < y.size(); ++t) {
    const std::size_t lo = t > len ? t - len : 0;
    const std::vector<double> pre(y.begin() + static_cast<std::ptrdiff_t>(lo), y.begin() + static_cast<std::ptrdiff_t>(t));
    const StudentTPredictive p = predictive(pre, 1.0);
    slow += boost_t_log_pdf(p.df, p.loc, p.scale2, y[t]);
  }
  CHECK(std::abs(fast.value - slow) <= 1e-8);
}

TEST_CASE("default grid is 100 points on [0.5, 1]") {
  const auto g = default_alpha_grid();
  REQUIRE(g.size() == 100);
  CHECK(g.front() == 0.5);
  CHECK(g.back() == 1.0);
  CHECK(std::is_sorted(g.begin(), g.end()));
}

TEST_CASE("argmax ties go to the largest alpha") {
  CHECK(argmax_largest({1.0, 3.0, 3.0, 2.0}) == 2);
  CHECK(argmax_largest({-INFINITY, NAN}) == -1);
  CHECK(argmax_largest({NAN, 0.0, -1.0}) == 1);
}

TEST_CASE("estimate_alpha attains the grid maximum") {
  Rng rng(139);
  const auto y = normal_series(rng, 150);
  const AlphaEstimate est = estimate_alpha(y);
  const double best = *std::max_element(est.per_alpha_loglik.begin(), est.per_alpha_loglik.end());
  CHECK(est.log_pred_lik == best);
  for (std::size_t g = 0; g < est.grid.size(); ++g) {
    if (est.per_alpha_loglik[g] == best) CHECK(est.grid[g] <= est.alpha_star);
  }
}

TEST_CASE("a prior concentrated at 1 never lowers alpha*") {
  Rng rng(149);
  for (int rep = 0; rep < 30; ++rep) {
    auto y = normal_series(rng, 120);
    for (std::size_t t = 60; t < 120; ++t) y[t] += uniform(rng, 0, 3);
    const AlphaEstimate flat = estimate_alpha(y);
    const AlphaEstimate peaked = estimate_alpha(y, default_alpha_grid(), [](double a) { return 200.0 * (a - 1.0); });
    CHECK(peaked.alpha_star >= flat.alpha_star);
  }
}

TEST_CASE("i.i.d. series mostly select alpha near 1; a mean break selects alpha below 1") {
  StationaryMeanConfig cfg;
  cfg.seed = 42;
  std::vector<double> stars;
  int high = 0, broken_below = 0;
  const int reps = 400;
  Rng rng(151);
  for (int r = 0; r < reps; ++r) {
    const auto y = gen_stationary_replication(cfg, static_cast<std::size_t>(r));
    const double a = estimate_alpha(y).alpha_star;
    stars.push_back(a);
    if (a >= 0.95) ++high;
    auto z = normal_series(rng, 500);
    for (std::size_t t = 250; t < 500; ++t) z[t] += 3.0;
    if (estimate_alpha(z).alpha_star < 1.0) ++broken_below;
  }
  std::nth_element(stars.begin(), stars.begin() + reps / 2, stars.end());
  MESSAGE("median alpha* " << stars[reps / 2] << ", share >= 0.95: " << high / double(reps)
                           << ", break share < 1: " << broken_below / double(reps));
  CHECK(stars[reps / 2] >= 0.97);
  CHECK(high >= 0.9 * reps);
  CHECK(broken_below >= 0.9 * reps);
}

TEST_CASE("objective cost grows linearly in T") {
  Rng rng(157);
  const auto y = normal_series(rng, 200000);
  auto time_of = [&](std::size_t n) {
    const std::span<const double> s(y.data(), n);
    double best = 1e300;
    for (int k = 0; k < 5; ++k) {
      const auto t0 = std::chrono::steady_clock::now();
      volatile double v = log_pred_likelihood(s, 0.97).value;
      (void)v;
      best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    return best;
  };
  const double ratio = time_of(200000) / time_of(100000);
  MESSAGE("time ratio for doubled T: " << ratio);
  CHECK(ratio > 1.0);
  CHECK(ratio < 4.0);
}
