#include "pwdts/synthetic.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cstring>
#include <numeric>

using namespace pwdts;
using namespace pwdts::testing;

namespace {

bool same_bytes(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

double sd_of(const std::vector<double>& v) {
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

TEST_CASE("zero variance gives a constant series at beta") {
  StationaryMeanConfig cfg;
  cfg.sigma2 = 0.0;
  cfg.replications = 3;
  for (const auto& y : gen_stationary(cfg))
    for (double v : y) CHECK(v == 2.0);
}

TEST_CASE("4000 x 500 draws average to 2 within 3 SE") {
  StationaryMeanConfig cfg;
  cfg.replications = 4000;
  double sum = 0.0, sum2 = 0.0;
  for (const auto& y : gen_stationary(cfg))
    for (double v : y) {
      sum += v;
      sum2 += v * v;
    }
  const double n = 4000.0 * 500.0;
  const double mean = sum / n;
  CHECK(std::abs(mean - 2.0) <= 3.0 / std::sqrt(n));
  CHECK(sum2 / n - mean * mean == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("seeded generation is deterministic and replications reproduce in isolation") {
  StationaryMeanConfig cfg;
  cfg.replications = 12;
  cfg.seed = 99;
  const auto a = gen_stationary(cfg);
  const auto b = gen_stationary(cfg);
  for (std::size_t r = 0; r < 12; ++r) {
    CHECK(same_bytes(a[r], b[r]));
    CHECK(same_bytes(a[r], gen_stationary_replication(cfg, r)));
  }
  cfg.seed = 100;
  CHECK_FALSE(same_bytes(a[0], gen_stationary_replication(cfg, 0)));

  const CapmPanel p = gen_hier_capm(HierCapmConfig::setting2(), 7);
  const CapmPanel q = gen_hier_capm(HierCapmConfig::setting2(), 7);
  CHECK(p.panel.groups[3].y == q.panel.groups[3].y);
  CHECK(p.beta == q.beta);
  CHECK_FALSE(gen_hier_capm(HierCapmConfig::setting2(), 8).panel.groups[3].y == p.panel.groups[3].y);
}

TEST_CASE("settings 1 and 2 have the stated shapes") {
  const CapmPanel s1 = gen_hier_capm(HierCapmConfig::setting1());
  CHECK(s1.panel.J() == 100);
  CHECK(s1.panel.T() == 10);
  CHECK(s1.beta.rows() == 100);
  CHECK(s1.beta.cols() == 10);
  const CapmPanel s2 = gen_hier_capm(HierCapmConfig::setting2());
  CHECK(s2.panel.J() == 10);
  CHECK(s2.panel.T() == 100);
  CHECK(s2.panel.p() == 1);
  CHECK(s2.panel.dates.size() == 100);
  s2.panel.validate();
  HierCapmConfig with = HierCapmConfig::setting2();
  with.intercept = true;
  const CapmPanel s3 = gen_hier_capm(with);
  CHECK(s3.panel.covariate_names == std::vector<std::string>{"const", "MKT"});
  CHECK(s3.panel.groups[0].X.col(0) == Vector::Ones(100));
}

TEST_CASE("tau = 0 with negligible reversion freezes the beta paths") {
  HierCapmConfig cfg = HierCapmConfig::setting2();
  cfg.tau = 0.0;
  cfg.a = 1e-8;
  const CapmPanel p = gen_hier_capm(cfg, 1);
  for (Index j = 0; j < cfg.J; ++j)
    for (Index t = 0; t < cfg.T; ++t) CHECK(p.beta(j, t) == doctest::Approx(p.beta_initial[j]).epsilon(1e-12));
}

TEST_CASE("reversion rates average a / (a + b) = 0.03") {
  HierCapmConfig cfg = HierCapmConfig::setting2();
  cfg.J = 10000;
  cfg.T = 1;
  const CapmPanel p = gen_hier_capm(cfg, 0);
  const double mean = p.phi.mean();
  const double sd = std::sqrt(3.0 * 97.0 / (100.0 * 100.0 * 101.0));
  CHECK(std::abs(mean - 0.03) <= 3.0 * sd / 100.0);
  CHECK((p.phi.array() > 0.0).all());
  CHECK((p.phi.array() < 1.0).all());
}

TEST_CASE("evolution residuals use the previous cross-group mean") {
  HierCapmConfig cfg = HierCapmConfig::setting2();
  cfg.J = 100;
  cfg.a = 50.0;
  cfg.b = 50.0;  // strong reversion makes a wrong mean visible
  const CapmPanel p = gen_hier_capm(cfg, 2);
  std::vector<double> zeta, obs;
  for (Index t = 0; t < cfg.T; ++t) {
    const Vector prev = t == 0 ? p.beta_initial : Vector(p.beta.col(t - 1));
    const double bar = prev.mean();
    for (Index j = 0; j < cfg.J; ++j) {
      zeta.push_back(p.beta(j, t) - prev[j] - p.phi[j] * (bar - prev[j]));
      const auto& g = p.panel.groups[static_cast<std::size_t>(j)];
      CHECK(g.X(t, 0) == p.market[t]);
      obs.push_back(g.y[t] - p.beta(j, t) * p.market[t]);
    }
  }
  CHECK(sd_of(zeta) == doctest::Approx(cfg.tau).epsilon(0.03));
  CHECK(std::abs(std::accumulate(zeta.begin(), zeta.end(), 0.0)) / static_cast<double>(zeta.size()) < 4.0 * cfg.tau / 100.0);
  CHECK(sd_of(obs) == doctest::Approx(cfg.sigma).epsilon(0.03));
}

TEST_CASE("market factor moments") {
  HierCapmConfig cfg = HierCapmConfig::setting2();
  cfg.T = 20000;
  const CapmPanel p = gen_hier_capm(cfg, 0);
  const std::vector<double> m(p.market.data(), p.market.data() + p.market.size());
  CHECK(std::abs(p.market.mean() - 0.047) <= 3.0 * 0.045 / std::sqrt(20000.0));
  CHECK(sd_of(m) == doctest::Approx(0.045).epsilon(0.03));
}

TEST_CASE("stationary hierarchical and factor generators") {
  StationaryHierConfig h;
  const HierPanel hp = gen_stationary_hier(h, 0);
  CHECK(hp.panel.J() == 30);
  CHECK(hp.panel.T() == 50);
  CHECK(hp.beta.rows() == 30);
  CHECK(std::abs(hp.beta.col(0).mean() - 1.0) < 4.0 * 0.2 / std::sqrt(30.0));

  FactorModelConfig f;
  const PanelData fp = gen_factor_model(f, 0);
  CHECK(fp.covariate_names == std::vector<std::string>{"const", "F1", "F2", "F3", "F4"});
  CHECK(fp.T() == 500);
  const Vector resid = fp.groups[0].y - fp.groups[0].X.rightCols(4) * f.coefficients;
  CHECK(std::abs(resid.mean()) < 4.0 / std::sqrt(500.0));

  FactorModelConfig bad = f;
  bad.coefficients = Vector::Zero(2);
  CHECK_THROWS_AS(gen_factor_model(bad), ValidationError);
  HierCapmConfig one = HierCapmConfig::setting2();
  one.J = 1;
  CHECK_THROWS_AS(gen_hier_capm(one), ValidationError);
}
