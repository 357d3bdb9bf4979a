#include "pwdts/synthetic.hpp"

#include <random>
#include <string>

namespace pwdts {

namespace {

double draw_beta(double a, double b, Rng& rng) {
  std::gamma_distribution<double> ga(a, 1.0), gb(b, 1.0);
  const double x = ga(rng);
  const double y = gb(rng);
  return x + y > 0.0 ? x / (x + y) : 0.0;
}

// Monthly YYYYMM dates from January 1900.
std::vector<int> monthly_dates(Index T) {
  std::vector<int> d(static_cast<std::size_t>(T));
  for (Index t = 0; t < T; ++t) {
    d[static_cast<std::size_t>(t)] = static_cast<int>(1900 + t / 12) * 100 + static_cast<int>(t % 12) + 1;
  }
  return d;
}

}  // namespace

void StationaryMeanConfig::validate() const {
  require(T >= 2, "stationary config: T must be at least 2");
  require(sigma2 >= 0.0, "stationary config: sigma2 must be nonnegative");
}

std::vector<double> gen_stationary_replication(const StationaryMeanConfig& cfg, std::size_t r) {
  cfg.validate();
  Rng rng = make_stream(cfg.seed, r);
  std::normal_distribution<double> n01;
  const double sd = std::sqrt(cfg.sigma2);
  std::vector<double> y(cfg.T);
  for (double& v : y) v = cfg.beta + sd * n01(rng);
  return y;
}

std::vector<std::vector<double>> gen_stationary(const StationaryMeanConfig& cfg) {
  std::vector<std::vector<double>> out;
  out.reserve(cfg.replications);
  for (std::size_t r = 0; r < cfg.replications; ++r) out.push_back(gen_stationary_replication(cfg, r));
  return out;
}

HierCapmConfig HierCapmConfig::setting1() {
  HierCapmConfig c;
  c.J = 100;
  c.T = 10;
  return c;
}

HierCapmConfig HierCapmConfig::setting2() {
  HierCapmConfig c;
  c.J = 10;
  c.T = 100;
  return c;
}

void HierCapmConfig::validate() const {
  require(J >= 2, "capm config: J must be at least 2");
  require(T >= 1, "capm config: T must be positive");
  require(a > 0.0 && b > 0.0, "capm config: Beta parameters must be positive");
  require(sigma_m > 0.0 && sigma > 0.0 && tau >= 0.0, "capm config: scales must be positive");
}

CapmPanel gen_hier_capm(const HierCapmConfig& cfg, std::size_t replication) {
  cfg.validate();
  const Index J = cfg.J, T = cfg.T;
  Rng rng = make_stream(cfg.seed, replication);
  std::normal_distribution<double> n01;

  CapmPanel out;
  out.phi.resize(J);
  out.beta_initial.resize(J);
  for (Index j = 0; j < J; ++j) out.phi[j] = draw_beta(cfg.a, cfg.b, rng);
  for (Index j = 0; j < J; ++j) out.beta_initial[j] = cfg.beta_init_mean + cfg.tau * n01(rng);
  out.market.resize(T);
  for (Index t = 0; t < T; ++t) out.market[t] = cfg.mu_m + cfg.sigma_m * n01(rng);

  out.beta.resize(J, T);
  Vector prev = out.beta_initial;
  for (Index t = 0; t < T; ++t) {
    const double bar = prev.mean();
    for (Index j = 0; j < J; ++j) out.beta(j, t) = prev[j] + out.phi[j] * (bar - prev[j]) + cfg.tau * n01(rng);
    prev = out.beta.col(t);
  }

  const Index p = cfg.intercept ? 2 : 1;
  PanelData& panel = out.panel;
  panel.dates = monthly_dates(T);
  panel.covariate_names = cfg.intercept ? std::vector<std::string>{"const", "MKT"} : std::vector<std::string>{"MKT"};
  panel.groups.resize(static_cast<std::size_t>(J));
  for (Index j = 0; j < J; ++j) {
    Group& g = panel.groups[static_cast<std::size_t>(j)];
    g.name = "G" + std::to_string(j + 1);
    g.X = Matrix::Ones(T, p);
    g.X.col(p - 1) = out.market;
    g.y.resize(T);
  }
  for (Index t = 0; t < T; ++t) {
    for (Index j = 0; j < J; ++j) {
      panel.groups[static_cast<std::size_t>(j)].y[t] = out.beta(j, t) * out.market[t] + cfg.sigma * n01(rng);
    }
  }
  return out;
}

void StationaryHierConfig::validate() const {
  require(J >= 1 && T >= 1, "stationary hier config: J and T must be positive");
  require(beta0.size() >= 1 && tau.size() == beta0.size(), "stationary hier config: beta0 and tau must match");
  require((tau.array() >= 0.0).all() && sigma > 0.0, "stationary hier config: scales must be positive");
}

HierPanel gen_stationary_hier(const StationaryHierConfig& cfg, std::size_t replication) {
  cfg.validate();
  const Index J = cfg.J, T = cfg.T, p = cfg.beta0.size();
  Rng rng = make_stream(cfg.seed, replication);
  std::normal_distribution<double> n01;
  HierPanel out;
  out.beta.resize(J, p);
  for (Index j = 0; j < J; ++j) {
    for (Index k = 0; k < p; ++k) out.beta(j, k) = cfg.beta0[k] + cfg.tau[k] * n01(rng);
  }
  PanelData& panel = out.panel;
  panel.dates = monthly_dates(T);
  panel.covariate_names.push_back("const");
  for (Index k = 1; k < p; ++k) panel.covariate_names.push_back("Z" + std::to_string(k));
  panel.groups.resize(static_cast<std::size_t>(J));
  for (Index j = 0; j < J; ++j) {
    Group& g = panel.groups[static_cast<std::size_t>(j)];
    g.name = "G" + std::to_string(j + 1);
    g.X.resize(T, p);
    g.y.resize(T);
    for (Index t = 0; t < T; ++t) {
      g.X(t, 0) = 1.0;
      for (Index k = 1; k < p; ++k) g.X(t, k) = n01(rng);
      g.y[t] = g.X.row(t).dot(out.beta.row(j)) + cfg.sigma * n01(rng);
    }
  }
  return out;
}

void FactorModelConfig::validate() const {
  require(J >= 1 && T >= 2, "factor model config: J and T must be positive");
  require(static_cast<Index>(factor_names.size()) == coefficients.size(),
          "factor model config: one coefficient per factor");
  require(factor_sd > 0.0 && sigma > 0.0, "factor model config: scales must be positive");
}

PanelData gen_factor_model(const FactorModelConfig& cfg, std::size_t replication) {
  cfg.validate();
  const Index J = cfg.J, T = cfg.T, F = cfg.coefficients.size();
  Rng rng = make_stream(cfg.seed, replication);
  std::normal_distribution<double> n01;
  PanelData panel;
  panel.dates = monthly_dates(T);
  panel.covariate_names.push_back("const");
  panel.covariate_names.insert(panel.covariate_names.end(), cfg.factor_names.begin(), cfg.factor_names.end());
  Matrix X(T, F + 1);
  X.col(0).setOnes();
  for (Index t = 0; t < T; ++t) {
    for (Index f = 0; f < F; ++f) X(t, f + 1) = cfg.factor_sd * n01(rng);
  }
  for (Index j = 0; j < J; ++j) {
    Group g;
    g.name = "G" + std::to_string(j + 1);
    g.X = X;
    g.y.resize(T);
    for (Index t = 0; t < T; ++t) {
      g.y[t] = cfg.intercept + X.row(t).tail(F).dot(cfg.coefficients) + cfg.sigma * n01(rng);
    }
    panel.groups.push_back(std::move(g));
  }
  return panel;
}

}  // namespace pwdts
