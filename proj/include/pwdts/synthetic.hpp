#pragma once

#include "pwdts/common.hpp"
#include "pwdts/panel.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace pwdts {

/// y_t = beta + e_t, e_t ~ N(0, sigma2).
struct StationaryMeanConfig {
  std::size_t T = 500;
  double beta = 2.0;
  double sigma2 = 1.0;
  std::size_t replications = 400;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Replication r alone; identical to the r-th entry of gen_stationary.
std::vector<double> gen_stationary_replication(const StationaryMeanConfig& cfg, std::size_t r);
std::vector<std::vector<double>> gen_stationary(const StationaryMeanConfig& cfg);

/**
 * Market model with mean-reverting betas:
 *   y_jt = beta_jt m_t + e_jt,               e ~ N(0, sigma^2)
 *   beta_jt = beta_j,t-1 + phi_j (mean_k beta_k,t-1 - beta_j,t-1) + zeta_jt,  zeta ~ N(0, tau^2)
 *   m_t ~ N(mu_m, sigma_m^2) shared by all groups,  phi_j ~ Beta(a, b),  beta_j0 ~ N(1, tau^2).
 */
struct HierCapmConfig {
  Index J = 10;
  Index T = 100;
  double mu_m = 0.047;
  double sigma_m = 0.045;
  double sigma = 0.04;
  double tau = 0.08;
  double a = 3.0;
  double b = 97.0;
  double beta_init_mean = 1.0;
  bool intercept = false;  ///< prepend a column of ones named "const" (true intercept 0)
  std::uint64_t seed = 1;

  static HierCapmConfig setting1();  ///< J = 100, T = 10
  static HierCapmConfig setting2();  ///< J = 10, T = 100
  void validate() const;
};

struct CapmPanel {
  PanelData panel;
  Matrix beta;         ///< J x T true betas beta_j1..beta_jT
  Vector beta_initial; ///< beta_j0
  Vector market;       ///< length T
  Vector phi;          ///< length J
};

CapmPanel gen_hier_capm(const HierCapmConfig& cfg, std::size_t replication = 0);

/**
 * Stationary hierarchical regression: beta_j ~ N(beta0, diag(tau^2)),
 * y_jt = x_jt beta_j + e_jt with x_jt = (1, z_1, ..., z_{p-1}), z ~ N(0, 1).
 */
struct StationaryHierConfig {
  Index J = 30;
  Index T = 50;
  Vector beta0 = Vector::Constant(2, 1.0);
  Vector tau = Vector::Constant(2, 0.2);
  double sigma = 1.0;
  std::uint64_t seed = 1;

  void validate() const;
};

struct HierPanel {
  PanelData panel;
  Matrix beta;  ///< J x p
};

HierPanel gen_stationary_hier(const StationaryHierConfig& cfg, std::size_t replication = 0);

/**
 * Single-equation factor model y_t = c + sum_f b_f F_ft + e_t with
 * independent N(0, factor_sd^2) factors; zero coefficients make a factor
 * spurious. Columns: "const" then the factor names.
 */
struct FactorModelConfig {
  Index J = 1;
  Index T = 500;
  std::vector<std::string> factor_names = {"F1", "F2", "F3", "F4"};
  Vector coefficients = (Vector(4) << 1.0, 0.5, 0.0, 0.0).finished();
  double intercept = 0.0;
  double factor_sd = 1.0;
  double sigma = 1.0;
  std::uint64_t seed = 1;

  void validate() const;
};

PanelData gen_factor_model(const FactorModelConfig& cfg, std::size_t replication = 0);

}  // namespace pwdts
