#pragma once

#include "pwdts/bma.hpp"
#include "pwdts/common.hpp"
#include "pwdts/hier_pwd.hpp"
#include "pwdts/panel.hpp"
#include "pwdts/synthetic.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace pwdts {

/// Runs fn(0..n-1) on up to `threads` workers (0 = hardware concurrency). Rethrows the first exception.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

// ---------------------------------------------------------------------------
// Forecast methods
// ---------------------------------------------------------------------------

/// One forecast step for every group. Failed groups carry NaN and a reason.
struct StepOutput {
  Vector prediction;
  std::vector<std::string> failure;
  std::optional<Vector> alpha;
  std::optional<Matrix> beta;       ///< J x p
  std::optional<Matrix> inclusion;  ///< J x F

  explicit StepOutput(Index J = 0);
};

/**
 * A method sees only the history view (rows [0, t)) and the covariates of
 * row t, and predicts y at row t for every group.
 */
class ForecastMethod {
 public:
  virtual ~ForecastMethod() = default;
  [[nodiscard]] virtual std::string name() const = 0;
  /// Smallest history length the method can forecast from.
  [[nodiscard]] virtual Index min_history(Index p) const = 0;
  virtual StepOutput step(const PanelView& history, const Matrix& x_next) = 0;
  [[nodiscard]] virtual std::vector<std::string> factor_names() const { return {}; }
};

struct MethodConfig {
  std::string kind;                  ///< stationary, stationary-hier, sep-pwd, hier-pwd, window, state-space-lr, sep-pwd-bma
  std::string label;                 ///< report name; defaults to kind (window: window-<length>)
  Index window = 60;
  int refit_every = 1;
  GibbsConfig gibbs;
  std::vector<std::string> factors;  ///< BMA candidate factors; empty = every covariate except "const"
  std::size_t bma_refresh = 12;
};

std::unique_ptr<ForecastMethod> make_method(const MethodConfig& config);
const std::vector<std::string>& method_kinds();

// ---------------------------------------------------------------------------
// Rolling one-step-ahead backtest
// ---------------------------------------------------------------------------

struct MethodTrack {
  std::string name;
  Matrix prediction;  ///< J x N
  Matrix spe;         ///< J x N, NaN where the method failed
  std::vector<std::string> failures;
  Matrix alpha;                    ///< J x N, empty unless recorded
  std::vector<Matrix> beta;        ///< one J x N matrix per covariate, empty unless recorded
  std::vector<Matrix> inclusion;   ///< one J x N matrix per factor
  std::vector<std::string> factor_names;
  double seconds = 0.0;
};

struct MethodSummary {
  std::string name;
  double mean_spe = 0.0;  ///< over valid (group, time) cells
  double se = 0.0;        ///< standard error of per-group mean SPE across groups
  double t_stat = 0.0;
  double p_value = 1.0;   ///< Welch test of per-group mean SPE against the reference; NaN when J < 2
  double total_sspe = 0.0;
  std::size_t failures = 0;
};

struct BacktestReport {
  std::vector<int> dates;  ///< target dates, length N
  std::vector<std::string> groups;
  std::vector<std::string> covariate_names;
  std::vector<MethodTrack> methods;
  std::string benchmark;
  std::string reference;
  Matrix valid;       ///< J x N, 1 where every method produced a forecast
  Matrix sspe;        ///< M x N cumulative SPE over valid cells
  Matrix delta_sspe;  ///< M x N, SSPE minus the benchmark's
  std::vector<MethodSummary> summary;

  [[nodiscard]] Index method_index(const std::string& name) const;
};

struct BacktestConfig {
  Index start = -1;       ///< first target row; -1 = earliest row every method supports
  std::string benchmark;  ///< defaults to the first method
  std::string reference;  ///< for p-values; defaults to the method with the smallest mean SPE
};

BacktestReport run_backtest(const PanelData& panel, std::vector<std::unique_ptr<ForecastMethod>>& methods,
                            const BacktestConfig& config = {});

/// Recomputes validity, SSPE, delta SSPE and summaries from the stored per-cell values.
void compute_aggregates(BacktestReport& report);

enum class TrajectoryQuantity { AlphaStar, Beta, Inclusion };

/// Raw per-time trajectory of one group; `component` selects the covariate or factor.
std::vector<double> trajectory_extract(const BacktestReport& report, const std::string& method,
                                       TrajectoryQuantity quantity, Index group, Index component = 0);

// ---------------------------------------------------------------------------
// Simulation experiments
// ---------------------------------------------------------------------------

struct ExperimentSummary {
  std::vector<std::string> methods;
  std::string reference;
  Matrix per_rep;  ///< R x M per-replication error (|error| or per-dataset RMSE)
  std::vector<double> rmse;     ///< table value per method
  std::vector<double> se;
  std::vector<double> p_value;  ///< Welch test against the reference, NaN for the reference
  std::vector<double> mean_ms;  ///< wall clock per replication
  std::size_t excluded = 0;     ///< replications dropped because some method failed
};

/**
 * Terminal-point experiment on i.i.d. normal series: every method trains on
 * the first T - 1 points and predicts the last; the error is measured
 * against beta. RMSE is the root mean squared error over replications.
 */
ExperimentSummary run_stationary_experiment(const StationaryMeanConfig& config, std::size_t threads = 1);

/**
 * Terminal-point experiment on the mean-reverting CAPM panel: methods train
 * on rows [0, T - 1) and predict row T - 1; the per-replication RMSE is
 * taken over groups against beta_jT m_T. The table value is the mean of
 * per-replication RMSEs.
 */
ExperimentSummary run_capm_experiment(const HierCapmConfig& config, std::size_t replications,
                                      const GibbsConfig& gibbs = {}, std::size_t threads = 1);

}  // namespace pwdts
