// Acceptance run: one PASS / FAIL / SKIP line per criterion.
// Exit status is nonzero only when a criterion fails.

#include "pwdts/backtest.hpp"
#include "pwdts/baselines.hpp"
#include "pwdts/bma.hpp"
#include "pwdts/cli.hpp"
#include "pwdts/hier_pwd.hpp"
#include "pwdts/normal_pwd.hpp"
#include "pwdts/stats.hpp"
#include "pwdts/synthetic.hpp"

#include "support.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>

using namespace pwdts;
using namespace pwdts::testing;

namespace {

enum class Verdict { Pass, Fail, Skip };

struct Outcome {
  Verdict verdict;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

Outcome verdict(bool ok, const std::string& detail) { return {ok ? Verdict::Pass : Verdict::Fail, detail}; }

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// 1 ---------------------------------------------------------------------------------

Outcome stationary_reduction() {
  Rng rng(1001);
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t n = uniform_int(rng, 3, 300);
    const auto y = normal_series(rng, n, uniform(rng, -3.0, 3.0), uniform(rng, 0.2, 2.0));
    const double ybar = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (double v : y) ss += (v - ybar) * (v - ybar);
    const double s2 = ss / static_cast<double>(n - 1);
    const NormalPosterior post = terminal_posterior(y, 1.0);
    const StudentTPredictive pred = predictive(y, 1.0);
    worst = std::max({worst, std::abs(post.mean_loc - ybar), std::abs(post.t_alpha - static_cast<double>(n)),
                      std::abs(post.var_shape - 0.5 * static_cast<double>(n - 1)), std::abs(post.var_rate - 0.5 * ss),
                      std::abs(pred.df - static_cast<double>(n - 1)), std::abs(pred.loc - ybar),
                      std::abs(pred.scale2 - s2 * (1.0 + 1.0 / static_cast<double>(n)))});

    const Index p = static_cast<Index>(uniform_int(rng, 1, 4));
    const Index T = static_cast<Index>(uniform_int(rng, p + 2, 200));
    const Matrix X = random_design(rng, T, p);
    const Vector yr = random_response(rng, X);
    const GlobalParams g{Vector::Constant(p, 0.5), Vector::Constant(p, uniform(rng, 0.1, 4.0))};
    const double sigma2 = uniform(rng, 0.3, 3.0);
    const GroupConditional c = group_conditional(WeightedRegressionStats::exponential(X, yr, 1.0), g, sigma2);
    Matrix Q = X.transpose() * X / sigma2;
    Q.diagonal() += g.tau2.cwiseInverse();
    const Vector mean = Q.ldlt().solve(X.transpose() * yr / sigma2 + g.beta0.cwiseQuotient(g.tau2));
    worst = std::max({worst, max_abs(c.mean - mean), max_abs(c.precision - Q)});
  }
  return verdict(worst <= 1e-10, "max abs deviation " + fmt("%.3g", worst));
}

// 2 ---------------------------------------------------------------------------------

Outcome incremental_vs_naive() {
  Rng rng(1002);
  double worst = 0.0;
  for (int rep = 0; rep < 40; ++rep) {
    const std::size_t n = uniform_int(rng, 3, 500);
    const double a = uniform(rng, 0.5, 1.0);
    const auto y = normal_series(rng, n, uniform(rng, -5.0, 5.0), uniform(rng, 0.1, 3.0));
    const NaiveLogLik ref = naive_log_pred_likelihood(y, a);
    if (ref.terms == 0) continue;
    const PredictiveLogLik fast = log_pred_likelihood(y, a);
    worst = std::max(worst, std::abs(fast.value - ref.value) / std::max(1.0, std::abs(ref.value)));
    if (fast.terms != ref.terms) worst = std::numeric_limits<double>::infinity();
  }
  for (int rep = 0; rep < 40; ++rep) {
    const Index T = static_cast<Index>(uniform_int(rng, 5, 500));
    const Index p = static_cast<Index>(uniform_int(rng, 1, 4));
    const double a = uniform(rng, 0.5, 1.0);
    const Matrix X = random_design(rng, T, p);
    const Vector y = random_response(rng, X);
    WeightedRegressionStats s(p);
    for (Index t = 0; t < T; ++t) s.update(X.row(t).transpose(), y[t], a);
    const NaiveWls ref = naive_wls(X, y, T, geometric(a, static_cast<std::size_t>(T)));
    worst = std::max({worst, max_abs(s.xtax() - ref.xtax) / std::max(1.0, max_abs(ref.xtax)),
                      max_abs(s.xtay() - ref.xtay) / std::max(1.0, max_abs(ref.xtay)),
                      std::abs(s.ytay() - ref.ytay) / std::max(1.0, ref.ytay)});
  }
  return verdict(worst <= 1e-8, "max relative deviation " + fmt("%.3g", worst));
}

// 3-5 -------------------------------------------------------------------------------

std::size_t idx(const ExperimentSummary& s, const std::string& name) {
  return static_cast<std::size_t>(std::find(s.methods.begin(), s.methods.end(), name) - s.methods.begin());
}

std::vector<double> column(const ExperimentSummary& s, std::size_t m) {
  std::vector<double> v(static_cast<std::size_t>(s.per_rep.rows()));
  for (Index r = 0; r < s.per_rep.rows(); ++r) v[static_cast<std::size_t>(r)] = s.per_rep(r, static_cast<Index>(m));
  return v;
}

double welch(const ExperimentSummary& s, const std::string& a, const std::string& b) {
  return paired_ttest(column(s, idx(s, a)), column(s, idx(s, b))).p_value;
}

std::string table(const ExperimentSummary& s) {
  std::ostringstream o;
  for (std::size_t m = 0; m < s.methods.size(); ++m) o << (m ? ", " : "") << s.methods[m] << " " << fmt("%.4f", s.rmse[m]);
  return o.str();
}

Outcome stationary_simulation() {
  StationaryMeanConfig cfg;
  cfg.replications = 400;
  const ExperimentSummary s = run_stationary_experiment(cfg);
  const double st = s.rmse[idx(s, "Stationary")], pwd = s.rmse[idx(s, "PWD")];
  const double rest = std::min(s.rmse[idx(s, "EWMA")], s.rmse[idx(s, "State-Space")]);
  const bool ok = st < pwd && pwd < rest && std::abs(pwd - 0.054) <= 0.3 * 0.054;
  return verdict(ok, table(s));
}

Outcome capm_setting1() {
  const ExperimentSummary s = run_capm_experiment(HierCapmConfig::setting1(), 100);
  const double p = welch(s, "Hier-PWD", "State-Space-LR");
  const bool ok = s.rmse[idx(s, "Hier-PWD")] < s.rmse[idx(s, "State-Space-LR")] && p < 0.01;
  return verdict(ok, table(s) + "; p(Hier-PWD, State-Space-LR) " + fmt("%.2g", p) + ", p(Hier-PWD, Stat-Hier) " +
                         fmt("%.2g", welch(s, "Hier-PWD", "Stat-Hier")));
}

Outcome capm_setting2() {
  const ExperimentSummary s = run_capm_experiment(HierCapmConfig::setting2(), 100);
  bool ok = true;
  double worst = 0.0;
  for (const char* dyn : {"Hier-PWD", "Sep-PWD", "State-Space-LR"}) {
    for (const char* st : {"Stationary", "Stat-Hier"}) {
      const double p = welch(s, dyn, st);
      worst = std::max(worst, p);
      ok = ok && s.rmse[idx(s, dyn)] < s.rmse[idx(s, st)] && p < 0.05;
    }
  }
  const double p_sep = welch(s, "Hier-PWD", "Sep-PWD"), p_ss = welch(s, "Hier-PWD", "State-Space-LR");
  ok = ok && p_sep >= 0.05 && p_ss >= 0.05;
  return verdict(ok, table(s) + "; largest p vs stationary " + fmt("%.2g", worst) + ", p(Hier, Sep) " +
                         fmt("%.3f", p_sep) + ", p(Hier, State-Space-LR) " + fmt("%.3f", p_ss));
}

// 6 ---------------------------------------------------------------------------------

Outcome discount_equivalence() {
  Rng rng(1006);
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t T = uniform_int(rng, 10, 500);
    const double a = uniform(rng, 0.5, 1.0);
    const auto y = normal_series(rng, T, uniform(rng, -3.0, 3.0), uniform(rng, 0.1, 2.0));
    const LocalLevelState s = local_level_filter(y, {LocalLevelMode::Discount, a, {}});
    worst = std::max(worst, std::abs(s.m - terminal_posterior(y, a).mean_loc));
  }
  return verdict(worst <= 1e-12, "max abs deviation " + fmt("%.3g", worst));
}

// 7 ---------------------------------------------------------------------------------

Outcome window_special_case() {
  Rng rng(1007);
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const Index p = static_cast<Index>(uniform_int(rng, 1, 4));
    const Index T = static_cast<Index>(uniform_int(rng, p + 2, 300));
    const Index w = static_cast<Index>(uniform_int(rng, static_cast<std::size_t>(p + 1), static_cast<std::size_t>(T)));
    const Matrix X = random_design(rng, T, p);
    const Vector y = random_response(rng, X);
    const auto stats = WeightedRegressionStats::from_weights(X, y, materialize(Window{static_cast<std::size_t>(w)}, static_cast<std::size_t>(T)));
    const GlobalParams flat{Vector::Zero(p), Vector::Constant(p, std::numeric_limits<double>::infinity())};
    const Vector ols = rolling_window_fit(X, y, w).beta;
    worst = std::max(worst, max_abs(group_conditional(stats, flat, 1.0).mean - ols) / std::max(1.0, max_abs(ols)));
  }
  return verdict(worst <= 1e-10, "max deviation " + fmt("%.3g", worst));
}

// 8 ---------------------------------------------------------------------------------

Outcome gibbs_calibration() {
  StationaryHierConfig cfg;
  cfg.seed = 8;
  GibbsConfig g;
  g.iterations = 6000;
  g.burn_in = 500;
  int covered = 0, total = 0;
  for (std::size_t r = 0; r < 50; ++r) {
    const HierPanel hp = gen_stationary_hier(cfg, r);
    g.seed = 1000 + r;
    const TerminalFit f = fit_predict_terminal(hp.panel, std::vector<double>(static_cast<std::size_t>(cfg.J), 1.0), g);
    for (Index k = 0; k < f.beta0_draws.cols(); ++k) {
      std::vector<double> d(f.beta0_draws.col(k).data(), f.beta0_draws.col(k).data() + f.beta0_draws.rows());
      std::sort(d.begin(), d.end());
      const auto at = [&](double q) { return d[static_cast<std::size_t>(q * static_cast<double>(d.size() - 1))]; };
      covered += at(0.0015) <= cfg.beta0[k] && cfg.beta0[k] <= at(0.9985);
      ++total;
    }
  }
  const double rate = static_cast<double>(covered) / total;
  return verdict(rate >= 0.94, std::to_string(covered) + " of " + std::to_string(total) + " components covered");
}

// 9 ---------------------------------------------------------------------------------

Outcome bma_sanity() {
  FactorModelConfig cfg;  // F1, F2 true; F3, F4 spurious
  cfg.seed = 9;
  int good = 0;
  for (std::size_t r = 0; r < 100; ++r) {
    const PanelData p = gen_factor_model(cfg, r);
    const BmaDesign d = make_design(p.covariate_names, cfg.factor_names);
    const ModelWeights w = model_weights(p, d, enumerate_models(cfg.factor_names));
    bool ok = true;
    for (std::size_t f = 0; f < cfg.factor_names.size(); ++f) {
      const double inc = inclusion_probability(w, cfg.factor_names[f])[0];
      ok = ok && (cfg.coefficients[static_cast<Index>(f)] != 0.0 ? inc > 0.9 : inc < 0.5);
    }
    good += ok;
  }
  return verdict(good >= 90, std::to_string(good) + " of 100 replications");
}

// 10 --------------------------------------------------------------------------------

double time_fit(std::size_t T, int reps) {
  Rng rng(1010);
  const auto y = normal_series(rng, T);
  std::vector<double> times;
  double sink = 0.0;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = Clock::now();
    sink += estimate_alpha(y).alpha_star;
    times.push_back(std::chrono::duration<double>(Clock::now() - t0).count());
  }
  std::sort(times.begin(), times.end());
  if (sink < 0.0) std::puts("");
  return times[times.size() / 2];
}

Outcome scaling() {
  (void)time_fit(1000, 3);
  const double a = time_fit(1000, 31), b = time_fit(4000, 31);
  const double ratio = b / a;
  return verdict(ratio >= 3.0 && ratio <= 5.0, "T=4000 / T=1000 time ratio " + fmt("%.2f", ratio));
}

// 11 --------------------------------------------------------------------------------

Outcome real_data() {
  const char* path = std::getenv("PWDTS_FF_DATA");
  if (!path || !*path) return {Verdict::Skip, "set PWDTS_FF_DATA to a factor/portfolio CSV to run"};
  cli::IngestOptions o;
  o.factors = {"MKT", "SMB", "HML"};
  o.subtract_rf = true;
  const PanelData panel = cli::ingest_panel_csv(path, o);
  std::vector<std::unique_ptr<ForecastMethod>> methods;
  for (const char* kind : {"stationary", "sep-pwd", "hier-pwd"}) {
    MethodConfig c;
    c.kind = kind;
    c.refit_every = 12;
    methods.push_back(make_method(c));
  }
  BacktestConfig bc;
  bc.benchmark = "stationary";
  const BacktestReport r = run_backtest(panel, methods, bc);
  const Index N = r.sspe.cols();
  bool ok = N > 1;
  std::ostringstream o2;
  for (const char* m : {"sep-pwd", "hier-pwd"}) {
    const Index k = r.method_index(m);
    // Least-squares slope of delta SSPE against time.
    double tm = 0.5 * static_cast<double>(N - 1), num = 0.0, den = 0.0, dm = r.delta_sspe.row(k).mean();
    for (Index n = 0; n < N; ++n) {
      num += (static_cast<double>(n) - tm) * (r.delta_sspe(k, n) - dm);
      den += (static_cast<double>(n) - tm) * (static_cast<double>(n) - tm);
    }
    const double slope = num / den;
    ok = ok && r.delta_sspe(k, N - 1) < 0.0 && slope < 0.0;
    o2 << m << " delta " << fmt("%.1f", r.delta_sspe(k, N - 1)) << " slope " << fmt("%.3g", slope) << "; ";
  }
  o2 << "J=" << panel.J() << " T=" << panel.T();
  return verdict(ok, o2.str());
}

struct Criterion {
  int id;
  const char* title;
  Outcome (*run)();
};

}  // namespace

int main(int argc, char** argv) {
  const Criterion all[] = {
      {1, "stationary reduction", stationary_reduction},
      {2, "incremental vs naive", incremental_vs_naive},
      {3, "stationary mean simulation", stationary_simulation},
      {4, "CAPM setting 1", capm_setting1},
      {5, "CAPM setting 2", capm_setting2},
      {6, "discount equivalence", discount_equivalence},
      {7, "window special case", window_special_case},
      {8, "Gibbs calibration", gibbs_calibration},
      {9, "BMA sanity", bma_sanity},
      {10, "linear scaling", scaling},
      {11, "real data", real_data},
  };
  // Optional argument: comma-free list of criterion ids to run.
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
  int failed = 0;
  for (const auto& c : all) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {Verdict::Fail, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    const char* tag = o.verdict == Verdict::Pass ? "PASS" : o.verdict == Verdict::Fail ? "FAIL" : "SKIP";
    std::printf("%s criterion %2d %s: %s (%.1f s)\n", tag, c.id, c.title, o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += o.verdict == Verdict::Fail;
  }
  return failed == 0 ? 0 : 1;
}
