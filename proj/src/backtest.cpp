#include "pwdts/backtest.hpp"

#include "pwdts/baselines.hpp"
#include "pwdts/normal_pwd.hpp"
#include "pwdts/stats.hpp"
#include "pwdts/weighted_regression.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

namespace pwdts {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::uint64_t derived_seed(std::uint64_t seed, std::uint64_t index) {
  Rng r = make_stream(seed ^ 0x9e3779b97f4a7c15ULL, index);
  return r();
}

void fail_all(StepOutput& out, const std::string& reason) {
  for (auto& f : out.failure) f = reason;
  out.prediction.setConstant(kNaN);
}

// ---------------------------------------------------------------------------

class StationaryMethod final : public ForecastMethod {
 public:
  explicit StationaryMethod(std::string label) : label_(std::move(label)) {}
  [[nodiscard]] std::string name() const override { return label_; }
  [[nodiscard]] Index min_history(Index p) const override { return p + 1; }

  StepOutput step(const PanelView& h, const Matrix& x_next) override {
    StepOutput out(h.J());
    out.alpha = Vector::Ones(h.J());
    out.beta = Matrix::Constant(h.J(), h.p(), kNaN);
    for (Index j = 0; j < h.J(); ++j) {
      try {
        const OlsFit fit = stationary_ols(h.X(j), h.y(j));
        out.prediction[j] = x_next.row(j).dot(fit.beta);
        out.beta->row(j) = fit.beta.transpose();
      } catch (const std::exception& e) {
        out.failure[static_cast<std::size_t>(j)] = e.what();
      }
    }
    return out;
  }

 private:
  std::string label_;
};

class WindowMethod final : public ForecastMethod {
 public:
  WindowMethod(std::string label, Index window) : label_(std::move(label)), window_(window) {}
  [[nodiscard]] std::string name() const override { return label_; }
  [[nodiscard]] Index min_history(Index p) const override { return std::max(window_, p + 1); }

  StepOutput step(const PanelView& h, const Matrix& x_next) override {
    StepOutput out(h.J());
    out.beta = Matrix::Constant(h.J(), h.p(), kNaN);
    for (Index j = 0; j < h.J(); ++j) {
      try {
        const OlsFit fit = rolling_window_fit(h.X(j), h.y(j), window_);
        out.prediction[j] = x_next.row(j).dot(fit.beta);
        out.beta->row(j) = fit.beta.transpose();
      } catch (const std::exception& e) {
        out.failure[static_cast<std::size_t>(j)] = e.what();
      }
    }
    return out;
  }

 private:
  std::string label_;
  Index window_;
};

class StationaryHierMethod final : public ForecastMethod {
 public:
  StationaryHierMethod(std::string label, GibbsConfig gibbs, int refit_every)
      : label_(std::move(label)), gibbs_(gibbs), refit_every_(refit_every) {}
  [[nodiscard]] std::string name() const override { return label_; }
  [[nodiscard]] Index min_history(Index p) const override { return p + 2; }

  StepOutput step(const PanelView& h, const Matrix& x_next) override {
    StepOutput out(h.J());
    out.alpha = Vector::Ones(h.J());
    if (steps_++ % refit_every_ == 0 || beta_.rows() != h.J()) {
      try {
        GibbsConfig g = gibbs_;
        g.seed = derived_seed(gibbs_.seed, static_cast<std::uint64_t>(h.T()));
        const TerminalFit fit = fit_predict_terminal(h, std::vector<double>(static_cast<std::size_t>(h.J()), 1.0), g);
        beta_.resize(h.J(), h.p());
        for (Index j = 0; j < h.J(); ++j) beta_.row(j) = fit.groups[static_cast<std::size_t>(j)].beta_mean.transpose();
      } catch (const std::exception& e) {
        beta_.resize(0, 0);
        fail_all(out, e.what());
        return out;
      }
    }
    for (Index j = 0; j < h.J(); ++j) out.prediction[j] = x_next.row(j).dot(beta_.row(j));
    out.beta = beta_;
    return out;
  }

 private:
  std::string label_;
  GibbsConfig gibbs_;
  int refit_every_;
  long steps_ = 0;
  Matrix beta_;
};

/// Streams new history rows into per-group state; resets when the history shrinks.
class StreamingMethod : public ForecastMethod {
 protected:
  virtual void reset(const PanelView& h) = 0;
  virtual void feed(Index j, const Eigen::Ref<const Vector>& x, double y) = 0;

  void catch_up(const PanelView& h) {
    if (h.T() < consumed_ || !initialized_) {
      reset(h);
      consumed_ = 0;
      initialized_ = true;
    }
    for (Index t = consumed_; t < h.T(); ++t) {
      for (Index j = 0; j < h.J(); ++j) feed(j, h.X(j).row(t).transpose(), h.y(j)[t]);
    }
    consumed_ = h.T();
  }

 private:
  Index consumed_ = 0;
  bool initialized_ = false;
};

class SepPwdMethod final : public StreamingMethod {
 public:
  explicit SepPwdMethod(std::string label) : label_(std::move(label)) {}
  [[nodiscard]] std::string name() const override { return label_; }
  [[nodiscard]] Index min_history(Index p) const override { return p + 3; }

  StepOutput step(const PanelView& h, const Matrix& x_next) override {
    catch_up(h);
    StepOutput out(h.J());
    out.alpha = Vector::Constant(h.J(), kNaN);
    out.beta = Matrix::Constant(h.J(), h.p(), kNaN);
    for (Index j = 0; j < h.J(); ++j) {
      const auto& obj = objectives_[static_cast<std::size_t>(j)];
      const std::ptrdiff_t best = obj.best_index();
      const std::size_t g = best >= 0 ? static_cast<std::size_t>(best) : obj.grid().size() - 1;
      try {
        const PluginFit fit = obj.fit(g);
        out.prediction[j] = x_next.row(j).dot(fit.beta);
        (*out.alpha)[j] = obj.grid()[g];
        out.beta->row(j) = fit.beta.transpose();
      } catch (const std::exception& e) {
        out.failure[static_cast<std::size_t>(j)] = e.what();
      }
    }
    return out;
  }

 protected:
  void reset(const PanelView& h) override {
    objectives_.assign(static_cast<std::size_t>(h.J()),
                       RollingPluginObjective(h.p(), regression_alpha_grid(h.p()), RegressionPrior::diffuse(h.p())));
  }
  void feed(Index j, const Eigen::Ref<const Vector>& x, double y) override {
    objectives_[static_cast<std::size_t>(j)].observe(x, y);
  }

 private:
  std::string label_;
  std::vector<RollingPluginObjective> objectives_;
};

class HierPwdMethod final : public ForecastMethod {
 public:
  HierPwdMethod(std::string label, GibbsConfig gibbs, int refit_every)
      : label_(std::move(label)), gibbs_(gibbs), refit_every_(refit_every) {}
  [[nodiscard]] std::string name() const override { return label_; }
  [[nodiscard]] Index min_history(Index p) const override { return p + 3; }

  StepOutput step(const PanelView& h, const Matrix& x_next) override {
    StepOutput out(h.J());
    out.beta = Matrix::Constant(h.J(), h.p(), kNaN);
    const bool refit = steps_++ % refit_every_ == 0 || static_cast<Index>(alphas_.size()) != h.J();
    try {
      if (refit) {
        const PluginAlphaResult est = estimate_alphas_plugin(h, {}, gibbs_, true);
        alphas_.clear();
        for (const auto& g : est.groups) alphas_.push_back(g.alpha_star);
        prior_ = est.prior;
        GibbsConfig g = gibbs_;
        g.seed = derived_seed(gibbs_.seed, static_cast<std::uint64_t>(h.T()));
        const TerminalFit fit = fit_predict_terminal(h, alphas_, g, x_next);
        for (Index j = 0; j < h.J(); ++j) {
          const auto& gs = fit.groups[static_cast<std::size_t>(j)];
          out.prediction[j] = gs.pred_mean;
          out.beta->row(j) = gs.beta_mean.transpose();
        }
      } else {
        for (Index j = 0; j < h.J(); ++j) {
          try {
            const auto stats =
                WeightedRegressionStats::exponential(h.X(j), h.y(j), alphas_[static_cast<std::size_t>(j)]);
            const PluginFit fit = plugin_fit(stats, prior_);
            out.prediction[j] = x_next.row(j).dot(fit.beta);
            out.beta->row(j) = fit.beta.transpose();
          } catch (const std::exception& e) {
            out.failure[static_cast<std::size_t>(j)] = e.what();
          }
        }
      }
    } catch (const std::exception& e) {
      alphas_.clear();
      fail_all(out, e.what());
    }
    if (!alphas_.empty()) out.alpha = Eigen::Map<const Vector>(alphas_.data(), h.J());
    return out;
  }

 private:
  std::string label_;
  GibbsConfig gibbs_;
  int refit_every_;
  long steps_ = 0;
  std::vector<double> alphas_;
  RegressionPrior prior_;
};

class StateSpaceMethod final : public ForecastMethod {
 public:
  StateSpaceMethod(std::string label, int refit_every) : label_(std::move(label)), refit_every_(refit_every) {}
  [[nodiscard]] std::string name() const override { return label_; }
  [[nodiscard]] Index min_history(Index p) const override { return 3 * p + 1; }

  StepOutput step(const PanelView& h, const Matrix& x_next) override {
    StepOutput out(h.J());
    out.beta = Matrix::Constant(h.J(), h.p(), kNaN);
    const bool refit = steps_++ % refit_every_ == 0 || static_cast<Index>(q_.size()) != h.J();
    if (refit) q_.assign(static_cast<std::size_t>(h.J()), kNaN);
    for (Index j = 0; j < h.J(); ++j) {
      auto& q = q_[static_cast<std::size_t>(j)];
      try {
        StateSpaceOptions opts;
        if (!std::isnan(q)) opts.fixed_q = q;
        const StateSpaceFit fit = state_space_lr_fit(h.X(j), h.y(j), opts);
        if (!fit.fallback) q = fit.q;
        out.prediction[j] = fit.predict(x_next.row(j).transpose());
        out.beta->row(j) = fit.beta.transpose();
      } catch (const std::exception& e) {
        out.failure[static_cast<std::size_t>(j)] = e.what();
      }
    }
    return out;
  }

 private:
  std::string label_;
  int refit_every_;
  long steps_ = 0;
  std::vector<double> q_;
};

class BmaMethod final : public StreamingMethod {
 public:
  BmaMethod(std::string label, std::vector<std::string> factors, std::size_t refresh)
      : label_(std::move(label)), factors_(std::move(factors)), refresh_(refresh) {}
  [[nodiscard]] std::string name() const override { return label_; }
  [[nodiscard]] Index min_history(Index p) const override { return p + 3; }
  [[nodiscard]] std::vector<std::string> factor_names() const override { return design_.factor_names; }

  StepOutput step(const PanelView& h, const Matrix& x_next) override {
    catch_up(h);
    StepOutput out(h.J());
    const auto F = static_cast<Index>(design_.factor_names.size());
    out.inclusion = Matrix::Constant(h.J(), F, kNaN);
    for (Index j = 0; j < h.J(); ++j) {
      const auto& roll = rolls_[static_cast<std::size_t>(j)];
      try {
        out.prediction[j] = roll.predict(x_next.row(j).transpose()).mean();
        out.inclusion->row(j) = roll.inclusion().transpose();
      } catch (const std::exception& e) {
        out.failure[static_cast<std::size_t>(j)] = e.what();
      }
    }
    return out;
  }

 protected:
  void reset(const PanelView& h) override {
    std::vector<std::string> factors = factors_;
    if (factors.empty()) {
      for (const auto& n : h.covariate_names()) {
        if (n != "const") factors.push_back(n);
      }
    }
    design_ = make_design(h.covariate_names(), factors, true);
    const auto models = enumerate_models(design_.factor_names);
    rolls_.assign(static_cast<std::size_t>(h.J()), RollingBma(design_, models, {}, refresh_));
  }
  void feed(Index j, const Eigen::Ref<const Vector>& x, double y) override {
    rolls_[static_cast<std::size_t>(j)].observe(x, y);
  }

 private:
  std::string label_;
  std::vector<std::string> factors_;
  std::size_t refresh_;
  BmaDesign design_;
  std::vector<RollingBma> rolls_;
};

}  // namespace

// ---------------------------------------------------------------------------

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  if (threads == 0) threads = std::max(1U, std::thread::hardware_concurrency());
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          const std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

StepOutput::StepOutput(Index J)
    : prediction(Vector::Constant(J, kNaN)), failure(static_cast<std::size_t>(J)) {}

const std::vector<std::string>& method_kinds() {
  static const std::vector<std::string> kinds = {"stationary",     "stationary-hier", "sep-pwd",    "hier-pwd",
                                                 "window",         "state-space-lr",  "sep-pwd-bma"};
  return kinds;
}

std::unique_ptr<ForecastMethod> make_method(const MethodConfig& c) {
  require(c.refit_every >= 1, "method '" + c.kind + "': refit_every must be at least 1");
  c.gibbs.validate();
  std::string label = c.label;
  if (label.empty()) label = c.kind == "window" ? "window-" + std::to_string(c.window) : c.kind;
  if (c.kind == "stationary") return std::make_unique<StationaryMethod>(label);
  if (c.kind == "stationary-hier") return std::make_unique<StationaryHierMethod>(label, c.gibbs, c.refit_every);
  if (c.kind == "sep-pwd") return std::make_unique<SepPwdMethod>(label);
  if (c.kind == "hier-pwd") return std::make_unique<HierPwdMethod>(label, c.gibbs, c.refit_every);
  if (c.kind == "window") {
    require(c.window >= 2, "window method: window must be at least 2");
    return std::make_unique<WindowMethod>(label, c.window);
  }
  if (c.kind == "state-space-lr") return std::make_unique<StateSpaceMethod>(label, c.refit_every);
  if (c.kind == "sep-pwd-bma") {
    require(c.bma_refresh >= 1, "sep-pwd-bma: refresh cadence must be at least 1");
    return std::make_unique<BmaMethod>(label, c.factors, c.bma_refresh);
  }
  throw ValidationError("unknown method '" + c.kind + "'");
}

// ---------------------------------------------------------------------------

Index BacktestReport::method_index(const std::string& name) const {
  for (std::size_t m = 0; m < methods.size(); ++m) {
    if (methods[m].name == name) return static_cast<Index>(m);
  }
  throw ValidationError("unknown method '" + name + "' in report");
}

BacktestReport run_backtest(const PanelData& panel, std::vector<std::unique_ptr<ForecastMethod>>& methods,
                            const BacktestConfig& config) {
  panel.validate();
  require(!methods.empty(), "backtest: no methods");
  const Index J = panel.J(), T = panel.T(), p = panel.p();
  require(J >= 1 && T >= 2, "backtest: panel too small");
  for (std::size_t a = 0; a < methods.size(); ++a) {
    for (std::size_t b = a + 1; b < methods.size(); ++b) {
      require(methods[a]->name() != methods[b]->name(), "backtest: duplicate method name '" + methods[a]->name() + "'");
    }
  }
  Index min_start = 1;
  for (const auto& m : methods) min_start = std::max(min_start, m->min_history(p));
  const Index start = config.start < 0 ? min_start : config.start;
  require(start >= min_start, "backtest: start row " + std::to_string(start) + " leaves too little history (need " +
                                  std::to_string(min_start) + ")");
  require(start < T, "backtest: start row beyond the panel");
  const Index N = T - start;

  BacktestReport report;
  report.dates.assign(panel.dates.begin() + start, panel.dates.end());
  for (const auto& g : panel.groups) report.groups.push_back(g.name);
  report.covariate_names = panel.covariate_names;
  report.benchmark = config.benchmark.empty() ? methods.front()->name() : config.benchmark;
  report.reference = config.reference;
  for (const auto& m : methods) {
    MethodTrack tr;
    tr.name = m->name();
    tr.prediction = Matrix::Constant(J, N, kNaN);
    tr.spe = Matrix::Constant(J, N, kNaN);
    report.methods.push_back(std::move(tr));
  }
  // Unknown benchmark or reference names throw here, before any fitting.
  (void)report.method_index(report.benchmark);
  if (!report.reference.empty()) (void)report.method_index(report.reference);

  Matrix x_next(J, p);
  for (Index n = 0; n < N; ++n) {
    const Index t = start + n;
    const PanelView history(panel, t);
    for (Index j = 0; j < J; ++j) x_next.row(j) = panel.groups[static_cast<std::size_t>(j)].X.row(t);
    for (std::size_t m = 0; m < methods.size(); ++m) {
      MethodTrack& tr = report.methods[m];
      const auto t0 = Clock::now();
      const StepOutput out = methods[m]->step(history, x_next);
      tr.seconds += seconds_since(t0);
      for (Index j = 0; j < J; ++j) {
        const std::string& why = out.failure[static_cast<std::size_t>(j)];
        const double pred = out.prediction[j];
        if (!why.empty() || !std::isfinite(pred)) {
          tr.failures.push_back(panel.groups[static_cast<std::size_t>(j)].name + "@" +
                                std::to_string(panel.dates[static_cast<std::size_t>(t)]) + ": " +
                                (why.empty() ? std::string("non-finite prediction") : why));
          continue;
        }
        tr.prediction(j, n) = pred;
        const double e = panel.groups[static_cast<std::size_t>(j)].y[t] - pred;
        tr.spe(j, n) = e * e;
      }
      if (out.alpha) {
        if (tr.alpha.size() == 0) tr.alpha = Matrix::Constant(J, N, kNaN);
        tr.alpha.col(n) = *out.alpha;
      }
      if (out.beta) {
        if (tr.beta.empty()) tr.beta.assign(static_cast<std::size_t>(p), Matrix::Constant(J, N, kNaN));
        for (Index k = 0; k < p; ++k) tr.beta[static_cast<std::size_t>(k)].col(n) = out.beta->col(k);
      }
      if (out.inclusion) {
        const Index F = out.inclusion->cols();
        if (tr.inclusion.empty()) tr.inclusion.assign(static_cast<std::size_t>(F), Matrix::Constant(J, N, kNaN));
        for (Index f = 0; f < F; ++f) tr.inclusion[static_cast<std::size_t>(f)].col(n) = out.inclusion->col(f);
      }
    }
  }
  for (std::size_t m = 0; m < methods.size(); ++m) report.methods[m].factor_names = methods[m]->factor_names();
  compute_aggregates(report);
  return report;
}

void compute_aggregates(BacktestReport& report) {
  const auto M = static_cast<Index>(report.methods.size());
  require(M > 0, "report has no methods");
  const Index J = report.methods[0].spe.rows(), N = report.methods[0].spe.cols();
  report.valid = Matrix::Ones(J, N);
  for (const auto& tr : report.methods) {
    for (Index j = 0; j < J; ++j) {
      for (Index n = 0; n < N; ++n) {
        if (!std::isfinite(tr.spe(j, n))) report.valid(j, n) = 0.0;
      }
    }
  }
  report.sspe = Matrix::Zero(M, N);
  for (Index m = 0; m < M; ++m) {
    const auto& spe = report.methods[static_cast<std::size_t>(m)].spe;
    double acc = 0.0;
    for (Index n = 0; n < N; ++n) {
      for (Index j = 0; j < J; ++j) {
        if (report.valid(j, n) != 0.0) acc += spe(j, n);
      }
      report.sspe(m, n) = acc;
    }
  }
  const Index bench = report.method_index(report.benchmark);
  report.delta_sspe = report.sspe.rowwise() - report.sspe.row(bench);

  // Per-group mean SPE over valid times; groups without valid cells are dropped everywhere.
  std::vector<Index> groups;
  for (Index j = 0; j < J; ++j) {
    if (report.valid.row(j).sum() > 0.0) groups.push_back(j);
  }
  std::vector<std::vector<double>> group_means(static_cast<std::size_t>(M));
  report.summary.assign(static_cast<std::size_t>(M), MethodSummary{});
  const double cells = report.valid.sum();
  for (Index m = 0; m < M; ++m) {
    const auto& tr = report.methods[static_cast<std::size_t>(m)];
    MethodSummary& s = report.summary[static_cast<std::size_t>(m)];
    s.name = tr.name;
    s.failures = tr.failures.size();
    s.total_sspe = N > 0 ? report.sspe(m, N - 1) : 0.0;
    s.mean_spe = cells > 0.0 ? s.total_sspe / cells : kNaN;
    for (Index j : groups) {
      double acc = 0.0;
      for (Index n = 0; n < N; ++n) {
        if (report.valid(j, n) != 0.0) acc += tr.spe(j, n);
      }
      group_means[static_cast<std::size_t>(m)].push_back(acc / report.valid.row(j).sum());
    }
    s.se = groups.size() >= 2 ? std_error(group_means[static_cast<std::size_t>(m)]) : kNaN;
  }
  if (report.reference.empty()) {
    Index best = 0;
    for (Index m = 1; m < M; ++m) {
      if (report.summary[static_cast<std::size_t>(m)].mean_spe < report.summary[static_cast<std::size_t>(best)].mean_spe) {
        best = m;
      }
    }
    report.reference = report.methods[static_cast<std::size_t>(best)].name;
  }
  const Index ref = report.method_index(report.reference);
  for (Index m = 0; m < M; ++m) {
    MethodSummary& s = report.summary[static_cast<std::size_t>(m)];
    if (m == ref || groups.size() < 2) {
      s.p_value = kNaN;
      s.t_stat = kNaN;
      continue;
    }
    try {
      const TTestResult r =
          paired_ttest(group_means[static_cast<std::size_t>(m)], group_means[static_cast<std::size_t>(ref)]);
      s.t_stat = r.t;
      s.p_value = r.p_value;
    } catch (const DegenerateError&) {
      s.t_stat = kNaN;
      s.p_value = kNaN;
    }
  }
}

std::vector<double> trajectory_extract(const BacktestReport& report, const std::string& method,
                                       TrajectoryQuantity quantity, Index group, Index component) {
  const auto& tr = report.methods[static_cast<std::size_t>(report.method_index(method))];
  require(group >= 0 && group < tr.prediction.rows(), "trajectory: group out of range");
  const Matrix* source = nullptr;
  switch (quantity) {
    case TrajectoryQuantity::AlphaStar:
      require(tr.alpha.size() > 0, "trajectory: alpha_star not recorded for '" + method + "'");
      source = &tr.alpha;
      break;
    case TrajectoryQuantity::Beta:
      require(!tr.beta.empty(), "trajectory: beta not recorded for '" + method + "'");
      require(component >= 0 && component < static_cast<Index>(tr.beta.size()), "trajectory: covariate out of range");
      source = &tr.beta[static_cast<std::size_t>(component)];
      break;
    case TrajectoryQuantity::Inclusion:
      require(!tr.inclusion.empty(), "trajectory: inclusion probabilities not recorded for '" + method + "'");
      require(component >= 0 && component < static_cast<Index>(tr.inclusion.size()), "trajectory: factor out of range");
      source = &tr.inclusion[static_cast<std::size_t>(component)];
      break;
  }
  const auto row = source->row(group);
  return {row.begin(), row.end()};
}

// ---------------------------------------------------------------------------

namespace {

using RepFn = std::function<void(std::size_t rep, std::vector<double>& errors, std::vector<double>& ms)>;

ExperimentSummary run_experiment(std::vector<std::string> methods, std::string reference, std::size_t reps,
                                 std::size_t threads, bool rmse_of_errors, const RepFn& fn) {
  const auto M = static_cast<Index>(methods.size());
  ExperimentSummary s;
  s.methods = std::move(methods);
  s.reference = std::move(reference);
  s.per_rep = Matrix::Constant(static_cast<Index>(reps), M, kNaN);
  Matrix ms = Matrix::Zero(static_cast<Index>(reps), M);
  parallel_for(reps, threads, [&](std::size_t r) {
    std::vector<double> err(static_cast<std::size_t>(M), kNaN), t(static_cast<std::size_t>(M), 0.0);
    fn(r, err, t);
    for (Index m = 0; m < M; ++m) {
      s.per_rep(static_cast<Index>(r), m) = err[static_cast<std::size_t>(m)];
      ms(static_cast<Index>(r), m) = t[static_cast<std::size_t>(m)];
    }
  });

  std::vector<std::vector<double>> cols(static_cast<std::size_t>(M));
  for (Index r = 0; r < s.per_rep.rows(); ++r) {
    if (!s.per_rep.row(r).allFinite()) {
      ++s.excluded;
      continue;
    }
    for (Index m = 0; m < M; ++m) {
      const double e = s.per_rep(r, m);
      cols[static_cast<std::size_t>(m)].push_back(rmse_of_errors ? e * e : e);
    }
  }
  const auto ref = static_cast<std::size_t>(
      std::find(s.methods.begin(), s.methods.end(), s.reference) - s.methods.begin());
  for (std::size_t m = 0; m < static_cast<std::size_t>(M); ++m) {
    const auto& c = cols[m];
    s.mean_ms.push_back(ms.col(static_cast<Index>(m)).mean());
    if (c.size() < 2) {
      s.rmse.push_back(kNaN);
      s.se.push_back(kNaN);
      s.p_value.push_back(kNaN);
      continue;
    }
    if (rmse_of_errors) {
      const double r = std::sqrt(mean(c));
      s.rmse.push_back(r);
      s.se.push_back(r > 0.0 ? std_error(c) / (2.0 * r) : 0.0);
    } else {
      s.rmse.push_back(mean(c));
      s.se.push_back(std_error(c));
    }
    if (m == ref) {
      s.p_value.push_back(kNaN);
    } else {
      try {
        s.p_value.push_back(paired_ttest(c, cols[ref]).p_value);
      } catch (const DegenerateError&) {
        s.p_value.push_back(kNaN);
      }
    }
  }
  return s;
}

// A failing method leaves its prediction NaN, which excludes the replication for every method.
template <typename F>
double timed_ms(F&& f) {
  const auto t0 = Clock::now();
  try {
    f();
  } catch (const DegenerateError&) {
  } catch (const ComputationError&) {
  }
  return 1000.0 * seconds_since(t0);
}

}  // namespace

ExperimentSummary run_stationary_experiment(const StationaryMeanConfig& config, std::size_t threads) {
  config.validate();
  require(config.T >= 11, "stationary experiment needs T >= 11");
  require(config.replications >= 2, "stationary experiment needs at least two replications");
  return run_experiment(
      {"Stationary", "PWD", "EWMA", "State-Space"}, "PWD", config.replications, threads, true,
      [&](std::size_t r, std::vector<double>& err, std::vector<double>& ms) {
        const auto y = gen_stationary_replication(config, r);
        const std::span<const double> train(y.data(), y.size() - 1);
        double pred[4] = {kNaN, kNaN, kNaN, kNaN};
        ms[0] = timed_ms([&] { pred[0] = mean(train); });
        ms[1] = timed_ms([&] { pred[1] = predictive(train, estimate_alpha(train).alpha_star).loc; });
        ms[2] = timed_ms([&] { pred[2] = ewma_fit(train).forecast; });
        ms[3] = timed_ms([&] { pred[3] = local_level_filter(train).forecast; });
        for (int m = 0; m < 4; ++m) err[static_cast<std::size_t>(m)] = std::abs(pred[m] - config.beta);
      });
}

ExperimentSummary run_capm_experiment(const HierCapmConfig& config, std::size_t replications, const GibbsConfig& gibbs,
                                      std::size_t threads) {
  config.validate();
  gibbs.validate();
  require(config.T >= 5, "capm experiment needs T >= 5");
  require(replications >= 2, "capm experiment needs at least two replications");
  return run_experiment(
      {"Hier-PWD", "Sep-PWD", "State-Space-LR", "Stationary", "Stat-Hier"}, "Hier-PWD", replications, threads, false,
      [&](std::size_t r, std::vector<double>& err, std::vector<double>& ms) {
        const CapmPanel data = gen_hier_capm(config, r);
        const Index J = config.J, T = config.T, p = data.panel.p();
        const PanelView train(data.panel, T - 1);
        Matrix x_next(J, p);
        Vector target(J);
        for (Index j = 0; j < J; ++j) {
          x_next.row(j) = data.panel.groups[static_cast<std::size_t>(j)].X.row(T - 1);
          target[j] = data.beta(j, T - 1) * data.market[T - 1];
        }
        GibbsConfig g = gibbs;
        g.seed = derived_seed(gibbs.seed ^ config.seed, r);
        std::vector<Vector> preds(5, Vector::Constant(J, kNaN));

        ms[0] = timed_ms([&] {
          const auto est = estimate_alphas_plugin(train, {}, g, true);
          std::vector<double> alphas;
          for (const auto& e : est.groups) alphas.push_back(e.alpha_star);
          const TerminalFit fit = fit_predict_terminal(train, alphas, g, x_next);
          for (Index j = 0; j < J; ++j) preds[0][j] = fit.groups[static_cast<std::size_t>(j)].pred_mean;
        });
        ms[1] = timed_ms([&] {
          const auto est = estimate_alphas_plugin(train, {}, g, false);
          for (Index j = 0; j < J; ++j) preds[1][j] = x_next.row(j).dot(est.fits[static_cast<std::size_t>(j)].beta);
        });
        ms[2] = timed_ms([&] {
          for (Index j = 0; j < J; ++j) {
            preds[2][j] = state_space_lr_fit(train.X(j), train.y(j)).predict(x_next.row(j).transpose());
          }
        });
        ms[3] = timed_ms([&] {
          for (Index j = 0; j < J; ++j) preds[3][j] = stationary_ols(train.X(j), train.y(j)).predict(x_next.row(j).transpose());
        });
        ms[4] = timed_ms([&] {
          const TerminalFit fit =
              fit_predict_terminal(train, std::vector<double>(static_cast<std::size_t>(J), 1.0), g, x_next);
          for (Index j = 0; j < J; ++j) preds[4][j] = fit.groups[static_cast<std::size_t>(j)].pred_mean;
        });
        for (std::size_t m = 0; m < 5; ++m) err[m] = std::sqrt((preds[m] - target).squaredNorm() / static_cast<double>(J));
      });
}

}  // namespace pwdts
