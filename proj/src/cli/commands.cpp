#include "pwdts/cli.hpp"

#include "pwdts/baselines.hpp"
#include "pwdts/bma.hpp"
#include "pwdts/hier_pwd.hpp"
#include "pwdts/synthetic.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace pwdts::cli {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

std::string fmt(double v) {
  if (std::isnan(v)) return "NaN";
  if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// JSON has no NaN; non-finite numbers become null.
json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Provenance {
  std::string command;
  std::string config_hash;
  std::uint64_t seed = 0;

  [[nodiscard]] std::string csv_header() const {
    return "# pwdts " + std::string(kVersion) + " command=" + command + " config_hash=" + config_hash +
           " seed=" + std::to_string(seed) + "\n";
  }
  [[nodiscard]] json to_json() const {
    return {{"version", kVersion}, {"command", command}, {"config_hash", config_hash}, {"seed", seed}};
  }
};

class Output {
 public:
  Output(const RunConfig& cfg, std::string command)
      : dir_(cfg.output_dir), formats_(cfg.formats) {
    prov_.command = std::move(command);
    // The output location does not affect results, so it stays out of the hash.
    RunConfig hashed = cfg;
    hashed.output_dir.clear();
    prov_.config_hash = fnv1a_hex(cli::to_json(hashed));
    prov_.seed = cfg.seed;
    std::error_code ec;
    fs::create_directories(dir_, ec);
    require(!ec && fs::is_directory(dir_), "cannot create output directory '" + dir_ + "'");
  }

  [[nodiscard]] bool csv() const { return has("csv"); }
  [[nodiscard]] bool json_out() const { return has("json"); }
  [[nodiscard]] const Provenance& provenance() const { return prov_; }

  void write_csv(const std::string& name, const std::string& body) {
    if (csv()) write(name, prov_.csv_header() + body);
  }
  void write_json(const std::string& name, json body) {
    if (!json_out()) return;
    body["provenance"] = prov_.to_json();
    write(name, body.dump(2) + "\n");
  }
  // Wall-clock numbers vary run to run, so they live apart from the reproducible files.
  void write_timing(const json& body) {
    json t = body;
    t["provenance"] = prov_.to_json();
    write("timing.json", t.dump(2) + "\n");
  }
  [[nodiscard]] const std::vector<std::string>& written() const { return written_; }

 private:
  [[nodiscard]] bool has(const std::string& f) const {
    return std::find(formats_.begin(), formats_.end(), f) != formats_.end();
  }
  void write(const std::string& name, const std::string& text) {
    const fs::path path = fs::path(dir_) / name;
    std::ofstream out(path, std::ios::binary);
    require(out.good(), "cannot write '" + path.string() + "'");
    out << text;
    written_.push_back(path.string());
  }

  std::string dir_;
  std::vector<std::string> formats_;
  Provenance prov_;
  std::vector<std::string> written_;
};

void report_written(const Output& o, std::ostream& out) {
  for (const auto& w : o.written()) out << "wrote " << w << "\n";
}

// Options shared by the subcommands. Flags given on the command line override --config.
struct Flags {
  std::string config;
  std::string data;
  std::vector<std::string> portfolios;
  std::vector<std::string> factors;
  bool no_intercept = false;
  bool subtract_rf = false;
  double scale = 1.0;
  int date_from = 0;
  int date_to = 0;
  std::uint64_t seed = 1;
  std::string output_dir = ".";
  std::vector<std::string> formats;
  int gibbs_iterations = 500;
  int gibbs_burn_in = 100;
  std::size_t threads = 1;

  std::string setting = "stationary";
  std::size_t reps = 100;
  Index J = 0;
  Index T = 0;
  std::string dump_panel;

  std::string method = "hier-pwd";
  std::vector<std::string> methods;
  std::string benchmark;
  std::string reference;
  Index start = -1;
  int refit_every = 1;
  Index window = 60;
  std::vector<std::string> bma_factors;
  std::size_t bma_refresh = 12;

  std::string report_dir;
};

struct Opts {
  std::vector<std::pair<CLI::Option*, std::function<void(RunConfig&)>>> overrides;

  template <typename T>
  CLI::Option* add(CLI::App* app, const std::string& name, T& var, const std::string& help,
                   std::function<void(RunConfig&)> apply) {
    CLI::Option* o = app->add_option(name, var, help);
    overrides.emplace_back(o, std::move(apply));
    return o;
  }
  CLI::Option* flag(CLI::App* app, const std::string& name, bool& var, const std::string& help,
                    std::function<void(RunConfig&)> apply) {
    CLI::Option* o = app->add_flag(name, var, help);
    overrides.emplace_back(o, std::move(apply));
    return o;
  }
};

void add_common(CLI::App* app, Flags& f, Opts& o) {
  app->add_option("--config", f.config, "JSON run configuration");
  o.add(app, "--seed", f.seed, "random seed", [&f](RunConfig& c) { c.seed = f.seed; });
  o.add(app, "-o,--output-dir", f.output_dir, "output directory", [&f](RunConfig& c) { c.output_dir = f.output_dir; });
  o.add(app, "--format", f.formats, "output formats (csv,json)", [&f](RunConfig& c) { c.formats = f.formats; })
      ->delimiter(',');
  o.add(app, "--gibbs-iterations", f.gibbs_iterations, "Gibbs sweeps",
        [&f](RunConfig& c) { c.gibbs.iterations = f.gibbs_iterations; });
  o.add(app, "--gibbs-burn-in", f.gibbs_burn_in, "Gibbs burn-in sweeps",
        [&f](RunConfig& c) { c.gibbs.burn_in = f.gibbs_burn_in; });
  o.add(app, "--threads", f.threads, "worker threads (0 = all cores)",
        [&f](RunConfig& c) { c.simulate.threads = f.threads; });
}

void add_data(CLI::App* app, Flags& f, Opts& o) {
  o.add(app, "--data", f.data, "panel CSV (relative paths also searched under $PWDTS_DATA_DIR)",
        [&f](RunConfig& c) { c.data = f.data; });
  o.add(app, "--portfolios", f.portfolios, "portfolio columns", [&f](RunConfig& c) { c.ingest.portfolios = f.portfolios; })
      ->delimiter(',');
  o.add(app, "--factors", f.factors, "regression factors", [&f](RunConfig& c) { c.ingest.factors = f.factors; })
      ->delimiter(',');
  o.flag(app, "--no-intercept", f.no_intercept, "omit the intercept column",
         [&f](RunConfig& c) { c.ingest.intercept = !f.no_intercept; });
  o.flag(app, "--subtract-rf", f.subtract_rf, "use excess returns (subtract the RF column)",
         [&f](RunConfig& c) { c.ingest.subtract_rf = f.subtract_rf; });
  o.add(app, "--scale", f.scale, "multiply returns and factors (0.01 converts percent)",
        [&f](RunConfig& c) { c.ingest.scale = f.scale; });
  o.add(app, "--from", f.date_from, "first date YYYYMM", [&f](RunConfig& c) { c.ingest.date_from = f.date_from; });
  o.add(app, "--to", f.date_to, "last date YYYYMM", [&f](RunConfig& c) { c.ingest.date_to = f.date_to; });
}

RunConfig effective_config(const Flags& f, const Opts& o) {
  RunConfig c = f.config.empty() ? RunConfig{} : parse_run_config(read_file(f.config));
  for (const auto& [opt, apply] : o.overrides) {
    if (opt->count() > 0) apply(c);
  }
  c.validate();
  return c;
}

PanelData load_panel(const RunConfig& c) {
  require(!c.data.empty(), "no data file (use --data or 'data' in the config)");
  return ingest_panel_csv(c.data, c.ingest);
}

// "window-36" is shorthand for kind "window" with length 36.
MethodConfig method_from_token(const std::string& token, const RunConfig& c) {
  MethodConfig m;
  m.kind = token;
  if (token.rfind("window-", 0) == 0) {
    m.kind = "window";
    try {
      m.window = std::stol(token.substr(7));
    } catch (const std::exception&) {
      throw ValidationError("bad window length in '" + token + "'");
    }
  }
  const auto& kinds = method_kinds();
  require(std::find(kinds.begin(), kinds.end(), m.kind) != kinds.end(), "unknown method '" + token + "'");
  m.factors = c.bma_factors;
  m.bma_refresh = c.bma_refresh;
  return m;
}

GibbsConfig gibbs_for(const RunConfig& c) {
  GibbsConfig g = c.gibbs;
  if (g.seed == 0) g.seed = c.seed;
  return g;
}

// ---------------------------------------------------------------------------

int cmd_simulate(const RunConfig& c, std::ostream& out) {
  Output o(c, "simulate");
  const auto& s = c.simulate;
  ExperimentSummary summary;
  PanelData dump;
  json settings;
  if (s.setting == "stationary") {
    StationaryMeanConfig sc;
    sc.replications = s.reps;
    sc.seed = c.seed;
    if (s.T) sc.T = static_cast<std::size_t>(*s.T);
    summary = run_stationary_experiment(sc, s.threads);
    settings = {{"T", sc.T}, {"beta", sc.beta}, {"sigma2", sc.sigma2}};
    if (!s.dump_panel.empty()) {
      const auto y = gen_stationary_replication(sc, 0);
      Group g;
      g.name = "Y";
      g.X = Matrix::Ones(static_cast<Index>(y.size()), 1);
      g.y = Eigen::Map<const Vector>(y.data(), static_cast<Index>(y.size()));
      dump.groups.push_back(std::move(g));
      dump.covariate_names = {"const"};
      for (Index t = 0; t < static_cast<Index>(y.size()); ++t) {
        dump.dates.push_back(static_cast<int>(1900 + t / 12) * 100 + static_cast<int>(t % 12) + 1);
      }
    }
  } else {
    HierCapmConfig hc = s.setting == "setting1" ? HierCapmConfig::setting1() : HierCapmConfig::setting2();
    hc.seed = c.seed;
    if (s.J) hc.J = *s.J;
    if (s.T) hc.T = *s.T;
    summary = run_capm_experiment(hc, s.reps, gibbs_for(c), s.threads);
    settings = {{"J", hc.J}, {"T", hc.T}, {"sigma", hc.sigma}, {"tau", hc.tau}};
    if (!s.dump_panel.empty()) dump = gen_hier_capm(hc, 0).panel;
  }

  std::ostringstream csv;
  csv << "method,rmse,se,p_value\n";
  json methods = json::array();
  json timing = json::object();
  for (std::size_t m = 0; m < summary.methods.size(); ++m) {
    csv << summary.methods[m] << ',' << fmt(summary.rmse[m]) << ',' << fmt(summary.se[m]) << ','
        << fmt(summary.p_value[m]) << '\n';
    methods.push_back({{"name", summary.methods[m]},
                       {"rmse", num(summary.rmse[m])},
                       {"se", num(summary.se[m])},
                       {"p_value", num(summary.p_value[m])}});
    timing[summary.methods[m]] = {{"mean_ms_per_replication", num(summary.mean_ms[m])}};
  }
  o.write_csv("simulate_summary.csv", csv.str());
  o.write_json("simulate_summary.json", {{"setting", s.setting},
                                         {"replications", s.reps},
                                         {"excluded", summary.excluded},
                                         {"reference", summary.reference},
                                         {"parameters", settings},
                                         {"methods", methods}});
  o.write_timing({{"simulate", timing}});
  if (!s.dump_panel.empty()) {
    std::ofstream f(s.dump_panel, std::ios::binary);
    require(f.good(), "cannot write '" + s.dump_panel + "'");
    write_panel_csv(f, dump);
    out << "wrote " << s.dump_panel << "\n";
  }

  out << "setting " << s.setting << ", " << s.reps << " replications (" << summary.excluded << " excluded)\n";
  for (std::size_t m = 0; m < summary.methods.size(); ++m) {
    char line[160];
    std::snprintf(line, sizeof line, "  %-16s RMSE %.5f  SE %.5f  p %s\n", summary.methods[m].c_str(), summary.rmse[m],
                  summary.se[m], fmt(summary.p_value[m]).c_str());
    out << line;
  }
  report_written(o, out);
  return 0;
}

int cmd_fit(const RunConfig& c, const std::string& method, std::ostream& out) {
  require(method == "hier-pwd" || method == "sep-pwd" || method == "stationary" || method == "stationary-hier",
          "fit: method must be hier-pwd, sep-pwd, stationary or stationary-hier");
  const PanelData panel = load_panel(c);
  Output o(c, "fit");
  const Index J = panel.J(), p = panel.p();
  const auto t0 = std::chrono::steady_clock::now();

  std::vector<double> alphas(static_cast<std::size_t>(J), 1.0);
  Matrix beta(J, p), beta_sd(J, p);
  Vector sigma2(J);
  json extra = json::object();
  if (method == "hier-pwd" || method == "sep-pwd") {
    const bool hier = method == "hier-pwd";
    const auto est = estimate_alphas_plugin(panel, {}, gibbs_for(c), hier);
    for (Index j = 0; j < J; ++j) alphas[static_cast<std::size_t>(j)] = est.groups[static_cast<std::size_t>(j)].alpha_star;
    extra["alpha_iterations"] = est.iterations;
    extra["alpha_converged"] = est.converged;
    if (!hier) {
      for (Index j = 0; j < J; ++j) {
        const PluginFit& fj = est.fits[static_cast<std::size_t>(j)];
        beta.row(j) = fj.beta.transpose();
        beta_sd.row(j) = fj.V.diagonal().cwiseSqrt().transpose();
        sigma2[j] = fj.sigma2;
      }
    }
  }
  if (method == "stationary") {
    for (Index j = 0; j < J; ++j) {
      const OlsFit f = stationary_ols(panel.groups[static_cast<std::size_t>(j)].X, panel.groups[static_cast<std::size_t>(j)].y);
      beta.row(j) = f.beta.transpose();
      beta_sd.row(j) = f.cov.diagonal().cwiseSqrt().transpose();
      sigma2[j] = f.sigma2;
    }
  }
  if (method == "hier-pwd" || method == "stationary-hier") {
    const TerminalFit tf = fit_predict_terminal(panel, alphas, gibbs_for(c));
    for (Index j = 0; j < J; ++j) {
      const auto& g = tf.groups[static_cast<std::size_t>(j)];
      beta.row(j) = g.beta_mean.transpose();
      beta_sd.row(j) = g.beta_sd.transpose();
      sigma2[j] = g.sigma2_mean;
    }
    json global = json::array();
    for (Index k = 0; k < p; ++k) {
      global.push_back({{"covariate", panel.covariate_names[static_cast<std::size_t>(k)]},
                        {"beta0_mean", num(tf.beta0_mean[k])},
                        {"beta0_sd", num(tf.beta0_sd[k])},
                        {"tau2_mean", num(tf.tau2_mean.size() > k ? tf.tau2_mean[k] : NAN)}});
    }
    extra["global"] = global;
    extra["pooled"] = tf.pooled;
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  std::ostringstream csv;
  csv << "group,alpha_star,sigma2";
  for (const auto& n : panel.covariate_names) csv << ",beta_" << n << ",sd_" << n;
  csv << '\n';
  json groups = json::array();
  for (Index j = 0; j < J; ++j) {
    const auto& name = panel.groups[static_cast<std::size_t>(j)].name;
    csv << name << ',' << fmt(alphas[static_cast<std::size_t>(j)]) << ',' << fmt(sigma2[j]);
    json coef = json::object();
    for (Index k = 0; k < p; ++k) {
      csv << ',' << fmt(beta(j, k)) << ',' << fmt(beta_sd(j, k));
      coef[panel.covariate_names[static_cast<std::size_t>(k)]] = {{"mean", num(beta(j, k))}, {"sd", num(beta_sd(j, k))}};
    }
    csv << '\n';
    groups.push_back({{"group", name},
                      {"alpha_star", alphas[static_cast<std::size_t>(j)]},
                      {"sigma2", num(sigma2[j])},
                      {"coefficients", coef}});
  }
  o.write_csv("fit_coefficients.csv", csv.str());
  json body = {{"method", method},
               {"data", c.data},
               {"J", J},
               {"T", panel.T()},
               {"first_date", panel.dates.front()},
               {"last_date", panel.dates.back()},
               {"covariates", panel.covariate_names},
               {"groups", groups}};
  body.update(extra);
  o.write_json("fit_summary.json", body);
  o.write_timing({{"fit", {{method, {{"seconds", seconds}}}}}});
  out << "fit " << method << ": J=" << J << " T=" << panel.T() << " p=" << p << "\n";
  report_written(o, out);
  return 0;
}

int cmd_backtest(const RunConfig& c, std::ostream& out) {
  const PanelData panel = load_panel(c);
  Output o(c, "backtest");
  require(!c.methods.empty(), "backtest: no methods (use --methods or 'methods' in the config)");
  std::vector<std::unique_ptr<ForecastMethod>> methods;
  for (MethodConfig m : c.methods) {
    m.gibbs = gibbs_for(c);
    if (m.factors.empty()) m.factors = c.bma_factors;
    methods.push_back(make_method(m));
  }
  BacktestConfig bc;
  bc.start = c.start;
  bc.benchmark = c.benchmark;
  bc.reference = c.reference;
  const BacktestReport r = run_backtest(panel, methods, bc);
  const Index M = static_cast<Index>(r.methods.size());
  const Index N = static_cast<Index>(r.dates.size());
  const Index J = static_cast<Index>(r.groups.size());

  std::ostringstream sspe;
  sspe << "date";
  for (const auto& m : r.methods) sspe << ",sspe_" << m.name;
  for (const auto& m : r.methods) sspe << ",delta_sspe_" << m.name;
  sspe << '\n';
  for (Index t = 0; t < N; ++t) {
    sspe << r.dates[static_cast<std::size_t>(t)];
    for (Index m = 0; m < M; ++m) sspe << ',' << fmt(r.sspe(m, t));
    for (Index m = 0; m < M; ++m) sspe << ',' << fmt(r.delta_sspe(m, t));
    sspe << '\n';
  }
  o.write_csv("backtest_sspe.csv", sspe.str());

  std::ostringstream pred;
  pred << "date,group,valid";
  for (const auto& m : r.methods) pred << ",pred_" << m.name << ",spe_" << m.name;
  pred << '\n';
  for (Index t = 0; t < N; ++t) {
    for (Index j = 0; j < J; ++j) {
      pred << r.dates[static_cast<std::size_t>(t)] << ',' << r.groups[static_cast<std::size_t>(j)] << ','
           << static_cast<int>(r.valid(j, t));
      for (const auto& m : r.methods) pred << ',' << fmt(m.prediction(j, t)) << ',' << fmt(m.spe(j, t));
      pred << '\n';
    }
  }
  o.write_csv("backtest_predictions.csv", pred.str());

  // Per-method trajectories (alpha*, coefficients, inclusion) where recorded.
  for (const auto& m : r.methods) {
    const bool has_alpha = m.alpha.size() > 0;
    if (!has_alpha && m.beta.empty() && m.inclusion.empty()) continue;
    std::ostringstream tr;
    tr << "date,group";
    if (has_alpha) tr << ",alpha_star";
    for (std::size_t k = 0; k < m.beta.size(); ++k) tr << ",beta_" << r.covariate_names[k];
    for (std::size_t f = 0; f < m.inclusion.size(); ++f) tr << ",inclusion_" << m.factor_names[f];
    tr << '\n';
    for (Index t = 0; t < N; ++t) {
      for (Index j = 0; j < J; ++j) {
        tr << r.dates[static_cast<std::size_t>(t)] << ',' << r.groups[static_cast<std::size_t>(j)];
        if (has_alpha) tr << ',' << fmt(m.alpha(j, t));
        for (const auto& b : m.beta) tr << ',' << fmt(b(j, t));
        for (const auto& q : m.inclusion) tr << ',' << fmt(q(j, t));
        tr << '\n';
      }
    }
    o.write_csv("backtest_trajectory_" + m.name + ".csv", tr.str());
  }

  json summary = json::array();
  json timing = json::object();
  for (Index m = 0; m < M; ++m) {
    const auto& s = r.summary[static_cast<std::size_t>(m)];
    summary.push_back({{"name", s.name},
                       {"total_sspe", num(s.total_sspe)},
                       {"delta_sspe", num(N > 0 ? r.delta_sspe(m, N - 1) : 0.0)},
                       {"mean_spe", num(s.mean_spe)},
                       {"se", num(s.se)},
                       {"t_stat", num(s.t_stat)},
                       {"p_value", num(s.p_value)},
                       {"failures", s.failures}});
    timing[s.name] = {{"seconds", r.methods[static_cast<std::size_t>(m)].seconds}};
  }
  const Index valid = static_cast<Index>(r.valid.sum());
  o.write_json("backtest_summary.json", {{"data", c.data},
                                         {"groups", r.groups},
                                         {"covariates", r.covariate_names},
                                         {"first_target_date", N > 0 ? json(r.dates.front()) : json(nullptr)},
                                         {"last_target_date", N > 0 ? json(r.dates.back()) : json(nullptr)},
                                         {"target_dates", N},
                                         {"valid_cells", valid},
                                         {"benchmark", r.benchmark},
                                         {"reference", r.reference},
                                         {"methods", summary}});
  o.write_timing({{"backtest", timing}});

  out << "backtest: J=" << J << ", " << N << " target dates, benchmark " << r.benchmark << ", reference "
      << r.reference << "\n";
  for (Index m = 0; m < M; ++m) {
    const auto& s = r.summary[static_cast<std::size_t>(m)];
    char line[200];
    std::snprintf(line, sizeof line, "  %-16s SSPE %.6g  dSSPE %.6g  mean SPE %.6g  p %s  failures %zu\n",
                  s.name.c_str(), s.total_sspe, N > 0 ? r.delta_sspe(m, N - 1) : 0.0, s.mean_spe,
                  fmt(s.p_value).c_str(), s.failures);
    out << line;
  }
  report_written(o, out);
  return 0;
}

int cmd_bma(const RunConfig& c, std::ostream& out, std::ostream& err) {
  RunConfig cc = c;
  // Candidate factors must be columns of the panel.
  if (cc.ingest.factors.empty() && !cc.bma_factors.empty()) cc.ingest.factors = cc.bma_factors;
  const PanelData panel = load_panel(cc);
  Output o(c, "bma");
  const std::vector<std::string> requested =
      c.bma_factors.empty() ? std::vector<std::string>{"MKT", "SMB", "HML", "MOM"} : c.bma_factors;
  std::vector<std::string> canon;
  for (const auto& f : requested) {
    const std::string k = canonical_factor(f);
    canon.push_back(k.empty() ? f : k);
  }
  std::vector<std::string> dropped;
  const BmaDesign design = make_design(panel.covariate_names, canon, true, &dropped);
  for (const auto& d : dropped) err << "warning: factor '" << d << "' not in the panel, dropped\n";
  require(!design.factor_names.empty(), "bma: none of the requested factors is in the panel");
  const auto models = enumerate_models(design.factor_names);
  const Index J = panel.J(), T = panel.T();
  const std::size_t K = models.size(), F = design.factor_names.size();

  // Row t of each table holds weights computed from data through date t.
  std::vector<std::vector<std::vector<double>>> prob(static_cast<std::size_t>(J));
  std::vector<Matrix> incl(static_cast<std::size_t>(J));
  const auto t0 = std::chrono::steady_clock::now();
  parallel_for(static_cast<std::size_t>(J), c.simulate.threads, [&](std::size_t j) {
    RollingBma rb(design, models, {}, c.bma_refresh);
    const Group& g = panel.groups[j];
    prob[j].resize(static_cast<std::size_t>(T));
    incl[j].resize(T, static_cast<Index>(F));
    for (Index t = 0; t < T; ++t) {
      rb.observe(g.X.row(t).transpose(), g.y[t]);
      prob[j][static_cast<std::size_t>(t)] = rb.probabilities();
      incl[j].row(t) = rb.inclusion().transpose();
    }
  });
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  std::ostringstream pc, ic;
  pc << "date,group";
  for (const auto& m : models) pc << ',' << m.label(design.factor_names);
  pc << '\n';
  ic << "date,group";
  for (const auto& f : design.factor_names) ic << ',' << f;
  ic << '\n';
  for (Index t = 0; t < T; ++t) {
    for (Index j = 0; j < J; ++j) {
      const auto& name = panel.groups[static_cast<std::size_t>(j)].name;
      const int date = panel.dates[static_cast<std::size_t>(t)];
      pc << date << ',' << name;
      for (double v : prob[static_cast<std::size_t>(j)][static_cast<std::size_t>(t)]) pc << ',' << fmt(v);
      pc << '\n';
      ic << date << ',' << name;
      for (std::size_t f = 0; f < F; ++f) ic << ',' << fmt(incl[static_cast<std::size_t>(j)](t, static_cast<Index>(f)));
      ic << '\n';
    }
  }
  o.write_csv("bma_model_probabilities.csv", pc.str());
  o.write_csv("bma_inclusion.csv", ic.str());

  json terminal = json::array();
  for (Index j = 0; j < J; ++j) {
    json inc = json::object();
    for (std::size_t f = 0; f < F; ++f) inc[design.factor_names[f]] = num(incl[static_cast<std::size_t>(j)](T - 1, static_cast<Index>(f)));
    const auto& pr = prob[static_cast<std::size_t>(j)].back();
    const auto best = static_cast<std::size_t>(std::max_element(pr.begin(), pr.end()) - pr.begin());
    terminal.push_back({{"group", panel.groups[static_cast<std::size_t>(j)].name},
                        {"inclusion", inc},
                        {"top_model", models[best].label(design.factor_names)},
                        {"top_probability", pr[best]}});
  }
  json mean_incl = json::object();
  for (std::size_t f = 0; f < F; ++f) {
    double s = 0.0;
    for (Index j = 0; j < J; ++j) s += incl[static_cast<std::size_t>(j)](T - 1, static_cast<Index>(f));
    mean_incl[design.factor_names[f]] = s / static_cast<double>(J);
  }
  o.write_json("bma_summary.json", {{"data", c.data},
                                    {"factors", design.factor_names},
                                    {"dropped_factors", dropped},
                                    {"models", K},
                                    {"refresh", c.bma_refresh},
                                    {"mean_terminal_inclusion", mean_incl},
                                    {"groups", terminal}});
  o.write_timing({{"bma", {{"seconds", seconds}}}});
  out << "bma: " << F << " factors, " << K << " models, J=" << J << " T=" << T << "\n";
  for (const auto& [name, v] : mean_incl.items()) out << "  mean terminal inclusion " << name << " " << v.get<double>() << "\n";
  report_written(o, out);
  return 0;
}

int cmd_report(const RunConfig& c, const std::string& dir_flag, std::ostream& out) {
  const std::string dir = dir_flag.empty() ? c.output_dir : dir_flag;
  require(fs::is_directory(dir), "report: '" + dir + "' is not a directory");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const auto name = e.path().filename().string();
    if (name == "report.json" || name == "timing.json") continue;
    const auto ext = e.path().extension().string();
    if (ext == ".json" || ext == ".csv") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  json index = json::object();
  json tables = json::array();
  for (const auto& f : files) {
    const std::string text = read_file(f.string());
    const std::string name = f.filename().string();
    if (f.extension() == ".json") {
      json parsed;
      try {
        parsed = json::parse(text);
      } catch (const json::parse_error&) {
        throw ValidationError("report: '" + name + "' is not valid JSON");
      }
      index[f.stem().string()] = parsed;
    } else {
      std::size_t rows = 0;
      std::string header;
      std::istringstream ss(text);
      std::string line;
      while (std::getline(ss, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (header.empty()) {
          header = line;
        } else {
          ++rows;
        }
      }
      tables.push_back({{"file", name}, {"columns", header}, {"rows", rows}, {"fnv1a", fnv1a_hex(text)}});
    }
  }
  RunConfig rc = c;
  rc.output_dir = dir;
  Output o(rc, "report");
  json body = {{"summaries", index}, {"tables", tables}};
  body["provenance"] = o.provenance().to_json();
  const fs::path path = fs::path(dir) / "report.json";
  std::ofstream f(path, std::ios::binary);
  require(f.good(), "cannot write '" + path.string() + "'");
  f << body.dump(2) << "\n";
  out << "report: " << index.size() << " summaries, " << tables.size() << " tables\nwrote " << path.string() << "\n";
  return 0;
}

void write_error(std::ostream& err, const std::string& type, const std::string& message) {
  err << json{{"error", {{"type", type}, {"message", message}}}}.dump() << "\n";
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Power-weighted density forecasting: simulation, fitting, backtests and model averaging", "pwdts"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));
  Flags f;
  Opts o;

  CLI::App* sim = app.add_subcommand("simulate", "simulation experiments (terminal-point RMSE tables)");
  add_common(sim, f, o);
  o.add(sim, "--setting", f.setting, "stationary, setting1 or setting2",
        [&f](RunConfig& c) { c.simulate.setting = f.setting; });
  o.add(sim, "--reps", f.reps, "replications", [&f](RunConfig& c) { c.simulate.reps = f.reps; });
  o.add(sim, "--J", f.J, "groups (CAPM settings)", [&f](RunConfig& c) { c.simulate.J = f.J; });
  o.add(sim, "--T", f.T, "series length", [&f](RunConfig& c) { c.simulate.T = f.T; });
  o.add(sim, "--dump-panel", f.dump_panel, "write replication 0 as a panel CSV",
        [&f](RunConfig& c) { c.simulate.dump_panel = f.dump_panel; });

  CLI::App* fit = app.add_subcommand("fit", "terminal coefficient posterior and alpha* per group");
  add_common(fit, f, o);
  add_data(fit, f, o);
  fit->add_option("--method", f.method, "hier-pwd, sep-pwd, stationary or stationary-hier");

  CLI::App* bt = app.add_subcommand("backtest", "rolling one-step-ahead evaluation");
  add_common(bt, f, o);
  add_data(bt, f, o);
  o.add(bt, "--methods", f.methods, "methods (kinds; window-N for a window of N rows)", [&f](RunConfig& c) {
     c.methods.clear();
     for (const auto& t : f.methods) c.methods.push_back(method_from_token(t, c));
   })->delimiter(',');
  o.add(bt, "--benchmark", f.benchmark, "benchmark method for delta SSPE",
        [&f](RunConfig& c) { c.benchmark = f.benchmark; });
  o.add(bt, "--reference", f.reference, "reference method for p-values",
        [&f](RunConfig& c) { c.reference = f.reference; });
  o.add(bt, "--start", f.start, "first target row (-1 = earliest common)", [&f](RunConfig& c) { c.start = f.start; });
  o.add(bt, "--refit-every", f.refit_every, "refit cadence for the expensive methods", [&f](RunConfig& c) {
    for (auto& m : c.methods) m.refit_every = f.refit_every;
  });
  o.add(bt, "--window", f.window, "window length for 'window'", [&f](RunConfig& c) {
    for (auto& m : c.methods) {
      if (m.kind == "window") m.window = f.window;
    }
  });
  o.add(bt, "--bma-factors", f.bma_factors, "candidate factors for sep-pwd-bma", [&f](RunConfig& c) {
     c.bma_factors = f.bma_factors;
     for (auto& m : c.methods) m.factors = f.bma_factors;
   })->delimiter(',');

  CLI::App* bma = app.add_subcommand("bma", "model probability and inclusion trajectories");
  add_common(bma, f, o);
  add_data(bma, f, o);
  o.add(bma, "--bma-factors", f.bma_factors, "candidate factors (default MKT,SMB,HML,MOM)",
        [&f](RunConfig& c) { c.bma_factors = f.bma_factors; })
      ->delimiter(',');
  o.add(bma, "--refresh", f.bma_refresh, "re-optimize alpha* every k rows",
        [&f](RunConfig& c) { c.bma_refresh = f.bma_refresh; });

  CLI::App* rep = app.add_subcommand("report", "merge run outputs into report.json");
  add_common(rep, f, o);
  rep->add_option("--dir", f.report_dir, "directory holding the outputs (default --output-dir)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    write_error(err, "usage", e.what());
    return 1;
  }

  try {
    RunConfig c = effective_config(f, o);
    if (sim->parsed()) return cmd_simulate(c, out);
    if (fit->parsed()) return cmd_fit(c, f.method, out);
    if (bt->parsed()) return cmd_backtest(c, out);
    if (bma->parsed()) return cmd_bma(c, out, err);
    return cmd_report(c, f.report_dir, out);
  } catch (const ValidationError& e) {
    write_error(err, "validation", e.what());
    return 1;
  } catch (const DegenerateError& e) {
    write_error(err, "degenerate", e.what());
    return 2;
  } catch (const ComputationError& e) {
    write_error(err, "computation", e.what());
    return 2;
  } catch (const std::exception& e) {
    write_error(err, "internal", e.what());
    return 2;
  }
}

}  // namespace pwdts::cli
