#include "pwdts/backtest.hpp"
#include "pwdts/baselines.hpp"
#include "pwdts/bma.hpp"
#include "pwdts/cli.hpp"
#include "pwdts/hier_pwd.hpp"
#include "pwdts/normal_pwd.hpp"
#include "pwdts/synthetic.hpp"
#include "pwdts/weights.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace pwdts;

namespace {

PanelData make_panel(const std::vector<Matrix>& X, const std::vector<Vector>& y, std::vector<std::string> names,
                     std::vector<std::string> covariates, std::vector<int> dates) {
  require(X.size() == y.size(), "make_panel: X and y lists differ in length");
  PanelData p;
  for (std::size_t j = 0; j < X.size(); ++j) {
    Group g;
    g.name = j < names.size() ? names[j] : "G" + std::to_string(j);
    g.X = X[j];
    g.y = y[j];
    p.groups.push_back(std::move(g));
  }
  const Index T = p.T(), k = p.p();
  if (dates.empty())
    for (Index t = 0; t < T; ++t) dates.push_back(static_cast<int>(t + 1));
  if (covariates.empty())
    for (Index c = 0; c < k; ++c) covariates.push_back("x" + std::to_string(c));
  p.dates = std::move(dates);
  p.covariate_names = std::move(covariates);
  p.validate();
  return p;
}

py::tuple run_cli(const std::vector<std::string>& args) {
  std::vector<std::string> full{"pwdts"};
  full.insert(full.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : full) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return py::make_tuple(code, out.str(), err.str());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Power-weighted densities for time-series forecasting";
  m.attr("__version__") = cli::kVersion;

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<DegenerateError>(m, "DegenerateError", PyExc_ArithmeticError);
  py::register_exception<ComputationError>(m, "ComputationError", PyExc_RuntimeError);

  // weights and normal model
  m.def("scaled_count", &scaled_count, py::arg("alpha"), py::arg("n"));
  m.def("default_alpha_grid", &default_alpha_grid);

  py::class_<StudentTPredictive>(m, "StudentTPredictive")
      .def_readonly("df", &StudentTPredictive::df)
      .def_readonly("loc", &StudentTPredictive::loc)
      .def_readonly("scale2", &StudentTPredictive::scale2)
      .def("log_pdf", &StudentTPredictive::log_pdf)
      .def("pdf", &StudentTPredictive::pdf);

  py::class_<NormalPosterior>(m, "NormalPosterior")
      .def_readonly("mean_loc", &NormalPosterior::mean_loc)
      .def_readonly("t_alpha", &NormalPosterior::t_alpha)
      .def_readonly("var_shape", &NormalPosterior::var_shape)
      .def_readonly("var_rate", &NormalPosterior::var_rate)
      .def_readonly("degenerate", &NormalPosterior::degenerate);

  py::class_<AlphaEstimate>(m, "AlphaEstimate")
      .def_readonly("alpha_star", &AlphaEstimate::alpha_star)
      .def_readonly("log_pred_lik", &AlphaEstimate::log_pred_lik)
      .def_readonly("grid", &AlphaEstimate::grid)
      .def_readonly("per_alpha_loglik", &AlphaEstimate::per_alpha_loglik)
      .def_readonly("terms", &AlphaEstimate::terms);

  m.def("terminal_posterior", [](const std::vector<double>& y, double a) { return terminal_posterior(y, a); },
        py::arg("series"), py::arg("alpha"));
  m.def("predictive", [](const std::vector<double>& y, double a) { return predictive(y, a); }, py::arg("series"),
        py::arg("alpha"));
  m.def("log_pred_likelihood", [](const std::vector<double>& y, double a) { return log_pred_likelihood(y, a).value; },
        py::arg("series"), py::arg("alpha"));
  m.def("estimate_alpha",
        [](const std::vector<double>& y, const std::vector<double>& grid) {
          return estimate_alpha(y, grid.empty() ? default_alpha_grid() : grid);
        },
        py::arg("series"), py::arg("grid") = std::vector<double>{});

  // baselines
  py::class_<OlsFit>(m, "OlsFit")
      .def_readonly("beta", &OlsFit::beta)
      .def_readonly("sigma2", &OlsFit::sigma2)
      .def_readonly("cov", &OlsFit::cov);
  m.def("stationary_ols", [](const Matrix& X, const Vector& y) { return stationary_ols(X, y); });
  m.def("rolling_window_fit", [](const Matrix& X, const Vector& y, Index w) { return rolling_window_fit(X, y, w); });
  py::class_<Arima011Fit>(m, "Arima011Fit")
      .def_readonly("theta", &Arima011Fit::theta)
      .def_readonly("sigma2", &Arima011Fit::sigma2)
      .def_readonly("forecast", &Arima011Fit::forecast)
      .def_readonly("boundary", &Arima011Fit::boundary);
  m.def("ewma_fit", [](const std::vector<double>& y) { return ewma_fit(y); });
  m.def("local_level_discount",
        [](const std::vector<double>& y, double delta) {
          const LocalLevelState s = local_level_filter(y, {LocalLevelMode::Discount, delta, {}});
          return py::dict(py::arg("m") = s.m, py::arg("C") = s.C, py::arg("V") = s.V);
        },
        py::arg("series"), py::arg("delta"));

  // panels and hierarchical model
  py::class_<PanelData>(m, "Panel")
      .def_property_readonly("J", &PanelData::J)
      .def_property_readonly("T", &PanelData::T)
      .def_property_readonly("p", &PanelData::p)
      .def_readonly("dates", &PanelData::dates)
      .def_readonly("covariate_names", &PanelData::covariate_names)
      .def("X", [](const PanelData& p, Index j) { return p.groups.at(static_cast<std::size_t>(j)).X; })
      .def("y", [](const PanelData& p, Index j) { return p.groups.at(static_cast<std::size_t>(j)).y; })
      .def("names", [](const PanelData& p) {
        std::vector<std::string> n;
        for (const auto& g : p.groups) n.push_back(g.name);
        return n;
      });
  m.def("make_panel", &make_panel, py::arg("X"), py::arg("y"), py::arg("names") = std::vector<std::string>{},
        py::arg("covariate_names") = std::vector<std::string>{}, py::arg("dates") = std::vector<int>{});
  m.def("gen_hier_capm",
        [](int setting, std::size_t replication, std::uint64_t seed) {
          HierCapmConfig c = setting == 1 ? HierCapmConfig::setting1() : HierCapmConfig::setting2();
          c.seed = seed;
          return gen_hier_capm(c, replication).panel;
        },
        py::arg("setting") = 2, py::arg("replication") = 0, py::arg("seed") = 1);
  m.def("gen_factor_model",
        [](Index T, std::size_t replication, std::uint64_t seed) {
          FactorModelConfig c;
          c.T = T;
          c.seed = seed;
          return gen_factor_model(c, replication);
        },
        py::arg("T") = 500, py::arg("replication") = 0, py::arg("seed") = 1);

  m.def("estimate_alphas",
        [](const PanelData& p, bool hierarchical) {
          const PluginAlphaResult r = estimate_alphas_plugin(p, {}, {}, hierarchical);
          std::vector<double> a;
          for (const auto& g : r.groups) a.push_back(g.alpha_star);
          return py::dict(py::arg("alpha_star") = a, py::arg("iterations") = r.iterations,
                          py::arg("converged") = r.converged);
        },
        py::arg("panel"), py::arg("hierarchical") = true);
  m.def("fit_terminal",
        [](const PanelData& p, const std::vector<double>& alphas, int iterations, int burn_in, std::uint64_t seed) {
          GibbsConfig g;
          g.iterations = iterations;
          g.burn_in = burn_in;
          g.seed = seed;
          const TerminalFit f = fit_predict_terminal(p, alphas, g);
          Matrix beta(p.J(), p.p());
          for (Index j = 0; j < p.J(); ++j) beta.row(j) = f.groups[static_cast<std::size_t>(j)].beta_mean.transpose();
          return py::dict(py::arg("beta_mean") = beta, py::arg("beta0_mean") = f.beta0_mean,
                          py::arg("beta0_sd") = f.beta0_sd, py::arg("pooled") = f.pooled);
        },
        py::arg("panel"), py::arg("alphas"), py::arg("iterations") = 500, py::arg("burn_in") = 100,
        py::arg("seed") = 1);

  // BMA
  m.def("bma_inclusion",
        [](const PanelData& p, const std::vector<std::string>& factors) {
          const BmaDesign d = make_design(p.covariate_names, factors);
          const ModelWeights w = model_weights(p, d, enumerate_models(d.factor_names));
          py::dict out;
          for (const auto& f : d.factor_names) out[py::str(f)] = inclusion_probability(w, f);
          return out;
        },
        py::arg("panel"), py::arg("factors"));

  m.def("run_cli", &run_cli, py::arg("args"), "Runs the command line in-process; returns (exit code, stdout, stderr).");
}
