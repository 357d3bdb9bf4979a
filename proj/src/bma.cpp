#include "pwdts/bma.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

namespace pwdts {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Vector gather(const Eigen::Ref<const Vector>& x, const std::vector<Index>& cols) {
  Vector out(static_cast<Index>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) out[static_cast<Index>(i)] = x[cols[i]];
  return out;
}

}  // namespace

std::size_t ModelSpec::size() const { return static_cast<std::size_t>(std::popcount(mask)); }

std::string ModelSpec::label(const std::vector<std::string>& factor_names) const {
  std::string out;
  for (std::size_t f = 0; f < factor_names.size(); ++f) {
    if (!includes(f)) continue;
    if (!out.empty()) out += '+';
    out += factor_names[f];
  }
  return out.empty() ? "const" : out;
}

std::vector<ModelSpec> enumerate_models(std::size_t factor_count) {
  require(factor_count <= 16, "enumerate_models: at most 16 factors");
  std::vector<ModelSpec> out(std::size_t{1} << factor_count);
  for (std::size_t m = 0; m < out.size(); ++m) out[m].mask = static_cast<std::uint32_t>(m);
  return out;
}

std::vector<ModelSpec> enumerate_models(const std::vector<std::string>& factor_names) {
  return enumerate_models(factor_names.size());
}

std::vector<Index> BmaDesign::columns(const ModelSpec& m) const {
  std::vector<Index> cols;
  if (intercept_column >= 0) cols.push_back(intercept_column);
  for (std::size_t f = 0; f < factor_columns.size(); ++f) {
    if (m.includes(f)) cols.push_back(factor_columns[f]);
  }
  std::sort(cols.begin(), cols.end());
  return cols;
}

Index BmaDesign::full_size() const {
  return static_cast<Index>(factor_columns.size()) + (intercept_column >= 0 ? 1 : 0);
}

BmaDesign make_design(const std::vector<std::string>& covariate_names, const std::vector<std::string>& factors,
                      bool drop_missing, std::vector<std::string>* dropped) {
  BmaDesign d;
  auto find = [&](const std::string& name) -> Index {
    const auto it = std::find(covariate_names.begin(), covariate_names.end(), name);
    return it == covariate_names.end() ? -1 : static_cast<Index>(it - covariate_names.begin());
  };
  d.intercept_column = find("const");
  for (const auto& f : factors) {
    require(f != "const", "bma: the intercept is always included and cannot be a factor");
    const Index c = find(f);
    if (c < 0) {
      require(drop_missing, "bma: unknown factor '" + f + "'");
      if (dropped) dropped->push_back(f);
      continue;
    }
    require(std::find(d.factor_names.begin(), d.factor_names.end(), f) == d.factor_names.end(),
            "bma: duplicate factor '" + f + "'");
    d.factor_columns.push_back(c);
    d.factor_names.push_back(f);
  }
  require(d.factor_names.size() <= 16, "bma: at most 16 factors");
  return d;
}

std::vector<double> normalize_log_weights(const std::vector<double>& loglik) {
  double hi = kNegInf;
  for (double v : loglik) {
    if (std::isfinite(v)) hi = std::max(hi, v);
  }
  if (!std::isfinite(hi)) throw DegenerateError("bma: no model has a finite predictive likelihood");
  std::vector<double> w(loglik.size(), 0.0);
  double total = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) {
    if (std::isfinite(loglik[k])) w[k] = std::exp(loglik[k] - hi);
    total += w[k];
  }
  for (double& v : w) v /= total;
  return w;
}

// ---------------------------------------------------------------------------

RollingBma::RollingBma(const BmaDesign& design, std::vector<ModelSpec> models, std::vector<double> grid,
                       std::size_t refresh)
    : design_(design),
      models_(std::move(models)),
      grid_(grid.empty() ? regression_alpha_grid(design.full_size()) : std::move(grid)),
      mask_(design.full_size(), grid_.front()),
      refresh_(refresh) {
  require(!models_.empty(), "bma: no models");
  require(refresh_ >= 1, "bma: refresh cadence must be at least 1");
  for (const auto& m : models_) {
    require((m.mask >> design_.factor_columns.size()) == 0, "bma: model references an unknown factor");
    auto cols = design_.columns(m);
    require(!cols.empty(), "bma: the empty model needs an intercept column");
    objectives_.emplace_back(static_cast<Index>(cols.size()), grid_, RegressionPrior::diffuse(static_cast<Index>(cols.size())));
    columns_.push_back(std::move(cols));
  }
  held_.assign(models_.size(), -1);
}

void RollingBma::observe(const Eigen::Ref<const Vector>& x_full_row, double y) {
  std::vector<Index> full_cols;
  if (design_.intercept_column >= 0) full_cols.push_back(design_.intercept_column);
  full_cols.insert(full_cols.end(), design_.factor_columns.begin(), design_.factor_columns.end());
  std::sort(full_cols.begin(), full_cols.end());
  const bool scored = mask_.next(gather(x_full_row, full_cols));
  if (scored) ++terms_;
  for (std::size_t k = 0; k < models_.size(); ++k) objectives_[k].observe(gather(x_full_row, columns_[k]), y, scored);
  ++n_;
  const bool refresh_now = n_ % refresh_ == 0;
  for (std::size_t k = 0; k < models_.size(); ++k) {
    if (refresh_now || held_[k] < 0) held_[k] = objectives_[k].best_index();
  }
}

std::vector<double> RollingBma::log_likelihoods() const {
  std::vector<double> ll(models_.size(), 0.0);
  if (terms_ == 0) return ll;
  for (std::size_t k = 0; k < models_.size(); ++k) {
    ll[k] = held_[k] >= 0 ? objectives_[k].objective()[static_cast<std::size_t>(held_[k])] : kNegInf;
  }
  return ll;
}

std::vector<double> RollingBma::probabilities() const { return normalize_log_weights(log_likelihoods()); }

double RollingBma::alpha(std::size_t k) const { return held_[k] >= 0 ? grid_[static_cast<std::size_t>(held_[k])] : 1.0; }

MixturePredictive RollingBma::predict(const Eigen::Ref<const Vector>& x_full_row) const {
  MixturePredictive mix;
  const auto w = probabilities();
  for (std::size_t k = 0; k < models_.size(); ++k) {
    if (w[k] == 0.0) continue;
    const std::size_t g = held_[k] >= 0 ? static_cast<std::size_t>(held_[k]) : grid_.size() - 1;
    mix.weights.push_back(w[k]);
    mix.components.push_back(plugin_predictive(objectives_[k].fit(g), gather(x_full_row, columns_[k])));
  }
  return mix;
}

Vector RollingBma::inclusion() const {
  const auto w = probabilities();
  Vector inc = Vector::Zero(static_cast<Index>(design_.factor_names.size()));
  for (std::size_t k = 0; k < models_.size(); ++k) {
    for (std::size_t f = 0; f < design_.factor_names.size(); ++f) {
      if (models_[k].includes(f)) inc[static_cast<Index>(f)] += w[k];
    }
  }
  return inc;
}

// ---------------------------------------------------------------------------

ModelWeights model_weights(const PanelView& panel, const BmaDesign& design, const std::vector<ModelSpec>& models,
                           std::vector<double> grid) {
  const Index J = panel.J(), K = static_cast<Index>(models.size());
  ModelWeights out;
  out.models = models;
  out.factor_names = design.factor_names;
  out.loglik.resize(J, K);
  out.probability.resize(J, K);
  out.alpha.resize(J, K);
  for (Index j = 0; j < J; ++j) {
    RollingBma roll(design, models, grid);
    const auto X = panel.X(j);
    const auto y = panel.y(j);
    for (Index t = 0; t < panel.T(); ++t) roll.observe(X.row(t).transpose(), y[t]);
    const auto ll = roll.log_likelihoods();
    const auto w = normalize_log_weights(ll);
    for (Index k = 0; k < K; ++k) {
      out.loglik(j, k) = ll[static_cast<std::size_t>(k)];
      out.probability(j, k) = w[static_cast<std::size_t>(k)];
      out.alpha(j, k) = roll.alpha(static_cast<std::size_t>(k));
    }
    out.terms = roll.terms();
  }
  return out;
}

Vector inclusion_probability(const ModelWeights& weights, const std::string& factor) {
  const auto it = std::find(weights.factor_names.begin(), weights.factor_names.end(), factor);
  require(it != weights.factor_names.end(), "inclusion_probability: unknown factor '" + factor + "'");
  const auto f = static_cast<std::size_t>(it - weights.factor_names.begin());
  Vector out = Vector::Zero(weights.probability.rows());
  for (std::size_t k = 0; k < weights.models.size(); ++k) {
    if (weights.models[k].includes(f)) out += weights.probability.col(static_cast<Index>(k));
  }
  return out;
}

double mean_inclusion_probability(const ModelWeights& weights, const std::string& factor) {
  const Vector v = inclusion_probability(weights, factor);
  require(v.size() > 0, "inclusion_probability: no groups");
  return v.mean();
}

double MixturePredictive::mean() const {
  double m = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k) m += weights[k] * components[k].loc;
  return m;
}

double MixturePredictive::pdf(double y) const {
  double d = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k) d += weights[k] * components[k].pdf(y);
  return d;
}

double MixturePredictive::log_pdf(double y) const {
  std::vector<double> terms(weights.size());
  double hi = kNegInf;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    terms[k] = std::log(weights[k]) + components[k].log_pdf(y);
    hi = std::max(hi, terms[k]);
  }
  if (!std::isfinite(hi)) return hi;
  double s = 0.0;
  for (double t : terms) s += std::exp(t - hi);
  return hi + std::log(s);
}

std::vector<MixturePredictive> bma_predict(const PanelView& panel, const BmaDesign& design,
                                           const ModelWeights& weights, const Matrix& x_next) {
  const Index J = panel.J(), p = panel.p();
  require(x_next.rows() == J && x_next.cols() == p, "bma_predict: x_next must be J x p");
  require(weights.probability.rows() == J, "bma_predict: weights do not match the panel");
  std::vector<MixturePredictive> out(static_cast<std::size_t>(J));
  for (Index j = 0; j < J; ++j) {
    for (std::size_t k = 0; k < weights.models.size(); ++k) {
      const double w = weights.probability(j, static_cast<Index>(k));
      if (w == 0.0) continue;
      const auto cols = design.columns(weights.models[k]);
      Matrix Xk(panel.T(), static_cast<Index>(cols.size()));
      for (std::size_t c = 0; c < cols.size(); ++c) Xk.col(static_cast<Index>(c)) = panel.X(j).col(cols[c]);
      const double a = weights.alpha(j, static_cast<Index>(k));
      const auto stats = WeightedRegressionStats::exponential(Xk, panel.y(j), a);
      out[static_cast<std::size_t>(j)].weights.push_back(w);
      out[static_cast<std::size_t>(j)].components.push_back(
          plugin_predictive(plugin_fit(stats, RegressionPrior::diffuse(Xk.cols())), gather(x_next.row(j).transpose(), cols)));
    }
  }
  return out;
}

}  // namespace pwdts
