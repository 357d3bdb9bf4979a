#pragma once

#include "pwdts/common.hpp"
#include "pwdts/panel.hpp"
#include "pwdts/student_t.hpp"
#include "pwdts/weighted_regression.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace pwdts {

/// Factor subset; the intercept is always in the model.
struct ModelSpec {
  std::uint32_t mask = 0;

  [[nodiscard]] bool includes(std::size_t factor) const { return (mask >> factor) & 1U; }
  [[nodiscard]] std::size_t size() const;
  [[nodiscard]] std::string label(const std::vector<std::string>& factor_names) const;
};

/// All 2^F subsets in bit-set order (0 = intercept only). F <= 16.
std::vector<ModelSpec> enumerate_models(std::size_t factor_count);
std::vector<ModelSpec> enumerate_models(const std::vector<std::string>& factor_names);

/// Column layout of the candidate designs inside a panel.
struct BmaDesign {
  Index intercept_column = -1;  ///< -1 when the panel has no intercept column
  std::vector<Index> factor_columns;
  std::vector<std::string> factor_names;

  /// Panel columns of model `m`, in panel order.
  [[nodiscard]] std::vector<Index> columns(const ModelSpec& m) const;
  [[nodiscard]] Index full_size() const;
};

/**
 * Resolves factor names against the panel's covariate names; the column
 * named "const" (if any) is the intercept. Unknown factors throw
 * ValidationError unless `drop_missing`, in which case they are skipped
 * and reported through `dropped`.
 */
BmaDesign make_design(const std::vector<std::string>& covariate_names, const std::vector<std::string>& factors,
                      bool drop_missing = false, std::vector<std::string>* dropped = nullptr);

/// Normalized exp(loglik) under a uniform model prior, computed with max subtraction.
/// Non-finite entries get weight 0; throws DegenerateError if none is finite.
std::vector<double> normalize_log_weights(const std::vector<double>& loglik);

struct ModelWeights {
  std::vector<ModelSpec> models;
  std::vector<std::string> factor_names;
  Matrix loglik;       ///< J x K cumulative log predictive likelihood at alpha*_k
  Matrix probability;  ///< J x K, rows sum to 1
  Matrix alpha;        ///< J x K alpha*_k
  std::size_t terms = 0;
};

/**
 * Per group and model: alpha*_k maximizes the model's one-step-ahead plug-in
 * log likelihood (flat prior, separate groups); model probabilities are
 * proportional to exp of that maximum. All models share the alpha grid of
 * the largest design and score the same rows (those scored by the largest
 * design), so the log likelihoods are comparable.
 */
ModelWeights model_weights(const PanelView& panel, const BmaDesign& design, const std::vector<ModelSpec>& models,
                           std::vector<double> grid = {});

/// Sum of model probabilities over models that include `factor`; one value per group.
Vector inclusion_probability(const ModelWeights& weights, const std::string& factor);
double mean_inclusion_probability(const ModelWeights& weights, const std::string& factor);

/// Weighted mixture of per-model Student-t predictives.
struct MixturePredictive {
  std::vector<double> weights;
  std::vector<StudentTPredictive> components;

  [[nodiscard]] double mean() const;
  [[nodiscard]] double pdf(double y) const;
  [[nodiscard]] double log_pdf(double y) const;
};

/**
 * Per-group mixture predictive for the row after the panel's end, each
 * model fitted at its alpha*_k. `x_next` is J x p in panel columns.
 */
std::vector<MixturePredictive> bma_predict(const PanelView& panel, const BmaDesign& design,
                                           const ModelWeights& weights, const Matrix& x_next);

/**
 * Streaming model weights for one group: every model keeps a rolling
 * plug-in objective over the common grid, and weights at time t use data
 * through t only. alpha*_k is re-optimized every `refresh` observations.
 */
class RollingBma {
 public:
  RollingBma(const BmaDesign& design, std::vector<ModelSpec> models, std::vector<double> grid = {},
             std::size_t refresh = 1);

  void observe(const Eigen::Ref<const Vector>& x_full_row, double y);

  /// Uniform before any scored row.
  [[nodiscard]] std::vector<double> probabilities() const;
  [[nodiscard]] MixturePredictive predict(const Eigen::Ref<const Vector>& x_full_row) const;
  [[nodiscard]] Vector inclusion() const;
  [[nodiscard]] std::size_t terms() const { return terms_; }
  [[nodiscard]] const std::vector<ModelSpec>& models() const { return models_; }
  [[nodiscard]] double alpha(std::size_t k) const;
  /// Cumulative log likelihood of each model at its held alpha (zeros before any scored row).
  [[nodiscard]] std::vector<double> log_likelihoods() const;

 private:
  BmaDesign design_;
  std::vector<ModelSpec> models_;
  std::vector<std::vector<Index>> columns_;
  std::vector<double> grid_;
  std::vector<RollingPluginObjective> objectives_;
  std::vector<std::ptrdiff_t> held_;
  TermMask mask_;
  std::size_t refresh_;
  std::size_t n_ = 0;
  std::size_t terms_ = 0;
};

}  // namespace pwdts
