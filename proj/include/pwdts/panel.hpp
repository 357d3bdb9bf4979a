#pragma once

#include "pwdts/common.hpp"

#include <string>
#include <vector>

namespace pwdts {

/// One response series with its covariate rows (T x p).
struct Group {
  std::string name;
  Matrix X;
  Vector y;
};

/**
 * J aligned groups sharing the date index and covariate layout.
 * Dates are ordinal (YYYYMM for monthly data).
 */
struct PanelData {
  std::vector<Group> groups;
  std::vector<int> dates;
  std::vector<std::string> covariate_names;

  [[nodiscard]] Index J() const { return static_cast<Index>(groups.size()); }
  [[nodiscard]] Index T() const { return groups.empty() ? static_cast<Index>(dates.size()) : groups[0].y.size(); }
  [[nodiscard]] Index p() const { return groups.empty() ? 0 : groups[0].X.cols(); }

  /// Throws ValidationError unless all groups share T and p and values are finite.
  void validate() const;
};

/**
 * Read-only prefix of a panel: rows [0, end). Methods in a backtest see
 * only the view, which is how look-ahead is ruled out.
 */
class PanelView {
 public:
  PanelView(const PanelData& panel) : panel_(&panel), end_(panel.T()) {}  // NOLINT(implicit)
  PanelView(const PanelData& panel, Index end);

  [[nodiscard]] Index J() const { return panel_->J(); }
  [[nodiscard]] Index T() const { return end_; }
  [[nodiscard]] Index p() const { return panel_->p(); }

  [[nodiscard]] auto X(Index j) const { return panel_->groups[static_cast<std::size_t>(j)].X.topRows(end_); }
  [[nodiscard]] auto y(Index j) const { return panel_->groups[static_cast<std::size_t>(j)].y.head(end_); }
  [[nodiscard]] const std::string& name(Index j) const { return panel_->groups[static_cast<std::size_t>(j)].name; }
  [[nodiscard]] int date(Index t) const { return panel_->dates[static_cast<std::size_t>(t)]; }
  [[nodiscard]] const std::vector<std::string>& covariate_names() const { return panel_->covariate_names; }
  [[nodiscard]] const PanelData& panel() const { return *panel_; }

 private:
  const PanelData* panel_;
  Index end_;
};

/// Copy of the selected covariate columns of every group.
PanelData select_columns(const PanelData& panel, const std::vector<Index>& columns);

}  // namespace pwdts
