#include "pwdts/panel.hpp"

#include <string>

namespace pwdts {

void PanelData::validate() const {
  require(!groups.empty(), "panel has no groups");
  const Index t = groups[0].y.size();
  const Index p0 = groups[0].X.cols();
  require(dates.empty() || static_cast<Index>(dates.size()) == t, "panel date index length differs from T");
  require(covariate_names.empty() || static_cast<Index>(covariate_names.size()) == p0,
          "panel covariate names do not match p");
  for (const Group& g : groups) {
    require(g.y.size() == t, "group '" + g.name + "' has a different series length");
    require(g.X.rows() == t && g.X.cols() == p0, "group '" + g.name + "' has a different covariate layout");
    require(g.X.allFinite() && g.y.allFinite(), "group '" + g.name + "' contains non-finite values");
  }
  for (std::size_t i = 1; i < dates.size(); ++i) {
    require(dates[i] > dates[i - 1], "panel dates must be strictly increasing");
  }
}

PanelView::PanelView(const PanelData& panel, Index end) : panel_(&panel), end_(end) {
  require(end >= 0 && end <= panel.T(), "panel view end out of range");
}

PanelData select_columns(const PanelData& panel, const std::vector<Index>& columns) {
  PanelData out;
  out.dates = panel.dates;
  for (Index c : columns) {
    require(c >= 0 && c < panel.p(), "select_columns: column out of range");
    if (!panel.covariate_names.empty()) out.covariate_names.push_back(panel.covariate_names[static_cast<std::size_t>(c)]);
  }
  out.groups.reserve(panel.groups.size());
  for (const Group& g : panel.groups) {
    Group sel;
    sel.name = g.name;
    sel.y = g.y;
    sel.X.resize(g.X.rows(), static_cast<Index>(columns.size()));
    for (std::size_t k = 0; k < columns.size(); ++k) sel.X.col(static_cast<Index>(k)) = g.X.col(columns[k]);
    out.groups.push_back(std::move(sel));
  }
  return out;
}

}  // namespace pwdts
